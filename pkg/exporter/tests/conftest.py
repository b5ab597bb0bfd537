import numpy as np
import pytest
import torch


@pytest.fixture(scope="session")
def tiny_bert():
    """A small randomly initialized BERT plus an offline wordpiece tokenizer.

    Eight encoder layers (the exporter stacks the last six) with hidden size
    32, so exported rows have 192 features.
    """
    from transformers import BertConfig, BertModel, BertTokenizer

    torch.manual_seed(0)
    config = BertConfig(
        vocab_size=64, hidden_size=32, num_hidden_layers=8,
        num_attention_heads=4, intermediate_size=64,
        max_position_embeddings=512,
    )
    model = BertModel(config)
    model.eval()
    return config, model


@pytest.fixture(scope="session")
def tiny_tokenizer(tmp_path_factory):
    from transformers import BertTokenizer

    vocab = (
        ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
        + list("abcdefghijklmnopqrstuvwxyz")
        + ["the", "a", "movie", "film", "good", "bad", "great", "awful",
           "##ly", "##s", "was", "is", "not", "very", "br", "<", ">", "/"]
    )
    path = tmp_path_factory.mktemp("vocab") / "vocab.txt"
    path.write_text("\n".join(vocab) + "\n")
    return BertTokenizer(str(path), do_lower_case=True)


@pytest.fixture()
def review_csv(tmp_path):
    rows = [
        ("One of the best movies ever, truly great.", "positive"),
        ("A wonderful little production. <br /><br />Very good.", "positive"),
        ("Awful film, bad acting, not good at all.", "negative"),
        ("The movie was very bad.", "negative"),
        ("Great, great, great!", "positive"),
        ("Terribly boring and awful.", "negative"),
    ]
    path = tmp_path / "reviews.csv"
    lines = ["review,sentiment"]
    for text, label in rows:
        escaped = text.replace('"', '""')
        lines.append(f'"{escaped}",{label}')
    path.write_text("\n".join(lines) + "\n")
    return path


def rand_image_batch(seed=0, n=2, size=50):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(n, 1, size, size)).astype(np.float32)
