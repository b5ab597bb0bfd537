import numpy as np
import pytest

from emb2img_exporter.formats import write_emb1, write_ten1

from emb2img import formats as toolkit_formats


def test_emb1_reads_back_in_toolkit(tmp_path):
    rng = np.random.default_rng(0)
    values = rng.normal(size=(8, 12)).astype(np.float32)
    labels = rng.integers(0, 2, 8).astype(np.uint8)
    path = tmp_path / "x.emb1"
    write_emb1(values, labels, path)
    loaded = toolkit_formats.load_embeddings(path)
    assert loaded.values.tobytes() == values.tobytes()
    assert np.array_equal(loaded.labels, labels)


def test_ten1_reads_back_in_toolkit(tmp_path):
    rng = np.random.default_rng(1)
    entries = {
        "ext.conv1.w": rng.normal(size=(4, 3, 3, 3)).astype(np.float32),
        "ext.conv1.b": rng.normal(size=4).astype(np.float32),
    }
    path = tmp_path / "w.ten1"
    write_ten1(entries, path)
    store = toolkit_formats.load_tensors(path)
    assert store.names() == list(entries)
    for entry in store.entries:
        assert entry.data.tobytes() == entries[entry.name].ravel().tobytes()
        assert entry.shape == entries[entry.name].shape


def test_emb1_rejects_bad_inputs(tmp_path):
    values = np.ones((3, 4), dtype=np.float32)
    with pytest.raises(ValueError):
        write_emb1(values, np.zeros(2, np.uint8), tmp_path / "a.emb1")
    with pytest.raises(ValueError):
        write_emb1(values, np.full(3, 2, np.uint8), tmp_path / "b.emb1")
    values[0, 0] = np.nan
    with pytest.raises(ValueError):
        write_emb1(values, np.zeros(3, np.uint8), tmp_path / "c.emb1")


def test_ten1_rejects_nonfinite(tmp_path):
    with pytest.raises(ValueError):
        write_ten1({"t": np.array([np.inf], np.float32)}, tmp_path / "t.ten1")
