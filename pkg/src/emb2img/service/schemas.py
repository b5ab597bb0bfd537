"""Request and response models for the service endpoints."""

from __future__ import annotations

from pydantic import BaseModel, Field


class LayoutRequest(BaseModel):
    embeddings_path: str
    out_path: str
    grid_w: int = Field(default=50, ge=2)
    grid_h: int = Field(default=50, ge=2)
    perplexity: float = 30.0
    n_iter: int = 1000
    learning_rate: float = 200.0
    early_exaggeration_factor: float = 12.0
    early_exaggeration_iters: int = 250
    momentum_initial: float = 0.5
    momentum_final: float = 0.8
    momentum_switch_iter: int = 250
    seed: int = 0


class DensitySummary(BaseModel):
    total: int
    occupied_cells: int
    max_per_cell: int


class LayoutResponse(BaseModel):
    out_path: str
    grid_w: int
    grid_h: int
    d: int
    seed: int
    config_hash: int
    density: DensitySummary
    tsne: dict


class RenderRequest(BaseModel):
    embeddings_path: str
    layout_path: str
    out_path: str
    normalize: bool = False
    epsilon: float = Field(default=1e-8, gt=0)


class NormStats(BaseModel):
    mu: float
    sigma: float
    epsilon: float


class RenderResponse(BaseModel):
    out_path: str
    n: int
    grid_w: int
    grid_h: int
    normalized: bool
    stats: NormStats | None = None


class TrainRequest(BaseModel):
    images_path: str
    out_checkpoint: str
    out_metrics: str
    weights_path: str | None = None
    spec: str = "none"
    cae_lr: float | None = None
    lc_lr: float | None = None
    epochs: int = Field(default=15, ge=1)
    batch_size: int = Field(default=32, ge=2)
    split: float = 0.8
    seed: int = 0


class EpochRecord(BaseModel):
    epoch: int
    train_loss: float
    val_accuracy: float


class TrainResponse(BaseModel):
    checkpoint: str
    metrics_path: str
    config: dict
    history: list[EpochRecord]
    final_val_accuracy: float | None
    train_samples: int
    val_samples: int


class EvalRequest(BaseModel):
    images_path: str
    checkpoint_path: str


class EvalResponse(BaseModel):
    accuracy: float
    n: int


class InspectRequest(BaseModel):
    images_path: str
    index: int
    out_path: str


class InspectResponse(BaseModel):
    out_path: str
    index: int
    label: int
    pixel_min: float
    pixel_max: float


class ErrorBody(BaseModel):
    error: str
    detail: str
    exit_code: int
