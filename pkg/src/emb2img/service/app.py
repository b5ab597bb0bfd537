"""FastAPI service wrapping the pipeline operations.

Paths in requests refer to the server's filesystem; operations run
synchronously and the response summarizes what was written. Toolkit errors
surface as HTTP 422 with a stable error class name and exit code.
"""

from __future__ import annotations

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__, pipeline
from ..errors import IOFailure, ToolkitError
from ..tsne import TsneConfig
from . import schemas

app = FastAPI(title="emb2img", version=__version__)


@app.exception_handler(ToolkitError)
async def toolkit_error_handler(request, exc: ToolkitError):
    return JSONResponse(
        status_code=422,
        content=schemas.ErrorBody(
            error=type(exc).__name__,
            detail=str(exc),
            exit_code=exc.exit_code,
        ).model_dump(),
    )


@app.exception_handler(FileNotFoundError)
async def missing_file_handler(request, exc: FileNotFoundError):
    return JSONResponse(
        status_code=422,
        content=schemas.ErrorBody(
            error="IOFailure", detail=str(exc), exit_code=IOFailure.exit_code
        ).model_dump(),
    )


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/layout", response_model=schemas.LayoutResponse)
def layout(req: schemas.LayoutRequest):
    cfg = TsneConfig(
        perplexity=req.perplexity,
        n_iter=req.n_iter,
        learning_rate=req.learning_rate,
        early_exaggeration_factor=req.early_exaggeration_factor,
        early_exaggeration_iters=req.early_exaggeration_iters,
        momentum_initial=req.momentum_initial,
        momentum_final=req.momentum_final,
        momentum_switch_iter=req.momentum_switch_iter,
        seed=req.seed,
    )
    return pipeline.run_layout(
        req.embeddings_path, req.out_path,
        grid_w=req.grid_w, grid_h=req.grid_h, cfg=cfg,
    )


@app.post("/render", response_model=schemas.RenderResponse)
def render(req: schemas.RenderRequest):
    return pipeline.run_render(
        req.embeddings_path, req.layout_path, req.out_path,
        normalize=req.normalize, epsilon=req.epsilon,
    )


@app.post("/train", response_model=schemas.TrainResponse)
def train(req: schemas.TrainRequest):
    return pipeline.run_train(
        req.images_path, req.out_checkpoint, req.out_metrics,
        weights_path=req.weights_path, spec=req.spec,
        cae_lr=req.cae_lr, lc_lr=req.lc_lr,
        epochs=req.epochs, batch_size=req.batch_size,
        split=req.split, seed=req.seed,
    )


@app.post("/eval", response_model=schemas.EvalResponse)
def evaluate(req: schemas.EvalRequest):
    return pipeline.run_eval(req.images_path, req.checkpoint_path)


@app.post("/inspect", response_model=schemas.InspectResponse)
def inspect(req: schemas.InspectRequest):
    return pipeline.run_inspect(req.images_path, req.index, req.out_path)
