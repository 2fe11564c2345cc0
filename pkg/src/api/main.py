"""
Dynamic-pooling basecaller: FastAPI service.

Exposes:
  GET  /health       → service status and whether a checkpoint is loaded
  GET  /presets      → shipped architecture presets
  GET  /presets/{name}
  POST /evaluate     → score calls against references (accuracy + speed fit)
  POST /basecall     → call one raw signal (needs DYNPOOL_CHECKPOINT)
"""

import logging
import os
import sys
from pathlib import Path
from typing import Any, Optional

# Load .env file if present (DYNPOOL_CHECKPOINT, DYNPOOL_LOG_LEVEL)
try:
    from dotenv import load_dotenv
    load_dotenv(Path(__file__).parent.parent.parent / ".env")
except ImportError:
    pass  # python-dotenv not installed; rely on environment variables set externally

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field


def _numpy_safe(obj: Any) -> Any:
    """Recursively convert numpy scalars/arrays to native Python types."""
    if isinstance(obj, dict):
        return {k: _numpy_safe(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_numpy_safe(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return None if not np.isfinite(obj) else float(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _numpy_safe(obj.tolist())
    return obj

# ── Path setup ────────────────────────────────────────────────────────────────
ROOT = Path(__file__).parent.parent.parent
sys.path.insert(0, str(ROOT))

from src.config import list_presets, load_preset
from src.errors import CheckpointError, ConfigError, DynPoolError
from src.models.basecaller import call_one, load_model
from src.models.evaluation import evaluate

logger = logging.getLogger(__name__)

# ── App setup ─────────────────────────────────────────────────────────────────
app = FastAPI(
    title="Dynamic Pooling Basecaller",
    description="Base calling, evaluation and pooling traces for synthetic nanopore-like reads",
    version="1.0.0",
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_methods=["*"],
    allow_headers=["*"],
)

# ── Cached model loading ──────────────────────────────────────────────────────
_MODEL = None
_MODEL_PATH: Optional[str] = None


def get_model():
    """Model from DYNPOOL_CHECKPOINT, loaded once per path; None when unset."""
    global _MODEL, _MODEL_PATH
    path = os.getenv("DYNPOOL_CHECKPOINT", "")
    if not path:
        return None
    if _MODEL is None or _MODEL_PATH != path:
        _MODEL = load_model(path)
        _MODEL_PATH = path
    return _MODEL


# ── Request/Response models ───────────────────────────────────────────────────
class EvaluateRequest(BaseModel):
    calls: dict[str, str]
    references: dict[str, str]
    speeds: Optional[dict[str, float]] = None
    length_factors: Optional[dict[str, float]] = None


class BasecallRequest(BaseModel):
    read_id: str = "read"
    signal: list[float]
    decoder: str = Field(default="greedy", pattern="^(greedy|beam)$")
    beam_width: Optional[int] = Field(default=None, ge=1, le=256)


class BasecallResponse(BaseModel):
    read_id: str
    sequence: str
    quality: str
    n_signals: int
    output_length: Optional[int] = None
    mean_length_factor: Optional[float] = None
    pooled_positions: Optional[list[float]] = None


# ── Endpoints ─────────────────────────────────────────────────────────────────

@app.get("/health")
def health():
    return {
        "status": "ok",
        "service": "Dynamic Pooling Basecaller",
        "checkpoint": os.getenv("DYNPOOL_CHECKPOINT") or None,
    }


@app.get("/presets")
def get_presets():
    """Shipped architecture presets (all scaled stand-ins)."""
    return {"presets": list_presets()}


@app.get("/presets/{name}")
def get_preset(name: str):
    try:
        return load_preset(name).model_dump(mode="json")
    except ConfigError as e:
        raise HTTPException(status_code=404, detail=str(e))


@app.post("/evaluate")
def post_evaluate(req: EvaluateRequest):
    """Align every call to its reference; returns the report summary and per-read rows."""
    try:
        report = evaluate(req.calls, req.references, req.speeds, req.length_factors)
    except ValueError as e:
        raise HTTPException(status_code=422, detail=str(e))
    result = report.to_dict()
    result["per_read"] = report.per_read.to_dict(orient="records")
    return JSONResponse(content=_numpy_safe(result))


@app.post("/basecall", response_model=BasecallResponse)
def post_basecall(req: BasecallRequest):
    try:
        model = get_model()
    except (CheckpointError, FileNotFoundError) as e:
        raise HTTPException(status_code=500, detail=f"checkpoint unusable: {e}")
    if model is None:
        raise HTTPException(status_code=503, detail="no checkpoint configured; set DYNPOOL_CHECKPOINT")

    signal = np.asarray(req.signal, dtype=np.float32)
    if not np.isfinite(signal).all():
        raise HTTPException(status_code=422, detail="signal contains non-finite values")
    width = 1 if req.decoder == "greedy" else (req.beam_width or model.config.head.beam_width)
    try:
        result = call_one(model, signal, req.read_id, width)
    except DynPoolError as e:
        raise HTTPException(status_code=500, detail=str(e))

    trace = result.trace
    return BasecallResponse(
        read_id=req.read_id,
        sequence=result.record.sequence,
        quality=result.record.quality,
        n_signals=result.n_signals,
        output_length=int(trace.output_length) if trace else None,
        mean_length_factor=float(trace.mean_length_factor) if trace else None,
        pooled_positions=[float(v) for v in trace.pooled_positions] if trace else None,
    )


# ── Dev runner ────────────────────────────────────────────────────────────────
if __name__ == "__main__":
    import uvicorn
    uvicorn.run("src.api.main:app", host="0.0.0.0", port=8000, reload=True)
