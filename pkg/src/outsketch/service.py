"""HTTP inference service: sketch-guided outpainting over one loaded
checkpoint, a health probe, and an append-only rating endpoint feeding the
satisfaction metric.

Rasters travel base64-encoded as lossless PNG so determinism contracts hold
end to end.
"""

import base64
import binascii
import io
import threading
import time
from datetime import datetime, timezone

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from PIL import Image, UnidentifiedImageError
from pydantic import BaseModel, Field

from .blocks import binarize_sketch
from .generator import outpaint_steps
from .training import config_fingerprint, load_checkpoint, restore_models

RATING_HEADER = "example_id,rating,rater_id,timestamp"


class OutpaintRequest(BaseModel):
    image: str
    sketches: list = Field(min_length=1)
    binarize_server_side: bool = True


class OutpaintResponse(BaseModel):
    image: str
    model_fingerprint: str
    elapsed_ms: float


class RateRequest(BaseModel):
    example_id: str
    rating: int
    rater_id: str = "anonymous"


def _decode_png(b64_payload, mode):
    """Base64 PNG to a uint8 array; undecodable payloads are a 400."""
    try:
        raw = base64.b64decode(b64_payload, validate=True)
        with Image.open(io.BytesIO(raw)) as img:
            return np.asarray(img.convert(mode))
    except (binascii.Error, UnidentifiedImageError, OSError, ValueError) as exc:
        raise HTTPException(status_code=400, detail=f"undecodable raster payload: {exc}")


def _encode_png(array):
    buf = io.BytesIO()
    Image.fromarray(array).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def create_app(checkpoint=None, bundle=None, ratings_path="ratings.csv"):
    """Build the service around one checkpoint (path) or an in-memory bundle
    of (models dict, config). With neither, every inference call is a 503."""
    app = FastAPI(title="outsketch service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])

    state = {"generator": None, "detector": None, "scale": None,
             "fingerprint": None, "started": time.monotonic()}
    ratings_lock = threading.Lock()

    if checkpoint is not None:
        ckpt = load_checkpoint(checkpoint)
        models, _, cfg = restore_models(ckpt)
        state.update(generator=models["generator"].eval(),
                     detector=models["detector"],
                     scale=cfg.scale, fingerprint=ckpt["fingerprint"])
    elif bundle is not None:
        models, cfg = bundle
        state.update(generator=models["generator"].eval(),
                     detector=models["detector"],
                     scale=cfg.scale, fingerprint=config_fingerprint(cfg))

    def require_model():
        if state["generator"] is None:
            raise HTTPException(status_code=503, detail="model not loaded")

    @app.get("/health")
    def health():
        if state["generator"] is None:
            raise HTTPException(status_code=503, detail="loading")
        return {
            "status": "ok",
            "model_fingerprint": state["fingerprint"],
            "scale": state["scale"],
            "uptime_s": time.monotonic() - state["started"],
        }

    @app.post("/outpaint", response_model=OutpaintResponse)
    def outpaint(request: OutpaintRequest):
        require_model()
        started = time.perf_counter()
        generator = state["generator"]
        h, w = generator.scale.half_hw

        image_u8 = _decode_png(request.image, "RGB")
        if image_u8.shape[:2] != (h, w):
            raise HTTPException(
                status_code=422,
                detail=f"image is {image_u8.shape[0]}x{image_u8.shape[1]}, expected {h}x{w}",
            )
        sketches = []
        for i, payload in enumerate(request.sketches):
            sk_u8 = _decode_png(payload, "L")
            if sk_u8.shape != (h, w):
                raise HTTPException(
                    status_code=422,
                    detail=f"sketch {i} is {sk_u8.shape[0]}x{sk_u8.shape[1]}, expected {h}x{w}",
                )
            sk = sk_u8.astype(np.float32) / 255.0
            if request.binarize_server_side:
                sk = binarize_sketch(sk, 0.6)
            elif not np.isin(sk_u8, (0, 255)).all():
                raise HTTPException(
                    status_code=422,
                    detail=f"sketch {i} is not binary and binarize_server_side is off",
                )
            sketches.append(sk.astype(np.float32))

        image_f = image_u8.astype(np.float32) / 255.0 * 2.0 - 1.0
        panorama = outpaint_steps(generator, image_f, sketches, state["detector"])
        out_u8 = np.clip(np.round((panorama + 1.0) * 0.5 * 255.0), 0, 255).astype(np.uint8)
        out_u8[:, :w] = image_u8  # authentic input pasted back byte-exactly
        return OutpaintResponse(
            image=_encode_png(out_u8),
            model_fingerprint=state["fingerprint"],
            elapsed_ms=(time.perf_counter() - started) * 1000.0,
        )

    @app.post("/rate")
    def rate(request: RateRequest):
        if request.rating not in (0, 1, 2):
            raise HTTPException(status_code=422,
                                detail=f"rating must be 0, 1 or 2, got {request.rating}")
        example_id = request.example_id.replace(",", "_").replace("\n", " ")
        rater_id = request.rater_id.replace(",", "_").replace("\n", " ")
        timestamp = datetime.now(timezone.utc).isoformat()
        line = f"{example_id},{request.rating},{rater_id},{timestamp}\n"
        with ratings_lock:
            fresh = True
            try:
                with open(ratings_path) as fh:
                    fresh = fh.read(1) == ""
            except OSError:
                pass
            with open(ratings_path, "a") as fh:
                if fresh:
                    fh.write(RATING_HEADER + "\n")
                fh.write(line)
        return {"status": "recorded", "example_id": example_id, "rating": request.rating}

    return app
