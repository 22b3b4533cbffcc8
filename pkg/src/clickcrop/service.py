"""HTTP facade: interactive sessions over a small REST API.

Sessions live in memory only and expire after idle TTL; per-session
operations are serialized behind a lock so concurrent clicks never interleave
mid-pipeline. Masks travel as single-channel {0,255} PNG.
"""
from __future__ import annotations

import json
import logging
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from fastapi import FastAPI, File, HTTPException, Query, Request, Response, UploadFile
from pydantic import BaseModel

from .backends import create_backend
from .crops import SERIES
from .maskio import decode_image_rgb, decode_mask_png, encode_mask_png
from .raster import iou
from .session import Session

log = logging.getLogger("clickcrop.service")

DEFAULT_TTL_SECONDS = 30 * 60


class ClickRequest(BaseModel):
    x: int
    y: int
    polarity: Literal["positive", "negative"]


@dataclass
class _Entry:
    session: Session
    gt: np.ndarray | None
    series: str
    backend: str
    created_at: float
    last_access: float
    lock: threading.Lock = field(default_factory=threading.Lock)


def create_app(
    default_backend: str = "oracle",
    default_series: str = "s2",
    model_path: str | None = None,
    io_spec: str | dict | None = None,
    ttl_seconds: float = DEFAULT_TTL_SECONDS,
    frontend_dir: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="clickcrop service")
    store: dict[str, _Entry] = {}
    store_lock = threading.Lock()

    def _sweep(now: float) -> None:
        expired = [sid for sid, e in store.items() if now - e.last_access > ttl_seconds]
        for sid in expired:
            del store[sid]

    def _entry(sid: str) -> _Entry:
        with store_lock:
            _sweep(time.monotonic())
            entry = store.get(sid)
            if entry is None:
                raise HTTPException(404, detail=f"unknown session {sid}")
            entry.last_access = time.monotonic()
            return entry

    @app.middleware("http")
    async def _log_requests(request: Request, call_next):
        t0 = time.perf_counter()
        response = await call_next(request)
        log.info(
            json.dumps(
                {
                    "method": request.method,
                    "path": request.url.path,
                    "status": response.status_code,
                    "ms": round((time.perf_counter() - t0) * 1000.0, 2),
                }
            )
        )
        return response

    @app.get("/health")
    def health():
        return {"ok": True, "sessions": len(store)}

    @app.post("/sessions", status_code=201)
    async def create_session(
        image: UploadFile = File(...),
        init_mask: Optional[UploadFile] = File(None),
        gt_mask: Optional[UploadFile] = File(None),
        series: str = Query(None),
        backend: str = Query(None),
        seed: int = Query(0),
        noise_blur: int = Query(2),
        noise_blob_rate: float = Query(0.2),
    ):
        series = (series or default_series).lower()
        if series not in SERIES:
            raise HTTPException(400, detail=f"unknown series {series!r}; expected one of {sorted(SERIES)}")
        backend_name = (backend or default_backend).lower()
        if backend_name not in ("oracle", "noisy", "constant", "external"):
            raise HTTPException(404, detail=f"unknown backend {backend_name!r}")
        try:
            img = decode_image_rgb(await image.read())
        except Exception:
            raise HTTPException(400, detail="image is not decodable as PNG/JPEG")
        h, w = img.shape[:2]

        def _read_mask(upload: Optional[UploadFile], name: str):
            if upload is None:
                return None
            try:
                m = decode_mask_png(upload.file.read())
            except Exception:
                raise HTTPException(400, detail=f"{name} is not a decodable PNG")
            if m.shape != (h, w):
                raise HTTPException(
                    400,
                    detail=f"{name} dimensions {m.shape[1]}x{m.shape[0]} do not match image {w}x{h}",
                )
            return m

        init = _read_mask(init_mask, "init_mask")
        gt = _read_mask(gt_mask, "gt_mask")
        if backend_name in ("oracle", "noisy") and gt is None:
            raise HTTPException(400, detail=f"{backend_name} backend requires a gt_mask upload")
        try:
            backend_obj = create_backend(
                backend_name,
                gt=gt,
                rng=np.random.default_rng(seed),
                noise_blur=noise_blur,
                noise_blob_rate=noise_blob_rate,
                model_path=model_path,
                io_spec=io_spec,
            )
        except (RuntimeError, FileNotFoundError, ValueError) as e:
            raise HTTPException(400, detail=str(e))
        session = Session(img, initial_mask=init, series=series, backend=backend_obj)
        sid = uuid.uuid4().hex
        now = time.monotonic()
        with store_lock:
            _sweep(now)
            store[sid] = _Entry(session, gt, series, backend_name, now, now)
        return {"id": sid, "width": w, "height": h}

    @app.get("/sessions/{sid}")
    def session_info(sid: str):
        entry = _entry(sid)
        s = entry.session
        return {
            "id": sid,
            "width": s.width,
            "height": s.height,
            "clicks": len(s.clicks),
            "progressive": s.progressive_active,
            "series": entry.series,
            "backend": entry.backend,
        }

    @app.post("/sessions/{sid}/clicks")
    def add_click(sid: str, body: ClickRequest):
        entry = _entry(sid)
        s = entry.session
        if not (0 <= body.x < s.width and 0 <= body.y < s.height):
            raise HTTPException(
                422, detail=f"click ({body.x}, {body.y}) outside image {s.width}x{s.height}"
            )
        with entry.lock:
            result = s.add_click(body.x, body.y, body.polarity == "positive")
            payload = {
                "mask_url": f"/sessions/{sid}/mask",
                "updated_region": result.updated_region.to_json() if result.updated_region else None,
                "progressive": result.progressive,
                "click_index": result.click.ordinal,
                "timings_ms": result.timings_ms,
            }
            if entry.gt is not None:
                payload["iou"] = iou(s.mask, entry.gt)
        return payload

    @app.get("/sessions/{sid}/mask")
    def get_mask(sid: str):
        entry = _entry(sid)
        with entry.lock:
            data = encode_mask_png(entry.session.mask)
        return Response(content=data, media_type="image/png")

    @app.put("/sessions/{sid}/mask")
    async def put_mask(sid: str, request: Request):
        entry = _entry(sid)
        try:
            mask = decode_mask_png(await request.body())
        except Exception:
            raise HTTPException(400, detail="mask body is not a decodable PNG")
        s = entry.session
        if mask.shape != (s.height, s.width):
            raise HTTPException(
                400,
                detail=f"mask dimensions {mask.shape[1]}x{mask.shape[0]} do not match image {s.width}x{s.height}",
            )
        with entry.lock:
            s.set_mask(mask)
        return {"ok": True, "progressive": s.progressive_active}

    @app.post("/sessions/{sid}/undo")
    def undo(sid: str):
        entry = _entry(sid)
        with entry.lock:
            try:
                entry.session.undo()
            except IndexError:
                raise HTTPException(409, detail="nothing to undo")
        return {"ok": True, "clicks": len(entry.session.clicks)}

    if frontend_dir is not None and Path(frontend_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(frontend_dir), html=True), name="ui")

    return app


def run(host: str = "127.0.0.1", port: int = 8000, **app_kwargs) -> None:
    import uvicorn

    uvicorn.run(create_app(**app_kwargs), host=host, port=port, log_level="info")
