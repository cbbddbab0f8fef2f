"""FastAPI application around one session host plus the experiment harness.

The WebSocket endpoint is the browser bridge: each text frame carries one
protocol line, the same schema as the raw TCP endpoint, and both share the
single operator slot.
"""

from __future__ import annotations

from dataclasses import asdict
from pathlib import Path

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.responses import PlainTextResponse
from fastapi.staticfiles import StaticFiles

from .. import harness
from ..perception import NoiseConfig, ZERO_NOISE
from ..scene import OBJECT_CLASSES
from ..protocol.server import SessionHost
from ..protocol.session import SessionConfig, SessionEngine
from .models import (
    ExperimentRequest,
    ExperimentResponse,
    HealthResponse,
    MessageLines,
    MessageResponses,
    ReportModel,
    ReportRequest,
    SessionResetRequest,
    SessionStateResponse,
    TrialRecordModel,
)


def _noise_from_model(noise, seed: int) -> NoiseConfig:
    if noise is None:
        return ZERO_NOISE
    return NoiseConfig(noise.bbox_jitter_px, noise.miss_rate,
                       noise.confusion_rate, seed)


def _report_model(records: list[harness.TrialRecord]) -> ReportModel:
    rep = harness.report(records)
    return ReportModel(mode=rep.mode,
                       rows=[asdict(r) for r in rep.rows],
                       average=asdict(rep.average),
                       text_table=rep.to_text())


def create_app(host: SessionHost, console_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="deskpick", version="0.1.0")
    app.state.host = host

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        doc = host.engine.state_doc()
        return HealthResponse(status="ok", mode=doc["mode"], clock=doc["clock"],
                              phase=doc["phase"])

    @app.get("/session/state", response_model=SessionStateResponse)
    def session_state() -> SessionStateResponse:
        return SessionStateResponse(**host.engine.state_doc())

    @app.get("/session/transcript", response_class=PlainTextResponse)
    def session_transcript() -> str:
        return host.engine.transcript_text()

    @app.post("/session/messages", response_model=MessageResponses)
    async def session_messages(body: MessageLines) -> MessageResponses:
        responses: list[str] = []
        for line in body.lines:
            responses.extend(await host.handle_line(line))
        return MessageResponses(responses=responses)

    @app.post("/session/reset", response_model=SessionStateResponse)
    async def session_reset(body: SessionResetRequest) -> SessionStateResponse:
        for c in body.classes:
            if c not in OBJECT_CLASSES:
                raise HTTPException(422, f"unknown class {c!r}")
        base = host.engine.cfg
        cfg = SessionConfig(
            mode=body.mode, scene_seed=body.scene_seed,
            classes=tuple(body.classes),
            noise=_noise_from_model(body.noise, body.noise_seed),
            target=body.target, camera=base.camera, arm=base.arm,
            experiment=base.experiment)
        async with host.lock:
            host.engine = SessionEngine(cfg)
        return SessionStateResponse(**host.engine.state_doc())

    @app.post("/experiments", response_model=ExperimentResponse)
    def experiments(body: ExperimentRequest) -> ExperimentResponse:
        classes = body.classes or list(OBJECT_CLASSES)
        for c in classes:
            if c not in OBJECT_CLASSES:
                raise HTTPException(422, f"unknown class {c!r}")
        if body.mode not in ("semiauto", "cartesian"):
            raise HTTPException(422, "mode must be semiauto or cartesian")
        records = harness.run_trials(classes, body.trials_per_class, body.mode,
                                     _noise_from_model(body.noise, 0),
                                     seed=body.seed)
        return ExperimentResponse(
            records=[asdict(r) for r in records],
            report=_report_model(records))

    @app.post("/reports", response_model=ReportModel)
    def reports(body: ReportRequest) -> ReportModel:
        records = [harness.TrialRecord(**m.model_dump()) for m in body.records]
        if not records:
            raise HTTPException(422, "no records")
        return _report_model(records)

    @app.websocket("/session/ws")
    async def session_ws(ws: WebSocket) -> None:
        await ws.accept()
        token = host.try_acquire_operator()
        if token is None:
            await ws.send_text(host.refusal_line())
            await ws.close()
            return
        try:
            while True:
                line = await ws.receive_text()
                if not line.strip():
                    continue
                for out in await host.handle_line(line):
                    await ws.send_text(out)
        except WebSocketDisconnect:
            pass
        finally:
            host.release_operator(token)

    if console_dir is not None and Path(console_dir).is_dir():
        app.mount("/console", StaticFiles(directory=str(console_dir),
                                          html=True), name="console")

    return app
