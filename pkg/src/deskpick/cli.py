"""Command-line entry points: serve the session service, run experiment
suites, render reports, and replay recorded command logs."""

from __future__ import annotations

import asyncio
import json
import sys
from pathlib import Path

import click

from . import harness
from .config import (
    load_arm_config,
    load_camera_config,
    load_experiment_config,
    load_noise_config,
)
from .perception import ZERO_NOISE
from .protocol.server import OperatorClient, SessionHost, TcpSessionServer
from .protocol.session import SessionConfig, SessionEngine, replay_command_lines
from .scene import OBJECT_CLASSES


def _session_config(mode, scene_seed, classes, noise_config, noise_seed,
                    camera_config, arm_config, experiment_config,
                    target) -> SessionConfig:
    noise = ZERO_NOISE if noise_config is None else \
        load_noise_config(noise_config, seed=noise_seed)
    return SessionConfig(
        mode=mode, scene_seed=scene_seed, classes=tuple(classes),
        noise=noise, target=target,
        camera=load_camera_config(camera_config),
        arm=load_arm_config(arm_config),
        experiment=load_experiment_config(experiment_config))


@click.group()
def main() -> None:
    """Desk-scale assistive pick-and-place simulator."""


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=7410, show_default=True,
              help="TCP port for the newline protocol.")
@click.option("--http-port", default=8000, show_default=True,
              help="HTTP/WebSocket port for the service API and console.")
@click.option("--mode", type=click.Choice(["semiauto", "cartesian"]),
              default="semiauto", show_default=True)
@click.option("--scene-seed", default=7, show_default=True)
@click.option("--classes", multiple=True, default=("ball",), show_default=True,
              type=click.Choice(OBJECT_CLASSES))
@click.option("--noise-config", type=click.Path(exists=True), default=None,
              help="Noise YAML; omit for the exact perception oracle.")
@click.option("--noise-seed", default=0, show_default=True)
@click.option("--camera-config", type=click.Path(exists=True), default=None)
@click.option("--arm-config", type=click.Path(exists=True), default=None)
@click.option("--experiment-config", type=click.Path(exists=True), default=None)
@click.option("--target", type=float, nargs=2, default=None,
              help="Placement target (x y, meters) judged in trial results.")
@click.option("--transcript-out", type=click.Path(), default=None,
              help="Write the session transcript here on shutdown.")
@click.option("--console-dir", type=click.Path(), default=None,
              help="Static directory served at /console (browser operator).")
def serve(host, port, http_port, mode, scene_seed, classes, noise_config,
          noise_seed, camera_config, arm_config, experiment_config, target,
          transcript_out, console_dir) -> None:
    """Run the session service: TCP protocol plus HTTP/WebSocket bridge."""
    import uvicorn

    from .service import create_app

    cfg = _session_config(mode, scene_seed, classes, noise_config, noise_seed,
                          camera_config, arm_config, experiment_config,
                          tuple(target) if target else None)
    session_host = SessionHost(SessionEngine(cfg))
    app = create_app(session_host, console_dir)
    tcp = TcpSessionServer(session_host, host, port)

    async def run() -> None:
        await tcp.start()
        click.echo(f"protocol: tcp://{host}:{tcp.bound_port}")
        click.echo(f"service:  http://{host}:{http_port} "
                   f"(console at /console, socket bridge at /session/ws)")
        server = uvicorn.Server(uvicorn.Config(app, host=host, port=http_port,
                                               log_level="warning"))
        try:
            await server.serve()
        finally:
            await tcp.stop()
            if transcript_out:
                session_host.write_transcript(transcript_out)
                click.echo(f"transcript written to {transcript_out}")

    asyncio.run(run())


@main.command("run-trials")
@click.option("--mode", type=click.Choice(["semiauto", "cartesian"]),
              default="semiauto", show_default=True)
@click.option("--classes", multiple=True, type=click.Choice(OBJECT_CLASSES),
              help="Defaults to the full ten-class set.")
@click.option("--trials", default=5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--noise-config", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), default=None,
              help="Write machine-readable records (JSON) here.")
@click.option("--server", default=None,
              help="Base URL of a running service; runs remotely when set.")
def run_trials(mode, classes, trials, seed, noise_config, out, server) -> None:
    """Run the seeded trial protocol and print the metric table."""
    classes = list(classes) if classes else list(OBJECT_CLASSES)
    if server:
        import httpx

        noise = None
        if noise_config:
            n = load_noise_config(noise_config)
            noise = {"bbox_jitter_px": n.bbox_jitter_px,
                     "miss_rate": n.miss_rate,
                     "confusion_rate": n.confusion_rate}
        resp = httpx.post(f"{server.rstrip('/')}/experiments",
                          json={"mode": mode, "classes": classes,
                                "trials_per_class": trials, "seed": seed,
                                "noise": noise}, timeout=600.0)
        resp.raise_for_status()
        body = resp.json()
        if out:
            Path(out).write_text(json.dumps(body["records"], indent=2) + "\n")
        click.echo(body["report"]["text_table"])
        return

    noise = ZERO_NOISE if noise_config is None else load_noise_config(noise_config)
    records = harness.run_trials(classes, trials, mode, noise, seed)
    if out:
        Path(out).write_text(harness.records_to_json(records))
    click.echo(harness.report(records).to_text())


@main.command()
@click.argument("records_file", type=click.Path(exists=True))
@click.option("--json", "as_json", is_flag=True, help="Emit the report as JSON.")
def report(records_file, as_json) -> None:
    """Render the metric table for stored trial records."""
    records = harness.records_from_json(Path(records_file).read_text())
    rep = harness.report(records)
    if as_json:
        click.echo(json.dumps(rep.to_doc(), indent=2))
    else:
        click.echo(rep.to_text())


@main.command()
@click.option("--log", "log_file", type=click.Path(exists=True), required=True,
              help="Command log: one protocol line per line (or a transcript; "
                   "'C '-prefixed lines are replayed).")
@click.option("--mode", type=click.Choice(["semiauto", "cartesian"]),
              default="semiauto", show_default=True)
@click.option("--scene-seed", default=7, show_default=True)
@click.option("--classes", multiple=True, default=("ball",),
              type=click.Choice(OBJECT_CLASSES), show_default=True)
@click.option("--noise-config", type=click.Path(exists=True), default=None)
@click.option("--noise-seed", default=0, show_default=True)
@click.option("--target", type=float, nargs=2, default=None)
@click.option("--out", type=click.Path(), default=None,
              help="Write the replay transcript here (in-process mode).")
@click.option("--tcp", default=None, metavar="HOST:PORT",
              help="Replay over the wire against a running server instead.")
def replay(log_file, mode, scene_seed, classes, noise_config, noise_seed,
           target, out, tcp) -> None:
    """Replay a recorded command log in-process or over TCP."""
    raw = Path(log_file).read_text().splitlines()
    lines = [l[2:] for l in raw if l.startswith("C ")] or \
        [l for l in raw if l.strip()]

    if tcp:
        host, port = tcp.rsplit(":", 1)

        async def run() -> None:
            client = OperatorClient(host, int(port))
            await client.connect()
            await client.replay(lines)
            await client.close()
            for line in client.received:
                click.echo(line)

        asyncio.run(run())
        return

    cfg = _session_config(mode, scene_seed, classes, noise_config, noise_seed,
                          None, None, None, tuple(target) if target else None)
    transcript = replay_command_lines(cfg, lines)
    if out:
        Path(out).write_text(transcript)
        click.echo(f"transcript written to {out}")
    else:
        click.echo(transcript, nl=False)


if __name__ == "__main__":
    main()
