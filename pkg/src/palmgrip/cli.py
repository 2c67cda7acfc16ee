"""Command-line entry points: experiment runner, teleop service, golden
matrix regeneration and slip-model derivation."""

from __future__ import annotations

import asyncio
import json
import sys
from pathlib import Path

import click

from .core import FingerType, ObjectSpec, builtin_objects, load_config
from .harness import DEFAULT_REPETITIONS, render_report, run_suite
from .rig import Rig
from .service import ServiceConfig, serve

GOLDEN_PATH = Path(__file__).resolve().parents[2] / "tests" / "golden" / "deterministic_matrix.txt"

_FINGER_CHOICES = {
    "moulded": (FingerType.MOULDED_OVAL,),
    "printed": (FingerType.PRINTED,),
    "both": (FingerType.MOULDED_OVAL, FingerType.PRINTED),
}


def _load_objects_file(path: Path) -> list[ObjectSpec]:
    """A single object document, a bare list, or {"objects": [...]}."""
    data = json.loads(path.read_text())
    if isinstance(data, dict) and "objects" in data:
        data = data["objects"]
    if isinstance(data, list):
        return [ObjectSpec.from_dict(entry) for entry in data]
    return [ObjectSpec.from_dict(data)]


@click.group()
def main():
    """Gripper simulator: experiments, teleoperation, and calibration tools."""


@main.command()
@click.option("--fingers", type=click.Choice(["moulded", "printed", "both"]), default="both",
              show_default=True, help="Which finger set(s) to run.")
@click.option("--objects", default="builtin", show_default=True,
              help="'builtin' or a path to a JSON object file.")
@click.option("--reps", type=int, default=DEFAULT_REPETITIONS, show_default=True,
              help="Trials per (object, finger) pair.")
@click.option("--mode", type=click.Choice(["det", "stoch"]), default="det", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["table", "json", "csv"]), default="table",
              show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Write the report here instead of stdout.")
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path), default=None,
              help="Gripper config JSON overriding the defaults.")
@click.option("--trace", "trace_path", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Append per-step trace records (newline-delimited JSON).")
def run(fingers, objects, reps, mode, seed, fmt, out, config_path, trace_path):
    """Run the manipulation suite and emit the success/failure matrix.

    Exits 0 whenever the run completes, regardless of trial failures;
    nonzero only on tool errors (bad config, unreadable files).
    """
    try:
        rig = Rig.default(load_config(config_path)) if config_path else Rig.default()
        objs = None if objects == "builtin" else _load_objects_file(Path(objects))
        sink = None
        trace_fh = None
        if trace_path:
            trace_fh = open(trace_path, "a")
            sink = lambda rec: trace_fh.write(json.dumps(rec, sort_keys=True) + "\n")
        try:
            report = run_suite(
                rig=rig,
                mode=mode,
                seed=seed,
                repetitions=reps,
                objects=objs,
                fingers=_FINGER_CHOICES[fingers],
                trace=sink,
            )
        finally:
            if trace_fh:
                trace_fh.close()
        text = render_report(report, fmt)
    except Exception as exc:
        raise click.ClickException(str(exc))
    if out:
        out.write_text(text)
        click.echo(f"wrote {out}")
    else:
        click.echo(text, nl=False)


@main.command("regen-golden")
@click.option("--path", type=click.Path(dir_okay=False, path_type=Path), default=GOLDEN_PATH,
              show_default=True)
def regen_golden(path):
    """Regenerate the committed deterministic matrix (review diffs!)."""
    report = run_suite(mode="det")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_report(report, "table"))
    click.echo(f"wrote {path}")


@main.command("serve")
@click.option("--bind", default="127.0.0.1:8765", show_default=True,
              help="host:port (env PALMGRIP_BIND overrides).")
@click.option("--rate-hz", type=float, default=30.0, show_default=True,
              help="Telemetry rate (env PALMGRIP_RATE_HZ overrides).")
@click.option("--time-scale", type=float, default=1.0, show_default=True,
              help="Simulated seconds per wall second.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--trace", "trace_path", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Session trace log (newline-delimited JSON).")
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path), default=None)
def serve_cmd(bind, rate_hz, time_scale, seed, trace_path, config_path):
    """Serve the teleoperation WebSocket endpoint (ws://HOST:PORT/ws)."""
    host, _, port = bind.rpartition(":")
    cfg = ServiceConfig(
        host=host or "127.0.0.1",
        port=int(port),
        rate_hz=rate_hz,
        time_scale=time_scale,
        seed=seed,
        trace_path=trace_path,
    )
    rig = Rig.default(load_config(config_path)) if config_path else None
    try:
        asyncio.run(serve(cfg, rig=rig))
    except KeyboardInterrupt:
        click.echo("stopped")


@main.command("objects")
def objects_cmd():
    """List the built-in test objects."""
    for obj in builtin_objects():
        click.echo(
            f"{obj.name:24s} {obj.mass:>5.0f} g  {obj.shape_class.value:9s} "
            f"{obj.characteristic_width:.0f} x {obj.height:.0f} mm"
        )


@main.command("derive-slip")
def derive_slip():
    """Show how the default slip model covers the headline rotation claim."""
    from .palm import (
        DEFAULT_ACCEL,
        SlipModel,
        available_torque,
        max_noslip_speed,
        required_torque,
        torque_margin,
    )

    rig = Rig.default()
    slip = rig.slip
    ball = next(o for o in builtin_objects() if o.name == "tennis_ball")
    click.echo(f"slip model: hold_torque={slip.hold_torque:.2f} N*mm, "
               f"friction_coeff={slip.friction_coeff}, cup_radius={slip.cup_effective_radius} mm")
    click.echo(f"heaviest rotated object: {ball.name} ({ball.mass:.0f} g, {ball.characteristic_width:.0f} mm)")
    tau_req = required_torque(ball, DEFAULT_ACCEL)
    tau_on = available_torque(ball, slip, vacuum_on=True)
    tau_off = available_torque(ball, slip, vacuum_on=False)
    click.echo(f"required torque at {DEFAULT_ACCEL:.0f} deg/s^2 ramps: {tau_req:.3f} N*mm")
    click.echo(f"available torque: vacuum on {tau_on:.3f} N*mm, off {tau_off:.3f} N*mm")
    click.echo(f"margin with vacuum: {torque_margin(ball, slip, True) * 100.0:.0f} %  (>= 25 % required)")
    click.echo(f"max no-slip speed (vacuum on): {max_noslip_speed(ball, slip, True, rig.cfg):.0f} deg/s")


if __name__ == "__main__":
    main()
