"""Acceptance gate: one test per release criterion, each printing a
PASS/FAIL line and holding to its stated runtime budget.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines as they complete.
"""

import asyncio
import contextlib
import json
import math
import time
from pathlib import Path

import pytest

from palmgrip.core import FingerType, GripperState, ObjectSpec, ShapeClass, builtin_objects
from palmgrip.fingers import (
    RESIDUAL_GRID_POINTS,
    ResponseCurve,
    aperture,
    bend_angles,
    calibrate,
    fingertip_position,
)
from palmgrip.harness import render_report, run_suite
from palmgrip.palm import RotationCommand, SlipModel, max_noslip_speed, rotate_to, torque_margin
from palmgrip.protocol import RotatePalm, SetFingers, Vacuum, encode_command, parse_command
from palmgrip.rig import Rig
from palmgrip.rng import SplitMix64
from palmgrip.sequencer import PHYSICAL_STAGES, SequencePlan, Sequencer
from palmgrip.service import GripperSession
from palmgrip.world import RULE_STAGES, World, load_rules

GOLDEN = Path(__file__).parent / "golden" / "deterministic_matrix.txt"

MOULDED = FingerType.MOULDED_OVAL
PRINTED = FingerType.PRINTED


@contextlib.contextmanager
def criterion(name: str, budget_s: float):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {name}: FAIL ({time.perf_counter() - start:.2f}s)")
        raise
    elapsed = time.perf_counter() - start
    verdict = "PASS" if elapsed <= budget_s else f"FAIL (over {budget_s}s budget)"
    print(f"ACCEPTANCE {name}: {verdict} ({elapsed:.2f}s)")
    assert elapsed <= budget_s, f"{name} exceeded its {budget_s}s runtime budget"


def test_rotation_claim(rig, objects):
    """Every reference object up to 62 g survives a 180 deg move at
    600 deg/s with the vacuum on; the heaviest keeps a >= 25 % margin."""
    with criterion("rotation-claim", budget_s=1.0):
        slip = rig.slip
        for obj in objects.values():
            assert obj.mass <= 62.0
            cmd = RotationCommand(target_angle=90.0, peak_speed=600.0)
            out = rotate_to(
                cmd, -90.0, rig.cfg, obj_on_palm=obj, slip=slip, vacuum_on=True
            )
            assert not out.slipped, obj.name
            assert out.final_angle - (-90.0) == pytest.approx(180.0)
        ball = objects["tennis_ball"]
        assert max_noslip_speed(ball, slip, True, rig.cfg) >= 600.0
        assert torque_margin(ball, slip, True) >= 0.25


def test_capacity_claim(rig, objects):
    """Anything over 80 g is rejected as over capacity; all five reference
    objects are accepted by both finger sets."""
    with criterion("capacity-claim", budget_s=1.0):
        for mass in (80.1, 95.0, 200.0):
            heavy = ObjectSpec(
                name="too_heavy", mass=mass, shape_class=ShapeClass.SPHERE,
                characteristic_width=60.0, height=60.0,
            )
            for ftype in FingerType:
                report = rig.feasibility(heavy, ftype)
                assert not report.feasible
                assert report.reason.value == "mass_exceeds_capacity"
        for obj in objects.values():
            for ftype in FingerType:
                assert rig.feasibility(obj, ftype).feasible, (obj.name, ftype)


def test_golden_experiment_matrix():
    """Deterministic mode reproduces the committed matrix byte for byte,
    and the matrix says what the study said."""
    with criterion("golden-matrix", budget_s=5.0):
        report = run_suite(mode="det")
        assert render_report(report, "table") == GOLDEN.read_text()

        def histogram(name, ftype):
            return report.pair(name, ftype).stage_failure_histogram()

        for ftype in FingerType:  # ball: clean sweep on both finger sets
            assert report.pair("tennis_ball", ftype).successes == 5
        assert report.pair("styrofoam_egg", PRINTED).successes == 5
        assert report.pair("styrofoam_egg", MOULDED).successes == 0
        assert histogram("styrofoam_egg", MOULDED) == {"REGRASP": 5}
        for ftype in FingerType:  # glove: rotation blocked when draped
            assert report.pair("glove", ftype).successes == 0
            assert histogram("glove", ftype)["ROTATE_PALM"] == 5
        assert report.pair("tape", PRINTED).successes == 5
        assert report.pair("tape", MOULDED).successes == 0
        assert histogram("tape", MOULDED)["DROP_TO_PALM"] == 5
        assert histogram("cylindrical_container", PRINTED) == {"GRASP": 5}
        assert histogram("cylindrical_container", MOULDED) == {"FLIP_UP": 5}


def test_calibration_suite(curve_set):
    """Identity, endpoint exactness, residual soundness, monotonicity."""
    with criterion("calibration-suite", budget_s=1.0):
        # identical curves: zero residual, identical ranges
        same = [ResponseCurve(samples=((0.0, 0.0), (5.0, 180.0)))] * 3
        cal_same = calibrate(same, (0.0, 150.0))
        assert cal_same.alignment_residual == 0.0
        assert len(set(cal_same.ranges)) == 1

        curves = curve_set[MOULDED]
        cal = calibrate(curves, (0.0, 170.0))

        # endpoint exactness to 1e-9 deg
        for b in bend_angles(0.0, cal, curves):
            assert abs(b) < 1e-9
        for b in bend_angles(1.0, cal, curves):
            assert abs(b - 170.0) < 1e-9

        # residual equals an independent brute-force sweep exactly
        def interp(samples, v):
            if v <= samples[0][0]:
                return samples[0][1]
            if v >= samples[-1][0]:
                return samples[-1][1]
            for (v0, b0), (v1, b1) in zip(samples, samples[1:]):
                if v0 <= v <= v1:
                    return b0 + (v - v0) * (b1 - b0) / (v1 - v0)

        worst = 0.0
        for k in range(RESIDUAL_GRID_POINTS):
            u = k / (RESIDUAL_GRID_POINTS - 1)
            bends = [interp(c.samples, lo + u * (hi - lo)) for c, (lo, hi) in zip(curves, cal.ranges)]
            worst = max(worst, max(bends) - min(bends))
        assert cal.alignment_residual == worst

        # monotonicity on the 101-point grid: bends up, aperture down
        rig = Rig.default()
        for ftype in FingerType:
            prev_bends = (-1.0,) * 3
            prev_ap = float("inf")
            for k in range(101):
                u = k / 100
                bends = rig.bends(u, ftype)
                ap = rig.aperture(u, ftype)
                assert all(b >= p - 1e-12 for b, p in zip(bends, prev_bends))
                assert ap <= prev_ap + 1e-12
                prev_bends, prev_ap = bends, ap


def test_kinematics_oracle(cfg):
    """Arc endpoint against independent numerical integration, 1e-6 mm."""
    with criterion("kinematics-oracle", budget_s=1.0):
        phi = math.radians(cfg.splay_angle)
        for ftype in FingerType:
            length = cfg.finger_length[ftype]
            for bend_deg in (30.0, 90.0, 180.0):
                theta = math.radians(bend_deg)
                kappa = theta / length
                n = 4000
                h = length / n
                sx = math.cos(0.0) + math.cos(kappa * length)
                sy = math.sin(0.0) + math.sin(kappa * length)
                for i in range(1, n):
                    w = 4.0 if i % 2 else 2.0
                    sx += w * math.cos(kappa * i * h)
                    sy += w * math.sin(kappa * i * h)
                x_loc, y_loc = sx * h / 3.0, sy * h / 3.0
                expected_r = cfg.finger_mount_radius + x_loc * math.sin(phi) - y_loc * math.cos(phi)
                expected_v = -x_loc * math.cos(phi) - y_loc * math.sin(phi)
                radial, vertical = fingertip_position(bend_deg, cfg, ftype)
                assert abs(radial - expected_r) < 1e-6
                assert abs(vertical - expected_v) < 1e-6


def test_sequencer_model_check(rules, rig, objects):
    """Deterministic trace enumeration over all ten (object, finger) pairs:
    stage order, vacuum discipline, post-DONE cleanliness."""
    with criterion("sequencer-model-check", budget_s=5.0):
        sequencer = Sequencer(World(rules, rig, deterministic=True))
        order = [s.value for s in PHYSICAL_STAGES]
        for obj in objects.values():
            for ftype in FingerType:
                for restart in (True, False):
                    records = []
                    plan = SequencePlan(obj=obj, finger_type=ftype, restart_on_failure=restart)
                    trial = sequencer.run_trial(plan, seed=0, trace=records.append)
                    # stage-order safety
                    assert [r.stage for r in trial.stage_outcomes] == order
                    executed = [r["stage"] for r in records]
                    assert executed == [s for s in order if s in executed]
                    # vacuum discipline during palm rotation
                    for rec in records:
                        if rec["stage"] == "ROTATE_PALM":
                            assert rec["state"]["vacuum_on"]
                            assert rec["state"]["facing"] == "up"
                    # post-DONE cleanliness
                    last = records[-1]
                    if last["stage"] == "PLACE" and last["outcome"] == "ok":
                        state = last["state"]
                        assert state["finger_command"] == 0.0
                        assert not state["vacuum_on"]
                        assert state["held_object"] is None


def test_stochastic_convergence(rules, rig, objects):
    """10^4-repetition suite success rates within +/-3 % of the closed-form
    per-stage product implied by the rule table."""
    with criterion("stochastic-convergence", budget_s=60.0):
        world = World(rules, rig, deterministic=False)
        report = run_suite(rig=rig, mode="stoch", seed=20240612, repetitions=10_000)
        for pair in report.pairs:
            expected = world.trial_success_probability(pair.obj, pair.finger_type)
            assert abs(pair.success_rate - expected) <= 0.03, (
                pair.obj.name,
                pair.finger_type,
                pair.success_rate,
                expected,
            )


def test_protocol_acceptance():
    """Round-trip equality over 10^3 randomized messages, bit-identical
    state after rejection, and a 2-client linearizable flood; runs with no
    UI built."""
    with criterion("protocol", budget_s=30.0):
        from test_protocol import random_command, random_frame
        from palmgrip.protocol import parse_telemetry

        gen = SplitMix64(99)
        for i in range(1000):
            cmd = random_command(gen, i)
            assert parse_command(encode_command(cmd)) == cmd
            frame = random_frame(gen, ts=i)
            assert parse_telemetry(frame.to_json()) == frame

        # rejection leaves the state bit-identical
        session = GripperSession()
        session.handle_command(SetFingers(id=1, u=0.3))
        before = session.state
        reply = session.handle_command(RotatePalm(id=2, target_deg=900.0, speed_dps=600.0))[0]
        assert reply.status == "rejected"
        assert session.state is before

        # 2-client flood over real sockets, applied in arrival order
        from test_service import running_server, recv_until

        async def flood():
            async with running_server() as (_server, client):
                operator = await client()
                observer = await client()
                await recv_until(operator, lambda m: m["type"] == "hello")
                await recv_until(observer, lambda m: m["type"] == "hello")
                ops = [
                    Vacuum(id=i, on=bool(i & 1)) if i % 3 == 2 else SetFingers(id=i, u=(i % 11) / 10.0)
                    for i in range(100)
                ]

                async def send_all():
                    for cmd in ops:
                        await operator.send(encode_command(cmd))

                async def observer_noise():
                    for i in range(30):
                        await observer.send(encode_command(Vacuum(id=5000 + i, on=True)))

                await asyncio.gather(send_all(), observer_noise())
                completed = []
                while len(completed) < len(ops):
                    message = json.loads(await asyncio.wait_for(operator.recv(), 10))
                    if message["type"] == "reply" and message["status"] == "completed":
                        completed.append(message["id"])
                assert completed == [c.id for c in ops]

                model = GripperSession()
                for cmd in ops:
                    model.handle_command(cmd)
                final = await recv_until(operator, lambda m: m["type"] == "telemetry")
                assert final["state"]["finger_command"] == model.state.finger_command
                assert final["state"]["vacuum_on"] == model.state.vacuum_on
                await operator.close()
                await observer.close()

        asyncio.run(flood())
