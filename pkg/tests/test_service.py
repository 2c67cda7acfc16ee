"""Teleop service: session semantics, roles, linearizability over the wire."""

import asyncio
import contextlib
import json

import pytest

from palmgrip.core import FingerType, GripperState, builtin_objects
from palmgrip.protocol import (
    Cancel,
    Flip,
    LoadObject,
    Pause,
    Resume,
    RotatePalm,
    RunSequence,
    SetFingers,
    Vacuum,
    encode_command,
)
from palmgrip.sequencer import SequencePlan
from palmgrip.service import GripperSession, ServiceConfig, TeleopServer

BALL = next(o for o in builtin_objects() if o.name == "tennis_ball")
GLOVE = next(o for o in builtin_objects() if o.name == "glove")


def drain(session, seconds=30.0, dt=0.05):
    replies = []
    t = 0.0
    while t < seconds:
        replies.extend(session.advance(dt))
        t += dt
        if session.activity is None:
            break
    return replies


class TestSessionCommands:
    def test_vacuum_completes_immediately(self):
        session = GripperSession()
        replies = session.handle_command(Vacuum(id=1, on=True))
        assert [r.status for r in replies] == ["accepted", "completed"]
        assert session.state.vacuum_on

    def test_set_fingers_updates_bends_through_lag(self):
        session = GripperSession()
        session.handle_command(SetFingers(id=1, u=0.5))
        assert session.state.finger_command == 0.5
        session.advance(0.04)  # half a lag constant: bends under way
        partial = session.state.finger_bends
        assert all(b > 0 for b in partial)
        session.advance(2.0)  # several constants: settled on the target
        settled = session.state.finger_bends
        assert settled == session.rig.bends(0.5, session.finger_type)
        assert all(s > p for s, p in zip(settled, partial))

    def test_rejected_command_leaves_state_bit_identical(self):
        session = GripperSession()
        session.handle_command(SetFingers(id=1, u=0.3))
        before = session.state
        replies = session.handle_command(RotatePalm(id=2, target_deg=999.0, speed_dps=600.0))
        assert replies[0].status == "rejected"
        assert session.state == before
        assert session.state is before  # not even rebuilt

    def test_rotation_completes_with_result(self):
        session = GripperSession()
        replies = session.handle_command(RotatePalm(id=5, target_deg=90.0, speed_dps=600.0))
        assert replies[0].status == "accepted"
        done = drain(session)
        assert len(done) == 1 and done[0].id == 5 and done[0].status == "completed"
        assert done[0].result["slipped"] is False
        assert session.state.palm_angle == 90.0

    def test_loaded_ball_rotates_without_slip(self):
        session = GripperSession()
        session.handle_command(Flip(id=1, direction="up"))
        drain(session)
        assert session.state.facing.value == "up"
        replies = session.handle_command(LoadObject(id=2, object=BALL))
        assert replies[-1].status == "completed"
        session.handle_command(Vacuum(id=3, on=True))
        session.handle_command(RotatePalm(id=4, target_deg=90.0, speed_dps=600.0))
        done = drain(session)
        assert done[0].result == {
            "final_angle": 90.0,
            "duration": done[0].result["duration"],
            "slipped": False,
            "slip_angle_error": 0.0,
        }
        assert session.state.held_object.object_yaw == 90.0

    def test_load_object_requires_facing_up(self):
        session = GripperSession()
        replies = session.handle_command(LoadObject(id=1, object=BALL))
        assert replies[0].status == "rejected"
        assert "not_facing_up" in replies[0].reason

    def test_busy_while_long_command_runs(self):
        session = GripperSession()
        session.handle_command(RotatePalm(id=1, target_deg=120.0, speed_dps=100.0))
        replies = session.handle_command(Vacuum(id=2, on=True))
        assert replies[0].status == "rejected" and replies[0].reason == "busy"

    def test_cancel_aborts_in_flight(self):
        session = GripperSession()
        session.handle_command(RotatePalm(id=1, target_deg=120.0, speed_dps=100.0))
        replies = session.handle_command(Cancel(id=2))
        statuses = [(r.id, r.status) for r in replies]
        assert (1, "completed") in statuses and (2, "completed") in statuses
        assert session.activity is None

    def test_cancel_on_idle_rejected(self):
        session = GripperSession()
        replies = session.handle_command(Cancel(id=1))
        assert replies[0].status == "rejected"
        assert replies[0].reason == "nothing_in_flight"

    def test_sequence_runs_to_done(self):
        session = GripperSession()
        plan = SequencePlan(obj=BALL, finger_type=FingerType.PRINTED)
        session.handle_command(RunSequence(id=9, plan=plan))
        done = drain(session)
        assert done and done[0].id == 9
        assert done[0].result["overall_success"] is True
        assert session.stage.value == "DONE"

    def test_sequence_pause_resume(self):
        session = GripperSession()
        plan = SequencePlan(obj=BALL, finger_type=FingerType.PRINTED)
        session.handle_command(RunSequence(id=1, plan=plan))
        session.advance(0.2)
        session.handle_command(Pause(id=2))
        stage_before = session.stage
        assert session.advance(5.0) == []  # frozen while paused
        assert session.stage == stage_before
        session.handle_command(Resume(id=3))
        done = drain(session)
        assert done and done[0].status == "completed"

    def test_glove_sequence_reports_failure_event_with_quote(self):
        session = GripperSession()
        plan = SequencePlan(obj=GLOVE, finger_type=FingerType.PRINTED)
        session.handle_command(RunSequence(id=1, plan=plan))
        quotes = []
        t = 0.0
        while session.activity is not None and t < 60.0:
            session.advance(0.05)
            t += 0.05
            event = session.last_event
            if event and event.failure == "blocked_rotation":
                quotes.append(event.paper_quote)
        assert quotes and all(q for q in quotes)

    def test_frame_reports_stage_and_state(self):
        session = GripperSession()
        frame = session.frame(timestamp_ms=12)
        assert frame.timestamp_ms == 12
        assert frame.stage == "IDLE"
        assert frame.state == GripperState()


# -- wire-level tests ---------------------------------------------------------


@contextlib.asynccontextmanager
async def running_server(**config_overrides):
    from websockets.asyncio.client import connect

    config = ServiceConfig(port=0, rate_hz=60.0, time_scale=20.0, **config_overrides)
    session = GripperSession()
    server = TeleopServer(session, config)
    task = asyncio.create_task(server.serve_forever())
    while not hasattr(server, "bound_port"):
        await asyncio.sleep(0.01)
        if task.done():
            task.result()

    async def client():
        return await connect(f"ws://127.0.0.1:{server.bound_port}/ws", open_timeout=5)

    try:
        yield server, client
    finally:
        task.cancel()
        with contextlib.suppress(asyncio.CancelledError):
            await task


async def recv_until(ws, predicate, timeout=20.0):
    loop = asyncio.get_running_loop()
    deadline = loop.time() + timeout
    while True:
        remaining = deadline - loop.time()
        if remaining <= 0:
            raise TimeoutError("expected message not received")
        message = json.loads(await asyncio.wait_for(ws.recv(), remaining))
        if predicate(message):
            return message


def test_healthz_endpoint():
    async def scenario():
        async with running_server() as (server, _client):
            reader, writer = await asyncio.open_connection("127.0.0.1", server.bound_port)
            writer.write(b"GET /healthz HTTP/1.1\r\nHost: t\r\nConnection: close\r\n\r\n")
            await writer.drain()
            data = await asyncio.wait_for(reader.read(500), 5)
            writer.close()
            assert b"200" in data.splitlines()[0]
            assert b"ok" in data

    asyncio.run(scenario())


def test_first_client_is_operator_second_observer():
    async def scenario():
        async with running_server() as (_server, client):
            first = await client()
            second = await client()
            hello1 = await recv_until(first, lambda m: m["type"] == "hello")
            hello2 = await recv_until(second, lambda m: m["type"] == "hello")
            assert hello1["role"] == "operator"
            assert hello2["role"] == "observer"
            # observer commands are rejected with a role error
            await second.send(encode_command(Vacuum(id=1, on=True)))
            reply = await recv_until(second, lambda m: m["type"] == "reply")
            assert reply["status"] == "rejected"
            assert reply["reason"] == "observer_role"
            await first.close()
            await second.close()

    asyncio.run(scenario())


def test_out_of_range_rotate_rejected_with_id_and_no_state_change():
    async def scenario():
        async with running_server() as (_server, client):
            ws = await client()
            await recv_until(ws, lambda m: m["type"] == "hello")
            before = await recv_until(ws, lambda m: m["type"] == "telemetry")
            await ws.send(encode_command(RotatePalm(id=42, target_deg=181.0, speed_dps=600.0)))
            reply = await recv_until(ws, lambda m: m["type"] == "reply")
            assert reply["id"] == 42 and reply["status"] == "rejected"
            after = await recv_until(ws, lambda m: m["type"] == "telemetry")
            assert after["state"] == before["state"]
            await ws.close()

    asyncio.run(scenario())


def test_sequence_over_the_wire_reaches_done():
    async def scenario():
        async with running_server() as (_server, client):
            ws = await client()
            await recv_until(ws, lambda m: m["type"] == "hello")
            plan = SequencePlan(obj=BALL, finger_type=FingerType.PRINTED)
            await ws.send(encode_command(RunSequence(id=7, plan=plan)))
            seen = []

            def watch(message):
                if message["type"] == "telemetry" and (not seen or seen[-1] != message["stage"]):
                    seen.append(message["stage"])
                return (
                    message["type"] == "reply"
                    and message["id"] == 7
                    and message["status"] == "completed"
                )

            reply = await recv_until(ws, watch, timeout=40.0)
            assert reply["result"]["overall_success"] is True
            done = await recv_until(ws, lambda m: m["type"] == "telemetry" and m["stage"] == "DONE")
            assert done["stage"] == "DONE"
            # the stage field never moves backward during a sequence
            pipeline = ["IDLE", "APPROACH", "GRASP", "LIFT", "FLIP_UP", "DROP_TO_PALM",
                        "ROTATE_PALM", "REGRASP", "FLIP_DOWN", "PLACE", "DONE"]
            indices = [pipeline.index(stage) for stage in seen]
            assert indices == sorted(indices)
            assert {"GRASP", "FLIP_UP", "DROP_TO_PALM", "ROTATE_PALM", "REGRASP"} <= set(seen)
            await ws.close()

    asyncio.run(scenario())


def test_telemetry_timestamps_strictly_increase():
    async def scenario():
        async with running_server() as (_server, client):
            ws = await client()
            await recv_until(ws, lambda m: m["type"] == "hello")
            stamps = []
            while len(stamps) < 30:
                message = json.loads(await asyncio.wait_for(ws.recv(), 5))
                if message["type"] == "telemetry":
                    stamps.append(message["timestamp_ms"])
            assert all(b > a for a, b in zip(stamps, stamps[1:]))
            await ws.close()

    asyncio.run(scenario())


def test_two_client_flood_is_linearizable():
    """Operator and observer flood concurrently; accepted commands apply in
    arrival order and the final state equals sequential application."""

    async def scenario():
        async with running_server() as (server, client):
            operator = await client()
            observer = await client()
            await recv_until(operator, lambda m: m["type"] == "hello")
            await recv_until(observer, lambda m: m["type"] == "hello")

            ops = []
            for i in range(100):
                if i % 3 == 2:
                    ops.append(Vacuum(id=i, on=bool(i & 1)))
                else:
                    ops.append(SetFingers(id=i, u=(i % 11) / 10.0))

            async def flood_operator():
                for cmd in ops:
                    await operator.send(encode_command(cmd))

            async def flood_observer():
                for i in range(50):
                    await observer.send(encode_command(Vacuum(id=1000 + i, on=True)))

            await asyncio.gather(flood_operator(), flood_observer())

            completed_ids = []
            rejected_observer = 0

            async def collect(ws, expect_completed):
                nonlocal rejected_observer
                seen = 0
                while seen < expect_completed:
                    message = json.loads(await asyncio.wait_for(ws.recv(), 10))
                    if message["type"] != "reply":
                        continue
                    if message["status"] == "completed":
                        completed_ids.append(message["id"])
                        seen += 1
                    elif message["status"] == "rejected":
                        if message["id"] >= 1000:
                            rejected_observer += 1
                            seen += 1

            await asyncio.gather(collect(operator, len(ops)), collect(observer, 50))
            assert completed_ids == [cmd.id for cmd in ops]  # arrival order
            assert rejected_observer == 50

            # final state equals sequential application of the accepted ops
            expected = GripperState()
            session = GripperSession()
            for cmd in ops:
                session.handle_command(cmd)
            final = await recv_until(operator, lambda m: m["type"] == "telemetry")
            assert final["state"]["finger_command"] == session.state.finger_command
            assert final["state"]["vacuum_on"] == session.state.vacuum_on
            await operator.close()
            await observer.close()

    asyncio.run(scenario())


def test_backpressure_rejects_with_busy():
    async def scenario():
        # tiny queue and slow tick rate so the flood overwhelms the loop
        async with running_server(queue_size=2) as (server, client):
            server.config.rate_hz = 1.0
            ws = await client()
            await recv_until(ws, lambda m: m["type"] == "hello")
            for i in range(40):
                await ws.send(encode_command(SetFingers(id=i, u=0.5)))
            saw_busy = False
            for _ in range(80):
                message = json.loads(await asyncio.wait_for(ws.recv(), 10))
                if message["type"] == "reply" and message.get("reason") == "busy":
                    saw_busy = True
                    break
            assert saw_busy
            await ws.close()

    asyncio.run(scenario())


def test_trace_file_records_session(tmp_path):
    async def scenario():
        trace_path = tmp_path / "session.ndjson"
        async with running_server(trace_path=trace_path) as (_server, client):
            ws = await client()
            await recv_until(ws, lambda m: m["type"] == "hello")
            await ws.send(encode_command(Vacuum(id=1, on=True)))
            await recv_until(ws, lambda m: m["type"] == "reply" and m["status"] == "completed")
            await ws.close()
            await asyncio.sleep(0.05)
        lines = [json.loads(line) for line in trace_path.read_text().splitlines()]
        assert any(rec.get("dir") == "recv" for rec in lines)
        assert any(rec.get("dir") == "send" for rec in lines)

    asyncio.run(scenario())


def test_env_overrides(monkeypatch):
    monkeypatch.setenv("PALMGRIP_BIND", "0.0.0.0:9100")
    monkeypatch.setenv("PALMGRIP_RATE_HZ", "60")
    cfg = ServiceConfig.from_env()
    assert cfg.host == "0.0.0.0"
    assert cfg.port == 9100
    assert cfg.rate_hz == 60.0


def test_rate_bounds_validated():
    with pytest.raises(ValueError):
        ServiceConfig(rate_hz=500.0).validate()
    with pytest.raises(ValueError):
        ServiceConfig(rate_hz=0.5).validate()
