"""Wire protocol: round trips over randomized messages, strictness rules."""

import json

import pytest

from palmgrip.core import (
    FingerType,
    GripperConfig,
    GripperState,
    HeldObject,
    HoldMode,
    ObjectSpec,
    ShapeClass,
)
from palmgrip.protocol import (
    Cancel,
    Flip,
    LoadObject,
    Pause,
    ProtocolError,
    Reply,
    Reset,
    Resume,
    RotatePalm,
    RunSequence,
    SetFingers,
    StageEvent,
    TelemetryFrame,
    Vacuum,
    encode_command,
    parse_command,
    parse_reply,
    parse_telemetry,
    validate_command,
)
from palmgrip.rng import SplitMix64
from palmgrip.sequencer import SequencePlan

SHAPES = [s for s in ShapeClass if s is not ShapeClass.CLOTH]


def random_object(gen: SplitMix64) -> ObjectSpec:
    return ObjectSpec(
        name=f"obj{gen.next_u64() % 1000}",
        mass=gen.uniform_range(1.0, 79.0),
        shape_class=SHAPES[gen.next_u64() % len(SHAPES)],
        characteristic_width=gen.uniform_range(10.0, 120.0),
        height=gen.uniform_range(10.0, 120.0),
        cloth_like=False,
        com_height_frac=gen.uniform(),
    )


def random_command(gen: SplitMix64, cmd_id: int):
    kind = gen.next_u64() % 10
    if kind == 0:
        return SetFingers(id=cmd_id, u=gen.uniform())
    if kind == 1:
        return RotatePalm(
            id=cmd_id,
            target_deg=gen.uniform_range(-150.0, 150.0),
            speed_dps=gen.uniform_range(1.0, 700.0),
        )
    if kind == 2:
        return Vacuum(id=cmd_id, on=bool(gen.next_u64() & 1))
    if kind == 3:
        return Flip(id=cmd_id, direction="up" if gen.next_u64() & 1 else "down")
    if kind == 4:
        return LoadObject(id=cmd_id, object=random_object(gen))
    if kind == 5:
        plan = SequencePlan(
            obj=random_object(gen),
            finger_type=FingerType.PRINTED if gen.next_u64() & 1 else FingerType.MOULDED_OVAL,
            target_yaw=gen.uniform_range(-150.0, 150.0),
            rotation_speed=gen.uniform_range(1.0, 700.0),
            restart_on_failure=bool(gen.next_u64() & 1),
        )
        return RunSequence(id=cmd_id, plan=plan)
    return [Pause, Resume, Cancel, Reset][kind % 4](id=cmd_id)


def random_frame(gen: SplitMix64, ts: int) -> TelemetryFrame:
    held = None
    if gen.next_u64() & 1:
        held = HeldObject(
            obj=random_object(gen),
            hold_mode=HoldMode.IN_FINGERS,
            object_yaw=gen.uniform_range(-150.0, 150.0),
        )
    state = GripperState(
        palm_angle=gen.uniform_range(-150.0, 150.0),
        palm_velocity=gen.uniform_range(-700.0, 700.0),
        finger_command=gen.uniform(),
        finger_bends=(gen.uniform_range(0, 180), gen.uniform_range(0, 180), gen.uniform_range(0, 180)),
        vacuum_on=bool(gen.next_u64() & 1),
        flip_angle=gen.uniform_range(0.0, 180.0),
        held_object=held,
    )
    event = None
    if gen.next_u64() & 1:
        event = StageEvent(
            stage="GRASP", outcome="failed", failure="twisted_out",
            paper_quote="sometimes twisted out of their grasp",
        )
    return TelemetryFrame(timestamp_ms=ts, state=state, stage="GRASP", last_event=event)


class TestCommandRoundTrip:
    def test_thousand_randomized_commands(self):
        gen = SplitMix64(20240801)
        for i in range(1000):
            cmd = random_command(gen, i)
            assert parse_command(encode_command(cmd)) == cmd

    def test_encoding_is_stable(self):
        cmd = SetFingers(id=7, u=0.25)
        assert encode_command(cmd) == '{"id": 7, "type": "set_fingers", "u": 0.25}'


class TestTelemetryRoundTrip:
    def test_thousand_randomized_frames(self):
        gen = SplitMix64(555)
        for i in range(1000):
            frame = random_frame(gen, ts=i)
            assert parse_telemetry(frame.to_json()) == frame

    def test_unknown_fields_ignored_on_telemetry(self):
        gen = SplitMix64(1)
        frame = random_frame(gen, ts=5)
        data = json.loads(frame.to_json())
        data["debug_field"] = "whatever"
        data["state"]["another"] = 1
        assert parse_telemetry(json.dumps(data)) == frame


class TestCommandStrictness:
    def test_unknown_field_rejected(self):
        with pytest.raises(ProtocolError, match="unknown_field"):
            parse_command('{"type": "vacuum", "id": 1, "on": true, "extra": 2}')

    def test_unknown_command_rejected(self):
        with pytest.raises(ProtocolError, match="unknown_command"):
            parse_command('{"type": "self_destruct", "id": 1}')

    def test_missing_id_rejected(self):
        with pytest.raises(ProtocolError, match="missing_id"):
            parse_command('{"type": "pause"}')

    def test_missing_field_rejected(self):
        with pytest.raises(ProtocolError, match="missing_field"):
            parse_command('{"type": "set_fingers", "id": 3}')

    def test_malformed_json_rejected(self):
        with pytest.raises(ProtocolError, match="malformed_json"):
            parse_command("{nope")

    def test_bad_payload_type_rejected(self):
        with pytest.raises(ProtocolError, match="invalid_field"):
            parse_command('{"type": "vacuum", "id": 1, "on": "yes"}')

    def test_invalid_object_rejected(self):
        obj = {"name": "x", "mass": -1.0, "shape_class": "sphere",
               "characteristic_width": 10.0, "height": 10.0,
               "cloth_like": False, "com_height_frac": 0.5}
        text = json.dumps({"type": "load_object", "id": 1, "object": obj})
        with pytest.raises(ProtocolError, match="invalid_field"):
            parse_command(text)


class TestValidateCommand:
    def test_rotate_out_of_range(self):
        cfg = GripperConfig()
        errors = validate_command(RotatePalm(id=1, target_deg=181.0, speed_dps=600.0), cfg)
        assert errors and "target_deg" in errors[0]

    def test_too_fast(self):
        cfg = GripperConfig()
        errors = validate_command(RotatePalm(id=1, target_deg=90.0, speed_dps=9000.0), cfg)
        assert errors and "speed_dps" in errors[0]

    def test_fingers_out_of_unit_range(self):
        errors = validate_command(SetFingers(id=1, u=1.5), GripperConfig())
        assert errors

    def test_valid_commands_pass(self):
        cfg = GripperConfig()
        assert validate_command(RotatePalm(id=1, target_deg=90.0, speed_dps=600.0), cfg) == []
        assert validate_command(SetFingers(id=1, u=0.5), cfg) == []
        assert validate_command(Vacuum(id=1, on=True), cfg) == []


class TestReply:
    def test_round_trip(self):
        reply = Reply(id=9, status="completed", result={"slipped": False})
        assert parse_reply(reply.to_json()) == reply
