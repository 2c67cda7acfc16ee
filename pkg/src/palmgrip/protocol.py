"""Wire protocol: commands in, replies and telemetry frames out.

Messages are single-line JSON over WebSocket text frames, one message per
frame, snake_case keys throughout.  Commands are parsed strictly (unknown
fields are rejected so operator typos cannot be silently dropped), while
telemetry parsing ignores unknown fields so older consoles keep working
against newer servers.  Parsing is structural; range checks against a
specific rig live in `validate_command` so the rejection reply can carry
per-field diagnostics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from typing import Optional, Union

from .core import GripperConfig, GripperState, ObjectSpec, PalmgripError
from .sequencer import SequencePlan


class ProtocolError(PalmgripError):
    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason
        self.detail = detail


@dataclass(frozen=True)
class SetFingers:
    id: int
    u: float
    TYPE = "set_fingers"


@dataclass(frozen=True)
class RotatePalm:
    id: int
    target_deg: float
    speed_dps: float
    TYPE = "rotate_palm"


@dataclass(frozen=True)
class Vacuum:
    id: int
    on: bool
    TYPE = "vacuum"


@dataclass(frozen=True)
class Flip:
    id: int
    direction: str  # "up" | "down"
    TYPE = "flip"


@dataclass(frozen=True)
class LoadObject:
    id: int
    object: ObjectSpec
    TYPE = "load_object"


@dataclass(frozen=True)
class RunSequence:
    id: int
    plan: SequencePlan
    TYPE = "run_sequence"


@dataclass(frozen=True)
class Pause:
    id: int
    TYPE = "pause"


@dataclass(frozen=True)
class Resume:
    id: int
    TYPE = "resume"


@dataclass(frozen=True)
class Cancel:
    id: int
    TYPE = "cancel"


@dataclass(frozen=True)
class Reset:
    id: int
    TYPE = "reset"


Command = Union[
    SetFingers, RotatePalm, Vacuum, Flip, LoadObject, RunSequence, Pause, Resume, Cancel, Reset
]

_COMMAND_TYPES = {
    cls.TYPE: cls
    for cls in (SetFingers, RotatePalm, Vacuum, Flip, LoadObject, RunSequence, Pause, Resume, Cancel, Reset)
}


def encode_command(cmd: Command) -> str:
    payload: dict = {"type": cmd.TYPE, "id": cmd.id}
    if isinstance(cmd, SetFingers):
        payload["u"] = cmd.u
    elif isinstance(cmd, RotatePalm):
        payload["target_deg"] = cmd.target_deg
        payload["speed_dps"] = cmd.speed_dps
    elif isinstance(cmd, Vacuum):
        payload["on"] = cmd.on
    elif isinstance(cmd, Flip):
        payload["direction"] = cmd.direction
    elif isinstance(cmd, LoadObject):
        payload["object"] = cmd.object.to_dict()
    elif isinstance(cmd, RunSequence):
        payload["plan"] = cmd.plan.to_dict()
    return json.dumps(payload, sort_keys=True)


def parse_command(text: str) -> Command:
    """Strict structural parse; raises ProtocolError with a coded reason."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError("malformed_json", str(exc))
    if not isinstance(data, dict):
        raise ProtocolError("malformed_json", "command must be an object")
    tag = data.pop("type", None)
    if tag not in _COMMAND_TYPES:
        raise ProtocolError("unknown_command", str(tag))
    if "id" not in data or not isinstance(data["id"], int) or isinstance(data["id"], bool):
        raise ProtocolError("missing_id", "commands carry a client-assigned integer id")
    cls = _COMMAND_TYPES[tag]
    expected = {f.name for f in fields(cls)}
    unknown = set(data) - expected
    if unknown:
        raise ProtocolError("unknown_field", ", ".join(sorted(unknown)))
    missing = expected - set(data)
    if missing:
        raise ProtocolError("missing_field", ", ".join(sorted(missing)))
    try:
        if cls is SetFingers:
            return SetFingers(id=data["id"], u=float(data["u"]))
        if cls is RotatePalm:
            return RotatePalm(
                id=data["id"],
                target_deg=float(data["target_deg"]),
                speed_dps=float(data["speed_dps"]),
            )
        if cls is Vacuum:
            if not isinstance(data["on"], bool):
                raise ProtocolError("invalid_field", "on must be a boolean")
            return Vacuum(id=data["id"], on=data["on"])
        if cls is Flip:
            if data["direction"] not in ("up", "down"):
                raise ProtocolError("invalid_field", "direction must be 'up' or 'down'")
            return Flip(id=data["id"], direction=data["direction"])
        if cls is LoadObject:
            return LoadObject(id=data["id"], object=ObjectSpec.from_dict(data["object"]))
        if cls is RunSequence:
            return RunSequence(id=data["id"], plan=SequencePlan.from_dict(data["plan"]))
        return cls(id=data["id"])
    except ProtocolError:
        raise
    except (TypeError, ValueError, KeyError, PalmgripError) as exc:
        raise ProtocolError("invalid_field", str(exc))


def validate_command(cmd: Command, cfg: GripperConfig) -> list[str]:
    """Semantic validation against a rig config; returns field diagnostics."""
    errors: list[str] = []
    lo, hi = cfg.servo_range
    if isinstance(cmd, SetFingers):
        if not 0.0 <= cmd.u <= 1.0:
            errors.append(f"u: must be in [0, 1], got {cmd.u}")
    elif isinstance(cmd, RotatePalm):
        if not lo <= cmd.target_deg <= hi:
            errors.append(f"target_deg: outside servo_range [{lo}, {hi}]")
        if not 0.0 < cmd.speed_dps <= cfg.max_palm_speed:
            errors.append(f"speed_dps: must be in (0, {cfg.max_palm_speed}]")
    elif isinstance(cmd, RunSequence):
        plan = cmd.plan
        if not lo <= plan.target_yaw <= hi:
            errors.append(f"plan.target_yaw: outside servo_range [{lo}, {hi}]")
        if not 0.0 < plan.rotation_speed <= cfg.max_palm_speed:
            errors.append(f"plan.rotation_speed: must be in (0, {cfg.max_palm_speed}]")
        if plan.obj.mass > cfg.mass_capacity:
            errors.append(f"plan.obj.mass: exceeds capacity {cfg.mass_capacity} g")
    return errors


# -- replies -----------------------------------------------------------------


@dataclass(frozen=True)
class Reply:
    id: int
    status: str  # accepted | rejected | completed
    reason: Optional[str] = None
    result: Optional[dict] = None

    def to_json(self) -> str:
        payload: dict = {"type": "reply", "id": self.id, "status": self.status}
        if self.reason is not None:
            payload["reason"] = self.reason
        if self.result is not None:
            payload["result"] = self.result
        return json.dumps(payload, sort_keys=True)


def accepted(cmd_id: int) -> Reply:
    return Reply(id=cmd_id, status="accepted")


def rejected(cmd_id: int, reason: str) -> Reply:
    return Reply(id=cmd_id, status="rejected", reason=reason)


def completed(cmd_id: int, result: Optional[dict] = None) -> Reply:
    return Reply(id=cmd_id, status="completed", result=result)


# -- telemetry ----------------------------------------------------------------


@dataclass(frozen=True)
class StageEvent:
    stage: str
    outcome: str  # ok | failed
    failure: Optional[str] = None
    note: Optional[str] = None
    paper_quote: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "outcome": self.outcome,
            "failure": self.failure,
            "note": self.note,
            "paper_quote": self.paper_quote,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StageEvent":
        return cls(
            stage=data["stage"],
            outcome=data["outcome"],
            failure=data.get("failure"),
            note=data.get("note"),
            paper_quote=data.get("paper_quote"),
        )


@dataclass(frozen=True)
class TelemetryFrame:
    timestamp_ms: int  # since session start, strictly increasing
    state: GripperState
    stage: str
    last_event: Optional[StageEvent] = None

    def to_json(self) -> str:
        payload = {
            "type": "telemetry",
            "timestamp_ms": self.timestamp_ms,
            "state": self.state.to_dict(),
            "stage": self.stage,
            "last_event": self.last_event.to_dict() if self.last_event else None,
        }
        return json.dumps(payload, sort_keys=True)


def parse_telemetry(text: str) -> TelemetryFrame:
    """Lenient parse: unknown fields anywhere are ignored."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError("malformed_json", str(exc))
    if data.get("type") != "telemetry":
        raise ProtocolError("unknown_message", str(data.get("type")))
    try:
        return TelemetryFrame(
            timestamp_ms=int(data["timestamp_ms"]),
            state=GripperState.from_dict(data["state"], strict=False),
            stage=str(data["stage"]),
            last_event=StageEvent.from_dict(data["last_event"]) if data.get("last_event") else None,
        )
    except (TypeError, ValueError, KeyError, PalmgripError) as exc:
        raise ProtocolError("invalid_field", str(exc))


def parse_reply(text: str) -> Reply:
    data = json.loads(text)
    if data.get("type") != "reply":
        raise ProtocolError("unknown_message", str(data.get("type")))
    return Reply(
        id=data["id"],
        status=data["status"],
        reason=data.get("reason"),
        result=data.get("result"),
    )
