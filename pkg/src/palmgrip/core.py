"""Shared domain types for the gripper stack.

Units are degrees, millimetres, grams and seconds everywhere; no radians
appear in any public interface.  All types are immutable value objects and
validate themselves on construction, except `GripperConfig`, which is plain
config data checked explicitly through `validate_config` (so that a config
loaded from JSON can be validated with every violation reported at once).
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

_DATA_DIR = Path(__file__).parent / "data"


class PalmgripError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(PalmgripError):
    """One or more invariant violations; `.errors` lists all of them."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


class StateError(PalmgripError):
    """Operation called in a state that does not satisfy its precondition."""


class ShapeClass(str, enum.Enum):
    OVOID = "ovoid"
    CYLINDER = "cylinder"
    ANNULUS = "annulus"
    SPHERE = "sphere"
    CLOTH = "cloth"


class FingerType(str, enum.Enum):
    MOULDED_OVAL = "moulded_oval"
    PRINTED = "printed"


class HoldMode(str, enum.Enum):
    IN_FINGERS = "in_fingers"
    ON_PALM = "on_palm"
    NONE = "none"


class Facing(str, enum.Enum):
    DOWN = "down"
    UP = "up"


@dataclass(frozen=True)
class ObjectSpec:
    """A manipulable object, reduced to the scalars the simulator needs."""

    name: str
    mass: float  # grams
    shape_class: ShapeClass
    characteristic_width: float  # mm, largest horizontal extent at rest
    height: float  # mm
    cloth_like: bool = False
    com_height_frac: float = 0.5  # centre of mass height / object height

    def __post_init__(self):
        errors = []
        if not self.mass > 0:
            errors.append("mass must be > 0")
        if not self.characteristic_width > 0:
            errors.append("characteristic_width must be > 0")
        if not self.height > 0:
            errors.append("height must be > 0")
        if self.cloth_like != (self.shape_class is ShapeClass.CLOTH):
            errors.append("cloth_like must hold exactly when shape_class is cloth")
        if not 0.0 <= self.com_height_frac <= 1.0:
            errors.append("com_height_frac must be in [0, 1]")
        if errors:
            raise ValidationError(errors)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "mass": self.mass,
            "shape_class": self.shape_class.value,
            "characteristic_width": self.characteristic_width,
            "height": self.height,
            "cloth_like": self.cloth_like,
            "com_height_frac": self.com_height_frac,
        }

    @classmethod
    def from_dict(cls, data: dict, strict: bool = True) -> "ObjectSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown and strict:
            raise ValidationError([f"unknown key: {k}" for k in sorted(unknown)])
        missing = known - set(data)
        if missing:
            raise ValidationError([f"missing key: {k}" for k in sorted(missing)])
        return cls(
            name=data["name"],
            mass=float(data["mass"]),
            shape_class=ShapeClass(data["shape_class"]),
            characteristic_width=float(data["characteristic_width"]),
            height=float(data["height"]),
            cloth_like=bool(data["cloth_like"]),
            com_height_frac=float(data["com_height_frac"]),
        )


@dataclass(frozen=True)
class GripperConfig:
    """Geometry and actuation limits of the rig.

    Defaults marked "assumed" are not measured values; they are plausible
    desk-scale numbers and are deliberately kept in config rather than code
    so they stay auditable and overridable.
    """

    n_fingers: int = 3
    splay_angle: float = 25.0  # deg, finger mount tilt off the palm axis
    finger_length: dict[FingerType, float] = field(
        default_factory=lambda: {FingerType.MOULDED_OVAL: 88.0, FingerType.PRINTED: 70.0}
    )  # mm (assumed; printed shorter than moulded)
    palm_radius: float = 35.0  # mm (assumed)
    finger_mount_radius: float = 42.0  # mm (assumed)
    servo_range: tuple[float, float] = (-150.0, 150.0)  # deg (assumed)
    max_palm_speed: float = 700.0  # deg/s
    vacuum_hold_force: float = 1.0  # N (assumed)
    mass_capacity: float = 80.0  # g, finger lifting ceiling

    def to_dict(self) -> dict:
        return {
            "n_fingers": self.n_fingers,
            "splay_angle": self.splay_angle,
            "finger_length": {k.value: v for k, v in self.finger_length.items()},
            "palm_radius": self.palm_radius,
            "finger_mount_radius": self.finger_mount_radius,
            "servo_range": list(self.servo_range),
            "max_palm_speed": self.max_palm_speed,
            "vacuum_hold_force": self.vacuum_hold_force,
            "mass_capacity": self.mass_capacity,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GripperConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError([f"unknown key: {k}" for k in sorted(unknown)])
        kwargs = dict(data)
        if "finger_length" in kwargs:
            kwargs["finger_length"] = {
                FingerType(k): float(v) for k, v in kwargs["finger_length"].items()
            }
        if "servo_range" in kwargs:
            lo, hi = kwargs["servo_range"]
            kwargs["servo_range"] = (float(lo), float(hi))
        return cls(**kwargs)


def validate_config(cfg: GripperConfig) -> GripperConfig:
    """Return cfg unchanged if every invariant holds.

    Raises ValidationError whose `.errors` names every violated field, one
    entry per violation, so a bad config file reports everything at once.
    """
    errors = []
    if cfg.n_fingers != 3:
        errors.append("n_fingers must be exactly 3")
    if not 0.0 < cfg.splay_angle < 90.0:
        errors.append("splay_angle out of range (0, 90)")
    for ftype in FingerType:
        if ftype not in cfg.finger_length:
            errors.append(f"finger_length missing entry for {ftype.value}")
        elif not cfg.finger_length[ftype] > 0:
            errors.append(f"finger_length[{ftype.value}] must be > 0")
    if (
        FingerType.PRINTED in cfg.finger_length
        and FingerType.MOULDED_OVAL in cfg.finger_length
        and not cfg.finger_length[FingerType.PRINTED] < cfg.finger_length[FingerType.MOULDED_OVAL]
    ):
        errors.append("finger_length[printed] must be shorter than finger_length[moulded_oval]")
    if not cfg.palm_radius > 0:
        errors.append("palm_radius must be > 0")
    if not cfg.finger_mount_radius > 0:
        errors.append("finger_mount_radius must be > 0")
    if not cfg.servo_range[0] < cfg.servo_range[1]:
        errors.append("servo_range must be a non-empty interval")
    if not cfg.max_palm_speed > 0:
        errors.append("max_palm_speed must be > 0")
    if not cfg.vacuum_hold_force > 0:
        errors.append("vacuum_hold_force must be > 0")
    if not cfg.mass_capacity > 0:
        errors.append("mass_capacity must be > 0")
    if errors:
        raise ValidationError(errors)
    return cfg


@dataclass(frozen=True)
class HeldObject:
    """An object currently tracked by the gripper, with how it is held."""

    obj: ObjectSpec
    hold_mode: HoldMode
    object_yaw: float = 0.0  # deg
    draped: bool = False  # cloth settled over/between the fingers

    def to_dict(self) -> dict:
        return {
            "obj": self.obj.to_dict(),
            "hold_mode": self.hold_mode.value,
            "object_yaw": self.object_yaw,
            "draped": self.draped,
        }

    @classmethod
    def from_dict(cls, data: dict, strict: bool = True) -> "HeldObject":
        return cls(
            obj=ObjectSpec.from_dict(data["obj"], strict=strict),
            hold_mode=HoldMode(data["hold_mode"]),
            object_yaw=float(data["object_yaw"]),
            draped=bool(data["draped"]),
        )


@dataclass(frozen=True)
class GripperState:
    """Snapshot of every actuator and the held object; the telemetry unit.

    `flip_angle` is the body flip in [0, 180]; facing is derived (up once
    past 90).  Config-dependent bounds (palm angle within the servo range,
    bends within the curve maxima) are enforced by `validate_state`, which
    the control loop calls on every transition.
    """

    palm_angle: float = 0.0  # deg
    palm_velocity: float = 0.0  # deg/s
    finger_command: float = 0.0  # dimensionless u in [0, 1]
    finger_bends: tuple[float, float, float] = (0.0, 0.0, 0.0)  # deg
    vacuum_on: bool = False
    flip_angle: float = 0.0  # deg, 0 = facing down, 180 = facing up
    held_object: Optional[HeldObject] = None

    MAX_BEND = 200.0  # deg, model-wide cap

    def __post_init__(self):
        errors = []
        if not 0.0 <= self.finger_command <= 1.0:
            errors.append("finger_command must be in [0, 1]")
        if len(self.finger_bends) != 3:
            errors.append("finger_bends must have exactly 3 entries")
        elif not all(0.0 <= b <= self.MAX_BEND for b in self.finger_bends):
            errors.append(f"finger_bends must be within [0, {self.MAX_BEND}]")
        if not 0.0 <= self.flip_angle <= 180.0:
            errors.append("flip_angle must be in [0, 180]")
        if (
            self.held_object is not None
            and self.held_object.hold_mode is HoldMode.ON_PALM
            and self.facing is not Facing.UP
        ):
            errors.append("hold_mode on_palm requires the gripper to face up")
        if errors:
            raise ValidationError(errors)

    @property
    def facing(self) -> Facing:
        return Facing.UP if self.flip_angle >= 90.0 else Facing.DOWN

    def with_(self, **changes) -> "GripperState":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "palm_angle": self.palm_angle,
            "palm_velocity": self.palm_velocity,
            "finger_command": self.finger_command,
            "finger_bends": list(self.finger_bends),
            "vacuum_on": self.vacuum_on,
            "flip_angle": self.flip_angle,
            "facing": self.facing.value,
            "held_object": self.held_object.to_dict() if self.held_object else None,
        }

    @classmethod
    def from_dict(cls, data: dict, strict: bool = True) -> "GripperState":
        return cls(
            palm_angle=float(data["palm_angle"]),
            palm_velocity=float(data["palm_velocity"]),
            finger_command=float(data["finger_command"]),
            finger_bends=tuple(float(b) for b in data["finger_bends"]),
            vacuum_on=bool(data["vacuum_on"]),
            flip_angle=float(data["flip_angle"]),
            held_object=(
                HeldObject.from_dict(data["held_object"], strict=strict)
                if data.get("held_object")
                else None
            ),
        )


def validate_state(state: GripperState, cfg: GripperConfig) -> GripperState:
    """Check the config-dependent state invariants (servo range)."""
    lo, hi = cfg.servo_range
    if not lo <= state.palm_angle <= hi:
        raise ValidationError([f"palm_angle {state.palm_angle} outside servo_range [{lo}, {hi}]"])
    return state


class StageOutcomeKind(str, enum.Enum):
    OK = "ok"
    FAILED = "failed"
    SKIPPED = "skipped"


@dataclass(frozen=True)
class StageOutcome:
    """Per-stage record inside a trial."""

    stage: str  # SequenceStage name
    outcome: StageOutcomeKind
    failure_detail: Optional[str] = None  # FailureKind value when failed
    note: Optional[str] = None  # non-failing anomaly (retry, sag, displacement)
    restarted: bool = False  # stage began from a force-set precondition

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "outcome": self.outcome.value,
            "failure_detail": self.failure_detail,
            "note": self.note,
            "restarted": self.restarted,
        }


@dataclass(frozen=True)
class TrialResult:
    """One full pipeline run on one object with one finger set."""

    obj: ObjectSpec
    finger_type: FingerType
    stage_outcomes: tuple[StageOutcome, ...]
    overall_success: bool
    seed: int

    def __post_init__(self):
        all_ok = all(s.outcome is StageOutcomeKind.OK for s in self.stage_outcomes)
        if self.overall_success != all_ok:
            raise ValidationError(["overall_success must hold exactly when every stage is ok"])

    def to_dict(self) -> dict:
        return {
            "object": self.obj.name,
            "mass": self.obj.mass,
            "finger_type": self.finger_type.value,
            "seed": self.seed,
            "overall_success": self.overall_success,
            "stage_outcomes": [s.to_dict() for s in self.stage_outcomes],
        }


def builtin_objects(path: Optional[Path] = None) -> list[ObjectSpec]:
    """The five reference test objects, loaded from the bundled data file.

    Masses are the published test-object masses; widths, heights and COM
    fractions are estimates recorded in the data file (never in code) so the
    measured/estimated boundary stays auditable.
    """
    data = json.loads((path or _DATA_DIR / "builtin_objects.json").read_text())
    return [ObjectSpec.from_dict(entry) for entry in data["objects"]]


def load_object(path: Path) -> ObjectSpec:
    return ObjectSpec.from_dict(json.loads(Path(path).read_text()))


def load_config(path: Path) -> GripperConfig:
    return validate_config(GripperConfig.from_dict(json.loads(Path(path).read_text())))


def lift_by_suction_ok(obj: ObjectSpec, cfg: GripperConfig) -> bool:
    """Whether the palm's suction alone can carry the object's weight."""
    weight_newtons = obj.mass * 1e-3 * 9.81
    return cfg.vacuum_hold_force >= weight_newtons


def deg(rad: float) -> float:
    return math.degrees(rad)


def rad(degrees_value: float) -> float:
    return math.radians(degrees_value)
