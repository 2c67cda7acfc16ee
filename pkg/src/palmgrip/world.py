"""Rule-driven object interaction model with seeded determinism.

Physics here is deliberately shallow: per-stage outcomes come from an
editable rule table keyed by (shape class, finger type, stage), because the
underlying observations are qualitative.  Every probability lives in the
rule file, never in code.  Geometry enters in exactly two places: the
re-grasp convergence check (fingers meeting above short objects) and the
annulus displacement check; both are cross-validated against the rule rows
by the test suite.

Semantics of a rule row:
  - `failures` are mutually exclusive stage-failing outcomes, resolved by a
    single seeded draw (probabilities sum to <= 1; remainder is success).
  - `notes` are non-failing anomalies drawn independently, and only fire
    when the stage succeeded (a retried grasp, a visible sag, cloth
    settling into the finger gaps).
  - `deterministic_failure` pins the failure that fires in deterministic
    mode (it need not be the most probable one: the mode rounds toward the
    characteristic observed behaviour, which is data, not arithmetic).
  - `paper_quote` carries the observation sentence the row encodes, as an
    audit trail surfaced in telemetry and the console.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .core import (
    FingerType,
    ObjectSpec,
    PalmgripError,
    ShapeClass,
    StateError,
    ValidationError,
)
from .fingers import FeasibilityReport
from .rig import Rig
from .rng import SplitMix64, derive_seed

_DATA_DIR = Path(__file__).parent / "data"

RULE_STAGES = ("GRASP", "FLIP_UP", "DROP_TO_PALM", "ROTATE_PALM", "REGRASP", "FLIP_DOWN")

LANDING_YAW_SCATTER = 45.0  # deg, half-width of the settle scatter on drop
DISPLACEMENT_MAX_YAW = 15.0  # deg, half-width of re-grasp displacement


class FailureKind(str, enum.Enum):
    PUSHED_OFF_CENTER = "pushed_off_center"
    SAGGED_DROP = "sagged_drop"
    LOST_GRIP_DEFORM = "lost_grip_deform"
    TWISTED_OUT = "twisted_out"
    TIPPED_ON_DROP = "tipped_on_drop"
    BOUNCED_OFF = "bounced_off"
    DRAPED_ON_FINGERS = "draped_on_fingers"
    FELL_BETWEEN_FINGERS = "fell_between_fingers"
    BLOCKED_ROTATION = "blocked_rotation"
    CONVERGE_REGRASP_FAIL = "converge_regrasp_fail"
    DISPLACED_ON_REGRASP = "displaced_on_regrasp"


class DropOutcome(str, enum.Enum):
    CENTERED = "centered"
    OFF_CENTER = "off_center"
    TIPPED = "tipped"
    BOUNCED = "bounced"
    DRAPED = "draped"


# bounced/draped leave the object off the palm entirely
_DROP_FAILURE_TO_OUTCOME = {
    FailureKind.TIPPED_ON_DROP: DropOutcome.TIPPED,
    FailureKind.BOUNCED_OFF: DropOutcome.BOUNCED,
    FailureKind.DRAPED_ON_FINGERS: DropOutcome.DRAPED,
    FailureKind.PUSHED_OFF_CENTER: DropOutcome.OFF_CENTER,
}


class FeasibilityError(PalmgripError):
    """Grasp attempted on an infeasible object; carries the report."""

    def __init__(self, report: FeasibilityReport):
        super().__init__(f"object not graspable: {report.reason.value}")
        self.report = report


@dataclass(frozen=True)
class WeightedOutcome:
    kind: FailureKind
    probability: float


@dataclass(frozen=True)
class FailureRule:
    stage: str
    shape_class: ShapeClass
    finger_type: FingerType
    failures: tuple[WeightedOutcome, ...]
    notes: tuple[WeightedOutcome, ...]
    deterministic_failure: Optional[FailureKind]
    paper_quote: str

    def failure_probability(self) -> float:
        return sum(o.probability for o in self.failures)


@dataclass(frozen=True)
class RuleTable:
    rules: dict[tuple[ShapeClass, FingerType, str], FailureRule]

    def rule_for(self, shape: ShapeClass, ftype: FingerType, stage: str) -> FailureRule:
        return self.rules[(shape, ftype, stage)]


def load_rules(path: Optional[Path] = None) -> RuleTable:
    """Load and validate the rule table.

    Validation enforces exactly one rule per (shape class, finger type,
    rule stage) triple - gaps and duplicates are both load errors - plus
    probability ranges and that the pinned deterministic failure is one of
    the row's listed failures.
    """
    raw = json.loads((path or _DATA_DIR / "failure_rules.json").read_text())
    rules: dict[tuple[ShapeClass, FingerType, str], FailureRule] = {}
    errors: list[str] = []
    for entry in raw["rules"]:
        stage = entry["stage"]
        if stage not in RULE_STAGES:
            errors.append(f"unknown stage {stage!r}")
            continue
        rule = FailureRule(
            stage=stage,
            shape_class=ShapeClass(entry["shape_class"]),
            finger_type=FingerType(entry["finger_type"]),
            failures=tuple(
                WeightedOutcome(FailureKind(o["kind"]), float(o["probability"]))
                for o in entry.get("failures", [])
            ),
            notes=tuple(
                WeightedOutcome(FailureKind(o["kind"]), float(o["probability"]))
                for o in entry.get("notes", [])
            ),
            deterministic_failure=(
                FailureKind(entry["deterministic_failure"])
                if entry.get("deterministic_failure")
                else None
            ),
            paper_quote=entry.get("paper_quote", ""),
        )
        key = (rule.shape_class, rule.finger_type, rule.stage)
        if key in rules:
            errors.append(f"duplicate rule for {key}")
        rules[key] = rule
        for out in rule.failures + rule.notes:
            if not 0.0 <= out.probability <= 1.0:
                errors.append(f"{key}: probability {out.probability} outside [0, 1]")
        if rule.failure_probability() > 1.0 + 1e-12:
            errors.append(f"{key}: failure probabilities sum past 1")
        if rule.deterministic_failure is not None and rule.deterministic_failure not in {
            o.kind for o in rule.failures
        }:
            errors.append(f"{key}: deterministic_failure not among listed failures")
    for shape in ShapeClass:
        for ftype in FingerType:
            for stage in RULE_STAGES:
                if (shape, ftype, stage) not in rules:
                    errors.append(f"missing rule for ({shape.value}, {ftype.value}, {stage})")
    if errors:
        raise ValidationError(errors)
    return RuleTable(rules=rules)


@dataclass(frozen=True)
class GraspResult:
    ok: bool
    failure: Optional[FailureKind] = None
    note: Optional[str] = None  # "pinch_then_ok" or a note FailureKind value


@dataclass(frozen=True)
class HoldResult:
    held: bool
    failure: Optional[FailureKind] = None
    note: Optional[str] = None


@dataclass(frozen=True)
class DropResult:
    outcome: DropOutcome
    landing_yaw: float  # deg
    failure: Optional[FailureKind] = None
    note: Optional[str] = None

    def on_palm(self) -> bool:
        return self.outcome in (DropOutcome.CENTERED, DropOutcome.TIPPED, DropOutcome.OFF_CENTER)


@dataclass(frozen=True)
class RegraspResult:
    ok: bool
    failure: Optional[FailureKind] = None
    yaw_error: float = 0.0  # deg, displacement when re-grasping
    note: Optional[str] = None


class World:
    """Stage outcome oracle over (rules, rig), pure in (inputs, seed)."""

    def __init__(self, rules: RuleTable, rig: Rig, deterministic: bool = False):
        self.rules = rules
        self.rig = rig
        self.deterministic = deterministic

    # -- rule resolution -------------------------------------------------

    def _draw_failure(self, rule: FailureRule, seed: int) -> Optional[FailureKind]:
        if self.deterministic:
            return rule.deterministic_failure
        if not rule.failures:
            return None
        u = SplitMix64(derive_seed(seed, "failure", rule.stage)).uniform()
        cumulative = 0.0
        for out in rule.failures:
            cumulative += out.probability
            if u < cumulative:
                return out.kind
        return None

    def _draw_note(self, rule: FailureRule, seed: int) -> Optional[FailureKind]:
        for idx, out in enumerate(rule.notes):
            if self.deterministic:
                if out.probability >= 0.5:
                    return out.kind
                continue
            u = SplitMix64(derive_seed(seed, "note", rule.stage, idx)).uniform()
            if u < out.probability:
                return out.kind
        return None

    # -- stage operations ------------------------------------------------

    def grasp_attempt(self, obj: ObjectSpec, ftype: FingerType, seed: int) -> GraspResult:
        """Close the fingers on the object from above."""
        report = self.rig.feasibility(obj, ftype)
        if not report.feasible:
            raise FeasibilityError(report)
        rule = self.rules.rule_for(obj.shape_class, ftype, "GRASP")
        failure = self._draw_failure(rule, seed)
        if failure is not None:
            return GraspResult(ok=False, failure=failure)
        note = self._draw_note(rule, seed)
        if report.reason.value == "pinch_required":
            note = "pinch_then_ok"
        return GraspResult(ok=True, note=note.value if isinstance(note, FailureKind) else note)

    def flip_hold_check(
        self, obj: ObjectSpec, ftype: FingerType, seed: int, stage: str = "FLIP_UP"
    ) -> HoldResult:
        """Whether the fingers keep their grip through a body flip."""
        rule = self.rules.rule_for(obj.shape_class, ftype, stage)
        failure = self._draw_failure(rule, seed)
        if failure is not None:
            return HoldResult(held=False, failure=failure)
        note = self._draw_note(rule, seed)
        return HoldResult(held=True, note=note.value if note else None)

    def drop_onto_palm(self, obj: ObjectSpec, ftype: FingerType, seed: int, facing_up: bool = True) -> DropResult:
        """Release the object over the palm and see where it lands."""
        if not facing_up:
            raise StateError("drop requires the gripper to face up")
        rule = self.rules.rule_for(obj.shape_class, ftype, "DROP_TO_PALM")
        yaw = SplitMix64(derive_seed(seed, "landing_yaw")).uniform_range(
            -LANDING_YAW_SCATTER, LANDING_YAW_SCATTER
        )
        failure = self._draw_failure(rule, seed)
        if failure is not None:
            return DropResult(
                outcome=_DROP_FAILURE_TO_OUTCOME[failure], landing_yaw=yaw, failure=failure
            )
        note = self._draw_note(rule, seed)
        return DropResult(
            outcome=DropOutcome.CENTERED,
            landing_yaw=yaw,
            note=note.value if note else None,
        )

    def rotation_blocked(self, obj: ObjectSpec, draped: bool) -> bool:
        """Cloth wedges into the finger gaps and cannot be turned, whether it
        draped on the way down or settled after a clean drop."""
        return draped or obj.cloth_like

    def regrasp(self, obj: ObjectSpec, ftype: FingerType, seed: int, on_palm: bool = True) -> RegraspResult:
        """Close the fingers on the object resting on the palm.

        Moulded fingers converge to a closure point at a fixed standoff from
        the palm; anything shorter than that standoff is never touched.
        Wide flat annuli overhang the palm, so the closing fingers land on
        the rim and nudge the object by a bounded seeded yaw.
        """
        if not on_palm:
            raise StateError("regrasp requires the object to rest on the palm")
        if ftype is FingerType.MOULDED_OVAL:
            closure = self.rig.convergence_height(ftype)
            if closure is not None and obj.height < closure:
                return RegraspResult(ok=False, failure=FailureKind.CONVERGE_REGRASP_FAIL)
        if (
            obj.shape_class is ShapeClass.ANNULUS
            and obj.characteristic_width > 2.0 * self.rig.cfg.palm_radius
        ):
            yaw_error = SplitMix64(derive_seed(seed, "displacement")).uniform_range(
                -DISPLACEMENT_MAX_YAW, DISPLACEMENT_MAX_YAW
            )
            return RegraspResult(
                ok=True,
                yaw_error=yaw_error,
                note=FailureKind.DISPLACED_ON_REGRASP.value,
            )
        return RegraspResult(ok=True)

    # -- analytic view ---------------------------------------------------

    def stage_success_probability(self, obj: ObjectSpec, ftype: FingerType, stage: str) -> float:
        """Closed-form P(stage succeeds) implied by the rule table."""
        rule = self.rules.rule_for(obj.shape_class, ftype, stage)
        if self.deterministic:
            return 0.0 if rule.deterministic_failure is not None else 1.0
        return 1.0 - rule.failure_probability()

    def trial_success_probability(self, obj: ObjectSpec, ftype: FingerType) -> float:
        """Product of per-stage success probabilities over the rule stages."""
        p = 1.0
        for stage in RULE_STAGES:
            p *= self.stage_success_probability(obj, ftype, stage)
        return p
