"""The manipulation pipeline as an explicit stage machine.

One trial walks grasp-from-above, body flip to face up, drop onto the
palm, palm rotation to the target yaw, re-grasp, flip back down and place.
A failed stage faults the trial; under the restart protocol the run then
continues at the start of the subsequent stage with the world force-set to
that stage's precondition, mirroring how the physical tests were observed
stage by stage, so later stages still produce data even after a fault.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace
from typing import Callable, Optional

from .core import (
    Facing,
    FingerType,
    GripperState,
    HeldObject,
    HoldMode,
    ObjectSpec,
    StageOutcome,
    StageOutcomeKind,
    StateError,
    TrialResult,
    ValidationError,
    validate_state,
)
from .palm import RangeError, RotationCommand, RotationOutcome, rotate_to
from .rng import derive_seed
from .world import DropOutcome, FailureKind, World


class SequenceStage(str, enum.Enum):
    IDLE = "IDLE"
    APPROACH = "APPROACH"
    GRASP = "GRASP"
    LIFT = "LIFT"
    FLIP_UP = "FLIP_UP"
    DROP_TO_PALM = "DROP_TO_PALM"
    ROTATE_PALM = "ROTATE_PALM"
    REGRASP = "REGRASP"
    FLIP_DOWN = "FLIP_DOWN"
    PLACE = "PLACE"
    DONE = "DONE"


PIPELINE: tuple[SequenceStage, ...] = tuple(SequenceStage)
PHYSICAL_STAGES: tuple[SequenceStage, ...] = PIPELINE[1:-1]  # APPROACH..PLACE

# nominal stage durations (s) for traces and live telemetry; the rotation
# stage uses its profile duration instead
STAGE_DURATIONS: dict[SequenceStage, float] = {
    SequenceStage.APPROACH: 0.5,
    SequenceStage.GRASP: 0.6,
    SequenceStage.LIFT: 0.4,
    SequenceStage.FLIP_UP: 1.0,
    SequenceStage.DROP_TO_PALM: 0.4,
    SequenceStage.ROTATE_PALM: 0.5,
    SequenceStage.REGRASP: 0.6,
    SequenceStage.FLIP_DOWN: 1.0,
    SequenceStage.PLACE: 0.5,
}


def next_stage(stage: SequenceStage) -> SequenceStage:
    idx = PIPELINE.index(stage)
    return PIPELINE[min(idx + 1, len(PIPELINE) - 1)]


def flip_profile(t: float, duration: float, upward: bool) -> float:
    """Body flip angle (deg) over time: linear 0-180 ramp, or its reverse."""
    if duration <= 0:
        return 180.0 if upward else 0.0
    frac = min(max(t / duration, 0.0), 1.0)
    return 180.0 * frac if upward else 180.0 * (1.0 - frac)


@dataclass(frozen=True)
class SequencePlan:
    obj: ObjectSpec
    finger_type: FingerType
    target_yaw: float = 90.0  # deg
    grasp_u: Optional[float] = None  # resolved from feasibility when None
    rotation_speed: float = 600.0  # deg/s
    restart_on_failure: bool = True
    retry_failed_stage: bool = False  # retry once before advancing

    def validate(self, world: World) -> "SequencePlan":
        cfg = world.rig.cfg
        errors = []
        lo, hi = cfg.servo_range
        if not lo <= self.target_yaw <= hi:
            errors.append(f"target_yaw {self.target_yaw} outside servo_range [{lo}, {hi}]")
        if not 0.0 < self.rotation_speed <= cfg.max_palm_speed:
            errors.append(f"rotation_speed must be in (0, {cfg.max_palm_speed}]")
        if self.grasp_u is not None and not 0.0 <= self.grasp_u <= 1.0:
            errors.append("grasp_u must be in [0, 1]")
        if errors:
            raise ValidationError(errors)
        return self

    def to_dict(self) -> dict:
        return {
            "obj": self.obj.to_dict(),
            "finger_type": self.finger_type.value,
            "target_yaw": self.target_yaw,
            "grasp_u": self.grasp_u,
            "rotation_speed": self.rotation_speed,
            "restart_on_failure": self.restart_on_failure,
            "retry_failed_stage": self.retry_failed_stage,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SequencePlan":
        return cls(
            obj=ObjectSpec.from_dict(data["obj"]),
            finger_type=FingerType(data["finger_type"]),
            target_yaw=float(data["target_yaw"]),
            grasp_u=None if data.get("grasp_u") is None else float(data["grasp_u"]),
            rotation_speed=float(data["rotation_speed"]),
            restart_on_failure=bool(data["restart_on_failure"]),
            retry_failed_stage=bool(data.get("retry_failed_stage", False)),
        )


@dataclass(frozen=True)
class StepResult:
    stage: SequenceStage
    next: SequenceStage
    state: GripperState
    outcome: StageOutcomeKind
    failure: Optional[FailureKind] = None
    note: Optional[str] = None
    duration: float = 0.0  # simulated seconds spent in the stage


TraceSink = Callable[[dict], None]


class Sequencer:
    """Owns state transitions for one world; single-writer by construction."""

    def __init__(self, world: World):
        self.world = world
        self.cfg = world.rig.cfg

    # -- state construction ----------------------------------------------

    def initial_state(self) -> GripperState:
        return GripperState()

    def _grasp_command(self, plan: SequencePlan) -> float:
        if plan.grasp_u is not None:
            return plan.grasp_u
        report = self.world.rig.feasibility(plan.obj, plan.finger_type)
        return report.grasp_u if report.grasp_u is not None else 1.0

    def _with_fingers(self, state: GripperState, plan: SequencePlan, u: float) -> GripperState:
        bends = self.world.rig.bends(u, plan.finger_type)
        return state.with_(finger_command=u, finger_bends=bends)

    def stage_precondition(self, stage: SequenceStage, plan: SequencePlan) -> GripperState:
        """Idealized world state at the entry of a stage (restart protocol)."""
        obj = plan.obj
        u = self._grasp_command(plan)
        in_fingers = HeldObject(obj, HoldMode.IN_FINGERS, object_yaw=0.0)
        base = GripperState()
        if stage in (SequenceStage.IDLE, SequenceStage.APPROACH, SequenceStage.GRASP):
            return base
        if stage in (SequenceStage.LIFT, SequenceStage.FLIP_UP):
            return self._with_fingers(base.with_(held_object=in_fingers), plan, u)
        if stage is SequenceStage.DROP_TO_PALM:
            return self._with_fingers(
                base.with_(held_object=in_fingers, flip_angle=180.0), plan, u
            )
        if stage is SequenceStage.ROTATE_PALM:
            on_palm = HeldObject(obj, HoldMode.ON_PALM, object_yaw=0.0)
            return base.with_(held_object=on_palm, flip_angle=180.0, vacuum_on=True)
        if stage is SequenceStage.REGRASP:
            on_palm = HeldObject(obj, HoldMode.ON_PALM, object_yaw=plan.target_yaw)
            return base.with_(held_object=on_palm, flip_angle=180.0, vacuum_on=True)
        if stage is SequenceStage.FLIP_DOWN:
            regrasped = HeldObject(obj, HoldMode.IN_FINGERS, object_yaw=plan.target_yaw)
            return self._with_fingers(
                base.with_(held_object=regrasped, flip_angle=180.0), plan, u
            )
        if stage is SequenceStage.PLACE:
            regrasped = HeldObject(obj, HoldMode.IN_FINGERS, object_yaw=plan.target_yaw)
            return self._with_fingers(base.with_(held_object=regrasped), plan, u)
        return base

    # -- stage execution ---------------------------------------------------

    def step(
        self, state: GripperState, stage: SequenceStage, plan: SequencePlan, seed: int
    ) -> StepResult:
        """Advance exactly one stage; failures come back as data, while
        calling a stage whose precondition cannot hold raises StateError."""
        handler = {
            SequenceStage.IDLE: self._step_idle,
            SequenceStage.APPROACH: self._step_bookkeeping,
            SequenceStage.GRASP: self._step_grasp,
            SequenceStage.LIFT: self._step_bookkeeping,
            SequenceStage.FLIP_UP: self._step_flip_up,
            SequenceStage.DROP_TO_PALM: self._step_drop,
            SequenceStage.ROTATE_PALM: self._step_rotate,
            SequenceStage.REGRASP: self._step_regrasp,
            SequenceStage.FLIP_DOWN: self._step_flip_down,
            SequenceStage.PLACE: self._step_place,
            SequenceStage.DONE: self._step_done,
        }[stage]
        result = handler(state, stage, plan, derive_seed(seed, stage.value))
        validate_state(result.state, self.cfg)
        return result

    def _ok(self, stage, state, note=None, duration=None) -> StepResult:
        return StepResult(
            stage=stage,
            next=next_stage(stage),
            state=state,
            outcome=StageOutcomeKind.OK,
            note=note,
            duration=STAGE_DURATIONS.get(stage, 0.0) if duration is None else duration,
        )

    def _fail(self, stage, state, failure: FailureKind, duration=None) -> StepResult:
        return StepResult(
            stage=stage,
            next=next_stage(stage),
            state=state,
            outcome=StageOutcomeKind.FAILED,
            failure=failure,
            duration=STAGE_DURATIONS.get(stage, 0.0) if duration is None else duration,
        )

    def _step_idle(self, state, stage, plan, seed) -> StepResult:
        return self._ok(stage, self.initial_state(), duration=0.0)

    def _step_done(self, state, stage, plan, seed) -> StepResult:
        return StepResult(
            stage=stage, next=stage, state=state, outcome=StageOutcomeKind.OK, duration=0.0
        )

    def _step_bookkeeping(self, state, stage, plan, seed) -> StepResult:
        return self._ok(stage, state)

    def _step_grasp(self, state, stage, plan, seed) -> StepResult:
        if state.facing is not Facing.DOWN:
            raise StateError("grasp requires the gripper to face down over the object")
        result = self.world.grasp_attempt(plan.obj, plan.finger_type, seed)
        if not result.ok:
            return self._fail(stage, state, result.failure)
        held = HeldObject(plan.obj, HoldMode.IN_FINGERS, object_yaw=0.0)
        new = self._with_fingers(state.with_(held_object=held), plan, self._grasp_command(plan))
        return self._ok(stage, new, note=result.note)

    def _step_flip_up(self, state, stage, plan, seed) -> StepResult:
        if state.held_object is None or state.held_object.hold_mode is not HoldMode.IN_FINGERS:
            raise StateError("flip-up requires the object held in the fingers")
        result = self.world.flip_hold_check(plan.obj, plan.finger_type, seed, stage="FLIP_UP")
        if not result.held:
            return self._fail(stage, state.with_(held_object=None, flip_angle=180.0), result.failure)
        return self._ok(stage, state.with_(flip_angle=180.0), note=result.note)

    def _step_drop(self, state, stage, plan, seed) -> StepResult:
        if state.facing is not Facing.UP:
            raise StateError("drop requires the gripper to face up")
        if state.held_object is None:
            raise StateError("drop requires a held object")
        result = self.world.drop_onto_palm(plan.obj, plan.finger_type, seed, facing_up=True)
        opened = state.with_(finger_command=0.0, finger_bends=(0.0, 0.0, 0.0))
        if result.outcome is DropOutcome.CENTERED:
            held = HeldObject(plan.obj, HoldMode.ON_PALM, object_yaw=result.landing_yaw)
            new = opened.with_(held_object=held, vacuum_on=True)
            return self._ok(stage, new, note=result.note)
        if result.outcome in (DropOutcome.TIPPED, DropOutcome.OFF_CENTER):
            held = HeldObject(plan.obj, HoldMode.ON_PALM, object_yaw=result.landing_yaw)
            return self._fail(stage, opened.with_(held_object=held, vacuum_on=True), result.failure)
        if result.outcome is DropOutcome.DRAPED:
            held = HeldObject(plan.obj, HoldMode.NONE, object_yaw=0.0, draped=True)
            return self._fail(stage, opened.with_(held_object=held), result.failure)
        return self._fail(stage, opened.with_(held_object=None), result.failure)  # bounced

    def _rotation_command(self, state: GripperState, plan: SequencePlan) -> RotationCommand:
        delta = plan.target_yaw - state.held_object.object_yaw
        return RotationCommand(
            target_angle=state.palm_angle + delta, peak_speed=plan.rotation_speed
        )

    def _step_rotate(self, state, stage, plan, seed) -> StepResult:
        held = state.held_object
        if held is None or (held.hold_mode is not HoldMode.ON_PALM and not held.draped):
            raise StateError("palm rotation requires the object on the palm")
        if not state.vacuum_on:
            raise StateError("palm rotation runs with the vacuum engaged")
        if self.world.rotation_blocked(plan.obj, held.draped):
            return self._fail(stage, state, FailureKind.BLOCKED_ROTATION)
        cmd = self._rotation_command(state, plan)
        try:
            outcome = rotate_to(
                cmd,
                state.palm_angle,
                self.cfg,
                obj_on_palm=plan.obj,
                slip=self.world.rig.slip,
                vacuum_on=state.vacuum_on,
            )
        except RangeError:
            return self._fail(stage, state, FailureKind.BLOCKED_ROTATION)
        if outcome.slipped:
            return self._fail(stage, state, FailureKind.BLOCKED_ROTATION, duration=outcome.duration)
        new_held = replace(held, object_yaw=held.object_yaw + outcome.object_yaw_change)
        new = state.with_(palm_angle=outcome.final_angle, held_object=new_held)
        return self._ok(stage, new, duration=outcome.duration)

    def _step_regrasp(self, state, stage, plan, seed) -> StepResult:
        held = state.held_object
        if held is None or held.hold_mode is not HoldMode.ON_PALM:
            raise StateError("re-grasp requires the object resting on the palm")
        result = self.world.regrasp(plan.obj, plan.finger_type, seed, on_palm=True)
        if not result.ok:
            return self._fail(stage, state, result.failure)
        new_held = HeldObject(
            plan.obj, HoldMode.IN_FINGERS, object_yaw=held.object_yaw + result.yaw_error
        )
        new = self._with_fingers(
            state.with_(held_object=new_held, vacuum_on=False), plan, self._grasp_command(plan)
        )
        return self._ok(stage, new, note=result.note)

    def _step_flip_down(self, state, stage, plan, seed) -> StepResult:
        if state.held_object is None or state.held_object.hold_mode is not HoldMode.IN_FINGERS:
            raise StateError("flip-down requires the object held in the fingers")
        result = self.world.flip_hold_check(plan.obj, plan.finger_type, seed, stage="FLIP_DOWN")
        if not result.held:
            return self._fail(stage, state.with_(held_object=None, flip_angle=0.0), result.failure)
        return self._ok(stage, state.with_(flip_angle=0.0), note=result.note)

    def _step_place(self, state, stage, plan, seed) -> StepResult:
        if state.facing is not Facing.DOWN:
            raise StateError("placing requires the gripper to face down")
        new = state.with_(
            held_object=None,
            finger_command=0.0,
            finger_bends=(0.0, 0.0, 0.0),
            vacuum_on=False,
        )
        return self._ok(stage, new)

    # -- trials ------------------------------------------------------------

    def run_trial(
        self, plan: SequencePlan, seed: int, trace: Optional[TraceSink] = None
    ) -> TrialResult:
        """Run the full pipeline once; failures are data, never exceptions."""
        plan.validate(self.world)
        state = self.initial_state()
        records: list[StageOutcome] = []
        sim_time = 0.0
        restarted = False
        aborted = False

        for stage in PHYSICAL_STAGES:
            if aborted:
                records.append(StageOutcome(stage.value, StageOutcomeKind.SKIPPED))
                continue
            result = self.step(state, stage, plan, seed)
            note = result.note
            if result.outcome is StageOutcomeKind.FAILED and plan.retry_failed_stage:
                retry = self.step(state, stage, plan, derive_seed(seed, stage.value, "retry"))
                if retry.outcome is StageOutcomeKind.OK:
                    result, note = retry, "retried"
            sim_time += result.duration
            records.append(
                StageOutcome(
                    stage.value,
                    result.outcome,
                    failure_detail=result.failure.value if result.failure else None,
                    note=note,
                    restarted=restarted,
                )
            )
            if trace is not None:
                trace(
                    {
                        "t": round(sim_time, 6),
                        "stage": stage.value,
                        "outcome": result.outcome.value,
                        "failure": result.failure.value if result.failure else None,
                        "note": note,
                        "restarted": restarted,
                        "state": result.state.to_dict(),
                    }
                )
            if result.outcome is StageOutcomeKind.FAILED:
                if not plan.restart_on_failure:
                    aborted = True
                    continue
                following = next_stage(stage)
                if following is not SequenceStage.DONE:
                    state = self.stage_precondition(following, plan)
                    restarted = True
                continue
            state = result.state
            restarted = False

        return TrialResult(
            obj=plan.obj,
            finger_type=plan.finger_type,
            stage_outcomes=tuple(records),
            overall_success=all(r.outcome is StageOutcomeKind.OK for r in records),
            seed=seed,
        )

    # -- direct teleop action ----------------------------------------------

    def rotate_in_hand(
        self, target_yaw: float, state: GripperState, speed: float = 600.0
    ) -> tuple[GripperState, RotationOutcome]:
        """Turn the object on the palm to an absolute yaw, as one smooth twist."""
        held = state.held_object
        if held is None or (held.hold_mode is not HoldMode.ON_PALM and not held.draped):
            raise StateError("no object on the palm")
        lo, hi = self.cfg.servo_range
        if not lo <= target_yaw <= hi:
            raise RangeError(f"target yaw {target_yaw} outside servo_range [{lo}, {hi}]")
        if held.draped or held.obj.cloth_like:
            blocked = RotationOutcome(
                final_angle=state.palm_angle,
                duration=0.0,
                slipped=True,
                slip_angle_error=abs(target_yaw - held.object_yaw),
                object_yaw_change=0.0,
            )
            return state, blocked
        delta = target_yaw - held.object_yaw
        if delta == 0.0:
            return state, RotationOutcome(state.palm_angle, 0.0, False, 0.0, 0.0)
        cmd = RotationCommand(target_angle=state.palm_angle + delta, peak_speed=speed)
        outcome = rotate_to(
            cmd,
            state.palm_angle,
            self.cfg,
            obj_on_palm=held.obj,
            slip=self.world.rig.slip,
            vacuum_on=state.vacuum_on,
        )
        new_held = replace(held, object_yaw=held.object_yaw + outcome.object_yaw_change)
        return state.with_(palm_angle=outcome.final_angle, held_object=new_held), outcome


def trace_to_ndjson(records: list[dict]) -> str:
    return "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in records)
