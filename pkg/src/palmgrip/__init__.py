"""Desk-scale control stack and simulator for a three-fingered soft
pneumatic gripper with a servo-driven vacuum palm.

The gripper re-orients objects in hand by grasping from above, flipping
itself face up, dropping the object onto the rotating palm, twisting it to
the target yaw under suction, re-grasping, and placing it back down.  This
package models that pipeline end to end: finger response calibration and
grasp geometry, palm rotation with a slip model, a rule-driven interaction
world, the stage machine, an experiment harness, and a WebSocket
teleoperation service.
"""

from .core import (
    Facing,
    FingerType,
    GripperConfig,
    GripperState,
    HeldObject,
    HoldMode,
    ObjectSpec,
    PalmgripError,
    ShapeClass,
    StageOutcome,
    StageOutcomeKind,
    StateError,
    TrialResult,
    ValidationError,
    builtin_objects,
    validate_config,
)
from .fingers import (
    Calibration,
    FeasibilityReason,
    FeasibilityReport,
    ResponseCurve,
    UnreachableTargetError,
    aperture,
    bend_angles,
    calibrate,
    command_to_voltages,
    convergence_height,
    fingertip_position,
    grasp_feasible,
    load_curve_set,
)
from .harness import ExperimentReport, render_report, run_suite
from .palm import (
    RotationCommand,
    RotationOutcome,
    RotationProfile,
    SlipModel,
    max_noslip_speed,
    rotate_to,
    set_vacuum,
    torque_margin,
)
from .rig import Rig
from .sequencer import SequencePlan, Sequencer, SequenceStage
from .world import DropOutcome, FailureKind, FailureRule, RuleTable, World, load_rules

__version__ = "0.1.0"
