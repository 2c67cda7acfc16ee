"""Per-finger pressure response, calibration, and grasp geometry.

A finger is driven by a 0-5 V regulator command and responds with a bend
angle; the response differs slightly per moulded finger, so the three
fingers are aligned by giving each its own voltage range and mapping one
linear command u in [0, 1] across all three ranges simultaneously.  The
bent finger is modelled as a circular arc of constant curvature mounted at
a fixed splay angle, which is what turns bend angles into fingertip
positions, apertures and grasp feasibility.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

from .core import (
    FingerType,
    GripperConfig,
    ObjectSpec,
    PalmgripError,
    ShapeClass,
    ValidationError,
)

_DATA_DIR = Path(__file__).parent / "data"

RESIDUAL_GRID_POINTS = 101  # u-grid on which the alignment residual is defined
CONVERGENCE_GRID_POINTS = 1001  # u-grid for locating full finger closure
DEFAULT_SQUEEZE_MARGIN = 10.0  # mm a compliant finger closes past first contact
DEFAULT_APPROACH_STANDOFF = 20.0  # mm clearance kept between palm face and object top


class UnreachableTargetError(PalmgripError):
    """A calibration target bend lies outside a finger's reachable range."""

    def __init__(self, finger_index: int, message: str):
        super().__init__(f"finger {finger_index}: {message}")
        self.finger_index = finger_index


@dataclass(frozen=True)
class ResponseCurve:
    """Monotone piecewise-linear voltage (V) to bend (deg) map."""

    samples: tuple[tuple[float, float], ...]

    def __post_init__(self):
        errors = []
        if len(self.samples) < 2:
            errors.append("at least 2 samples required")
        else:
            volts = [v for v, _ in self.samples]
            bends = [b for _, b in self.samples]
            if any(not 0.0 <= v <= 5.0 for v in volts):
                errors.append("voltages must be within [0, 5]")
            if any(v1 <= v0 for v0, v1 in zip(volts, volts[1:])):
                errors.append("voltages must be strictly increasing")
            if any(b1 < b0 for b0, b1 in zip(bends, bends[1:])):
                errors.append("bends must be non-decreasing")
            if bends and bends[0] != 0.0:
                errors.append("bend at first sample must be 0")
            if bends and bends[-1] > 200.0:
                errors.append("max bend must be <= 200")
        if errors:
            raise ValidationError(errors)

    @property
    def max_bend(self) -> float:
        return self.samples[-1][1]

    @property
    def v_min(self) -> float:
        return self.samples[0][0]

    @property
    def v_max(self) -> float:
        return self.samples[-1][0]

    def bend_at(self, volts: float) -> float:
        """Interpolate the bend for a voltage; clamped to the sampled span."""
        pts = self.samples
        if volts <= pts[0][0]:
            return pts[0][1]
        if volts >= pts[-1][0]:
            return pts[-1][1]
        for (v0, b0), (v1, b1) in zip(pts, pts[1:]):
            if v0 <= volts <= v1:
                return b0 + (volts - v0) * (b1 - b0) / (v1 - v0)
        raise AssertionError("unreachable")

    def voltage_for(self, bend: float) -> float:
        """Lowest voltage producing the requested bend (flat segments tie
        toward the segment start, which makes the inverse deterministic)."""
        pts = self.samples
        if bend < pts[0][1] or bend > pts[-1][1]:
            raise ValueError(f"bend {bend} outside reachable range [{pts[0][1]}, {pts[-1][1]}]")
        for (v0, b0), (v1, b1) in zip(pts, pts[1:]):
            if b0 <= bend <= b1:
                if b1 == b0:
                    return v0
                return v0 + (bend - b0) * (v1 - v0) / (b1 - b0)
        raise AssertionError("unreachable")

    def to_dict(self, finger: int = 0) -> dict:
        return {"finger": finger, "samples": [[v, b] for v, b in self.samples]}

    @classmethod
    def from_dict(cls, data: dict) -> "ResponseCurve":
        return cls(samples=tuple((float(v), float(b)) for v, b in data["samples"]))


@dataclass(frozen=True)
class Calibration:
    """Per-finger voltage ranges aligning three curves onto one command."""

    ranges: tuple[tuple[float, float], tuple[float, float], tuple[float, float]]
    alignment_residual: float  # deg, max pairwise bend disagreement on the grid

    def __post_init__(self):
        errors = []
        for i, (lo, hi) in enumerate(self.ranges):
            if not (0.0 <= lo < hi <= 5.0):
                errors.append(f"range {i} must satisfy 0 <= lo < hi <= 5")
        if self.alignment_residual < 0:
            errors.append("alignment_residual must be >= 0")
        if errors:
            raise ValidationError(errors)

    def to_dict(self) -> dict:
        return {
            "ranges": [[lo, hi] for lo, hi in self.ranges],
            "alignment_residual": self.alignment_residual,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Calibration":
        return cls(
            ranges=tuple((float(lo), float(hi)) for lo, hi in data["ranges"]),
            alignment_residual=float(data["alignment_residual"]),
        )


def calibrate(
    curves: Sequence[ResponseCurve], target_bend_range: tuple[float, float]
) -> Calibration:
    """Solve per-finger voltage ranges so all three hit the target bends.

    The piecewise-linear inverse is exact at the endpoints; in between,
    curves with different shapes cannot be aligned by a shared linear
    command, and that disagreement is reported as the alignment residual
    (max spread over a fixed 101-point command grid) instead of hidden.
    """
    b_min, b_max = target_bend_range
    if len(curves) != 3:
        raise ValueError("exactly 3 response curves required")
    if not (b_min >= 0 and b_min < b_max):
        raise ValueError("target bend range must satisfy 0 <= b_min < b_max")
    ranges = []
    for i, curve in enumerate(curves):
        if b_max > curve.max_bend:
            raise UnreachableTargetError(
                i, f"target bend {b_max} exceeds max bend {curve.max_bend}"
            )
        ranges.append((curve.voltage_for(b_min), curve.voltage_for(b_max)))
    ranges_t = (ranges[0], ranges[1], ranges[2])

    residual = 0.0
    n = RESIDUAL_GRID_POINTS
    for k in range(n):
        u = k / (n - 1)
        bends = [
            curve.bend_at(lo + u * (hi - lo)) for curve, (lo, hi) in zip(curves, ranges_t)
        ]
        spread = max(bends) - min(bends)
        if spread > residual:
            residual = spread
    return Calibration(ranges=ranges_t, alignment_residual=residual)


def command_to_voltages(u: float, cal: Calibration) -> tuple[float, float, float]:
    """Map the single command u in [0, 1] to the three regulator voltages."""
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"command u must be in [0, 1], got {u}")
    return tuple(lo + u * (hi - lo) for lo, hi in cal.ranges)


def bend_angles(
    u: float, cal: Calibration, curves: Sequence[ResponseCurve]
) -> tuple[float, float, float]:
    volts = command_to_voltages(u, cal)
    return tuple(curve.bend_at(v) for curve, v in zip(curves, volts))


def fingertip_position(
    bend: float, cfg: GripperConfig, finger_type: FingerType
) -> tuple[float, float]:
    """Fingertip (radial, vertical) in mm for a total bend angle in degrees.

    The finger is a circular arc of length L mounted at the splay angle off
    the palm axis.  Coordinates are the gripper's cylindrical frame: radial
    distance from the palm axis, and signed height relative to the palm
    plane with the straight finger extending to negative height (away from
    the palm face).  Bending curls the tip toward the axis and back up.
    """
    if not 0.0 <= bend <= 200.0:
        raise ValueError(f"bend must be in [0, 200] deg, got {bend}")
    length = cfg.finger_length[finger_type]
    phi = math.radians(cfg.splay_angle)
    r0 = cfg.finger_mount_radius
    dir_r, dir_v = math.sin(phi), -math.cos(phi)  # straight finger direction
    nrm_r, nrm_v = -math.cos(phi), -math.sin(phi)  # toward the curl centre
    theta = math.radians(bend)
    if theta == 0.0:
        x_loc, y_loc = length, 0.0
    else:
        radius = length / theta
        x_loc = radius * math.sin(theta)
        y_loc = radius * (1.0 - math.cos(theta))
    radial = r0 + x_loc * dir_r + y_loc * nrm_r
    vertical = x_loc * dir_v + y_loc * nrm_v
    return radial, vertical


def aperture(
    u: float,
    cal: Calibration,
    curves: Sequence[ResponseCurve],
    cfg: GripperConfig,
    finger_type: FingerType,
) -> float:
    """Inscribed grasp diameter: twice the smallest fingertip radial
    coordinate at command u, floored at zero once fingers cross the axis."""
    bends = bend_angles(u, cal, curves)
    min_radial = min(fingertip_position(b, cfg, finger_type)[0] for b in bends)
    return max(0.0, 2.0 * min_radial)


def max_aperture(
    cal: Calibration,
    curves: Sequence[ResponseCurve],
    cfg: GripperConfig,
    finger_type: FingerType,
) -> float:
    return aperture(0.0, cal, curves, cfg, finger_type)


def convergence_height(
    cal: Calibration,
    curves: Sequence[ResponseCurve],
    cfg: GripperConfig,
    finger_type: FingerType,
) -> Optional[float]:
    """Standoff (mm) between the palm plane and the point where the
    fingertips meet on the axis, or None if the fingers never fully close.

    Objects shorter than this standoff sit entirely below the closure
    point, so fingers re-closing over them meet above the object instead of
    touching it.  Located on a fixed 1001-point command grid.
    """
    n = CONVERGENCE_GRID_POINTS
    for k in range(n):
        u = k / (n - 1)
        if aperture(u, cal, curves, cfg, finger_type) == 0.0:
            bends = bend_angles(u, cal, curves)
            verticals = [fingertip_position(b, cfg, finger_type)[1] for b in bends]
            return abs(max(verticals))
    return None


class FeasibilityReason(str, enum.Enum):
    OK = "ok"
    MASS_EXCEEDS_CAPACITY = "mass_exceeds_capacity"
    TOO_WIDE_FOR_APERTURE = "too_wide_for_aperture"
    TOO_TALL_FOR_REACH = "too_tall_for_reach"  # stability note, not a hard failure
    PINCH_REQUIRED = "pinch_required"  # cloth with moulded fingers


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    reason: FeasibilityReason
    grasp_u: Optional[float] = None


def grasp_feasible(
    obj: ObjectSpec,
    finger_type: FingerType,
    cal: Calibration,
    curves: Sequence[ResponseCurve],
    cfg: GripperConfig,
    squeeze_margin: float = DEFAULT_SQUEEZE_MARGIN,
    approach_standoff: float = DEFAULT_APPROACH_STANDOFF,
) -> FeasibilityReport:
    """Decide whether the object can be grasped at all, and at what command.

    Grasping needs (a) mass within the finger lifting capacity, (b) some
    command u at which the aperture has closed onto the object's width
    (compliance is credited with `squeeze_margin` mm of conformity), and
    (c) enough finger reach to grip at or below the centre of mass; a
    too-short reach is reported as a stability note, since the grasp still
    forms but can twist.  Cloth is special-cased: printed fingers grasp it
    directly, moulded fingers must pinch it off the surface first.
    """
    if obj.mass > cfg.mass_capacity:
        return FeasibilityReport(False, FeasibilityReason.MASS_EXCEEDS_CAPACITY)

    if obj.shape_class is ShapeClass.CLOTH:
        if finger_type is FingerType.MOULDED_OVAL:
            return FeasibilityReport(True, FeasibilityReason.PINCH_REQUIRED, grasp_u=1.0)
        return FeasibilityReport(True, FeasibilityReason.OK, grasp_u=1.0)

    width = obj.characteristic_width
    if width > max_aperture(cal, curves, cfg, finger_type):
        return FeasibilityReport(False, FeasibilityReason.TOO_WIDE_FOR_APERTURE)

    grasp_u = _solve_contact_command(
        width, squeeze_margin, cal, curves, cfg, finger_type
    )
    if grasp_u is None:
        return FeasibilityReport(False, FeasibilityReason.TOO_WIDE_FOR_APERTURE)

    length = cfg.finger_length[finger_type]
    reach_below_top = length * math.cos(math.radians(cfg.splay_angle)) - approach_standoff
    lowest_grip_height = obj.height - reach_below_top
    if lowest_grip_height > obj.height * obj.com_height_frac:
        return FeasibilityReport(True, FeasibilityReason.TOO_TALL_FOR_REACH, grasp_u=grasp_u)
    return FeasibilityReport(True, FeasibilityReason.OK, grasp_u=grasp_u)


def _solve_contact_command(
    width: float,
    squeeze_margin: float,
    cal: Calibration,
    curves: Sequence[ResponseCurve],
    cfg: GripperConfig,
    finger_type: FingerType,
) -> Optional[float]:
    """Bisect for the command whose aperture squeezes the object by half the
    margin; the aperture is continuous and non-increasing in u."""
    target = max(0.0, width - squeeze_margin / 2.0)
    ap = lambda u: aperture(u, cal, curves, cfg, finger_type)
    if ap(0.0) < target:
        return None
    if ap(1.0) > width:
        return None  # even full closure never reaches the object
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = (lo + hi) / 2.0
        if ap(mid) > target:
            lo = mid
        else:
            hi = mid
    u = hi
    return u if width - squeeze_margin <= ap(u) <= width else None


def load_curve_list(path: Path) -> list[ResponseCurve]:
    """Load a bare JSON array of {"finger": i, "samples": [[V, deg], ...]}
    entries, ordered by their finger index."""
    data = json.loads(Path(path).read_text())
    entries = sorted(data, key=lambda e: e.get("finger", 0))
    return [ResponseCurve.from_dict(entry) for entry in entries]


def save_curve_list(curves: Sequence[ResponseCurve], path: Path) -> None:
    Path(path).write_text(
        json.dumps([c.to_dict(finger=i) for i, c in enumerate(curves)], indent=2) + "\n"
    )


def load_curve_set(path: Optional[Path] = None) -> dict[FingerType, list[ResponseCurve]]:
    """Load the per-finger-type response curves from JSON.

    The bundled defaults are synthetic: no measured pressure-bend data
    exists for these fingers, so the moulded set gets three deliberately
    mismatched mildly cubic curves and the printed set one shared linear
    curve, as stand-ins with the right qualitative character.
    """
    data = json.loads((path or _DATA_DIR / "response_curves.json").read_text())
    out: dict[FingerType, list[ResponseCurve]] = {}
    for key, entries in data.items():
        if key == "provenance":
            continue
        ftype = FingerType(key)
        curves = [ResponseCurve.from_dict(entry) for entry in entries]
        if len(curves) == 1:
            curves = curves * 3  # one shared curve drives all three in parallel
        if len(curves) != 3:
            raise ValidationError([f"{key}: need 1 shared or 3 per-finger curves"])
        out[ftype] = curves
    for ftype in FingerType:
        if ftype not in out:
            raise ValidationError([f"missing curves for {ftype.value}"])
    return out


def save_calibration(cal: Calibration, path: Path) -> None:
    Path(path).write_text(json.dumps(cal.to_dict(), indent=2) + "\n")


def load_calibration(path: Path) -> Calibration:
    return Calibration.from_dict(json.loads(Path(path).read_text()))


DEFAULT_TARGET_BEND_RANGE: dict[FingerType, tuple[float, float]] = {
    FingerType.MOULDED_OVAL: (0.0, 170.0),
    FingerType.PRINTED: (0.0, 160.0),
}


def default_calibrations(
    curve_set: dict[FingerType, list[ResponseCurve]]
) -> dict[FingerType, Calibration]:
    return {
        ftype: calibrate(curve_set[ftype], DEFAULT_TARGET_BEND_RANGE[ftype])
        for ftype in curve_set
    }
