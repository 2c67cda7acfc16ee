"""Assembled simulator rig: config, curves, calibrations and slip model."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .core import FingerType, GripperConfig, validate_config
from .fingers import (
    Calibration,
    ResponseCurve,
    aperture,
    bend_angles,
    convergence_height,
    default_calibrations,
    grasp_feasible,
    load_curve_set,
)
from .palm import SlipModel


@dataclass(frozen=True)
class Rig:
    """Everything needed to evaluate gripper geometry for one session.

    Geometry queries are pure in the rig's (immutable) fields, so the
    expensive ones are memoized per instance.
    """

    cfg: GripperConfig
    curve_set: dict[FingerType, list[ResponseCurve]]
    calibrations: dict[FingerType, Calibration]
    slip: SlipModel

    def __post_init__(self):
        object.__setattr__(self, "_feasibility_cache", {})
        object.__setattr__(self, "_convergence_cache", {})

    @classmethod
    def default(cls, cfg: Optional[GripperConfig] = None, curves_path: Optional[Path] = None) -> "Rig":
        cfg = validate_config(cfg or GripperConfig())
        curve_set = load_curve_set(curves_path)
        return cls(
            cfg=cfg,
            curve_set=curve_set,
            calibrations=default_calibrations(curve_set),
            slip=SlipModel.from_config(cfg),
        )

    def curves(self, ftype: FingerType) -> list[ResponseCurve]:
        return self.curve_set[ftype]

    def calibration(self, ftype: FingerType) -> Calibration:
        return self.calibrations[ftype]

    def bends(self, u: float, ftype: FingerType) -> tuple[float, float, float]:
        return bend_angles(u, self.calibrations[ftype], self.curve_set[ftype])

    def aperture(self, u: float, ftype: FingerType) -> float:
        return aperture(u, self.calibrations[ftype], self.curve_set[ftype], self.cfg, ftype)

    def convergence_height(self, ftype: FingerType) -> Optional[float]:
        if ftype not in self._convergence_cache:
            self._convergence_cache[ftype] = convergence_height(
                self.calibrations[ftype], self.curve_set[ftype], self.cfg, ftype
            )
        return self._convergence_cache[ftype]

    def feasibility(self, obj, ftype: FingerType):
        key = (obj, ftype)
        if key not in self._feasibility_cache:
            self._feasibility_cache[key] = grasp_feasible(
                obj, ftype, self.calibrations[ftype], self.curve_set[ftype], self.cfg
            )
        return self._feasibility_cache[key]
