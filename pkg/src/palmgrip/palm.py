"""Servo-driven palm: trapezoidal rotation profiles, vacuum, and slip.

The palm executes angle moves with a trapezoidal speed profile (triangular
when the distance is too short to reach peak speed).  While an object rests
on the palm, its yaw tracks the palm unless the torque required to follow
the profile exceeds what the suction cup plus palm friction can supply; the
excess integrates into a yaw lag.  All outcomes are closed-form and
bit-deterministic; the sampled trajectory exists for telemetry and checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional

from .core import GripperConfig, ObjectSpec, PalmgripError, ValidationError

GRAVITY = 9.81  # m/s^2
DEFAULT_ACCEL = 4000.0  # deg/s^2
DEFAULT_FRICTION_COEFF = 0.8  # palm-object, rubber cup on typical surfaces
DEFAULT_CUP_EFFECTIVE_RADIUS = 12.0  # mm, torque lever of the suction seal
VALVE_LATENCY = 0.030  # s, vacuum valve switching time (telemetry realism only)
PROFILE_SAMPLE_HZ = 1000.0  # internal trajectory sampling rate


class RangeError(PalmgripError):
    """Commanded palm angle outside the servo range; no motion occurs."""


@dataclass(frozen=True)
class RotationCommand:
    target_angle: float  # deg, absolute, within the servo range
    peak_speed: float  # deg/s
    accel: float = DEFAULT_ACCEL  # deg/s^2

    def validate(self, cfg: GripperConfig) -> "RotationCommand":
        lo, hi = cfg.servo_range
        errors = []
        if not lo <= self.target_angle <= hi:
            errors.append(f"target_angle {self.target_angle} outside servo_range [{lo}, {hi}]")
        if not 0.0 < self.peak_speed <= cfg.max_palm_speed:
            errors.append(f"peak_speed must be in (0, {cfg.max_palm_speed}]")
        if not self.accel > 0:
            errors.append("accel must be > 0")
        if errors:
            raise RangeError("; ".join(errors))
        return self


@dataclass(frozen=True)
class SlipModel:
    """What resists object yaw slip on the palm.

    hold_torque is the suction cup's contribution (hold force times the
    cup's effective radius) and only acts while the vacuum is on; palm
    friction acts always.  Defaults are back-solved so a 62 g, 67 mm object
    survives a 180 deg spin at 600 deg/s with comfortable margin (see
    scripts/derive_slip_defaults.py for the derivation).
    """

    hold_torque: float  # N*mm, vacuum contribution
    friction_coeff: float = DEFAULT_FRICTION_COEFF
    cup_effective_radius: float = DEFAULT_CUP_EFFECTIVE_RADIUS  # mm

    def __post_init__(self):
        errors = []
        if not self.hold_torque > 0:
            errors.append("hold_torque must be > 0")
        if not self.friction_coeff > 0:
            errors.append("friction_coeff must be > 0")
        if not self.cup_effective_radius > 0:
            errors.append("cup_effective_radius must be > 0")
        if errors:
            raise ValidationError(errors)

    @classmethod
    def from_config(cls, cfg: GripperConfig) -> "SlipModel":
        return cls(hold_torque=cfg.vacuum_hold_force * DEFAULT_CUP_EFFECTIVE_RADIUS)


def yaw_inertia(obj: ObjectSpec) -> float:
    """Object yaw inertia in kg*mm^2, solid-cylinder approximation."""
    radius = obj.characteristic_width / 2.0
    return 0.5 * (obj.mass * 1e-3) * radius * radius


def required_torque(obj: ObjectSpec, accel: float, com_eccentricity: float = 0.0) -> float:
    """Torque (N*mm) needed for the object to follow the palm's acceleration
    phase: inertial term plus the gravity moment of an off-axis COM."""
    alpha = math.radians(accel)  # rad/s^2
    inertial = yaw_inertia(obj) * alpha / 1000.0  # kg*mm^2/s^2 -> N*mm
    gravity_moment = (obj.mass * 1e-3) * GRAVITY * com_eccentricity
    return inertial + gravity_moment


def available_torque(obj: ObjectSpec, slip: SlipModel, vacuum_on: bool) -> float:
    """Torque (N*mm) resisting slip: friction always, suction when on."""
    friction = slip.friction_coeff * (obj.mass * 1e-3) * GRAVITY * slip.cup_effective_radius
    return friction + (slip.hold_torque if vacuum_on else 0.0)


def torque_margin(
    obj: ObjectSpec, slip: SlipModel, vacuum_on: bool, accel: float = DEFAULT_ACCEL
) -> float:
    """available/required - 1; positive means headroom against slip."""
    return available_torque(obj, slip, vacuum_on) / required_torque(obj, accel) - 1.0


@dataclass(frozen=True)
class RotationProfile:
    """Closed-form trapezoidal (or triangular) move between two angles."""

    start_angle: float
    target_angle: float
    peak_speed: float  # deg/s, commanded
    accel: float  # deg/s^2

    @property
    def distance(self) -> float:
        return abs(self.target_angle - self.start_angle)

    @property
    def direction(self) -> float:
        return 1.0 if self.target_angle >= self.start_angle else -1.0

    @property
    def achieved_peak(self) -> float:
        """Peak speed actually reached; short moves cap it (triangle)."""
        return min(self.peak_speed, math.sqrt(self.accel * self.distance))

    @property
    def duration(self) -> float:
        d, s, a = self.distance, self.peak_speed, self.accel
        if d == 0.0:
            return 0.0
        if d >= s * s / a:
            return s / a + d / s  # trapezoid
        return 2.0 * math.sqrt(d / a)  # triangle

    def phase_times(self) -> tuple[float, float, float]:
        """(end of accel, end of cruise, end of move), in seconds."""
        d, a = self.distance, self.accel
        s = self.achieved_peak
        if d == 0.0:
            return 0.0, 0.0, 0.0
        t_acc = s / a
        t_cruise = max(0.0, (d - s * s / a) / s)
        return t_acc, t_acc + t_cruise, 2.0 * t_acc + t_cruise

    def speed_at(self, t: float) -> float:
        """Unsigned speed in deg/s at time t."""
        t1, t2, t3 = self.phase_times()
        s = self.achieved_peak
        if t <= 0.0 or t >= t3:
            return 0.0
        if t < t1:
            return self.accel * t
        if t < t2:
            return s
        return self.accel * (t3 - t)

    def angle_at(self, t: float) -> float:
        """Palm angle in deg at time t."""
        t1, t2, t3 = self.phase_times()
        s, a = self.achieved_peak, self.accel
        if t <= 0.0:
            return self.start_angle
        if t >= t3:
            return self.target_angle
        if t < t1:
            travelled = 0.5 * a * t * t
        elif t < t2:
            travelled = 0.5 * a * t1 * t1 + s * (t - t1)
        else:
            remaining = t3 - t
            travelled = self.distance - 0.5 * a * remaining * remaining
        return self.start_angle + self.direction * travelled

    def samples(self, rate_hz: float = PROFILE_SAMPLE_HZ) -> Iterator[tuple[float, float, float]]:
        """(t, angle, signed velocity) at the given rate, endpoint included."""
        t3 = self.duration
        n = int(math.ceil(t3 * rate_hz))
        for k in range(n + 1):
            t = min(k / rate_hz, t3)
            yield t, self.angle_at(t), self.direction * self.speed_at(t)


@dataclass(frozen=True)
class RotationOutcome:
    final_angle: float  # deg, palm
    duration: float  # s
    slipped: bool
    slip_angle_error: float  # deg the object yaw lags the palm
    object_yaw_change: float  # deg


def rotate_to(
    cmd: RotationCommand,
    current_angle: float,
    cfg: GripperConfig,
    obj_on_palm: Optional[ObjectSpec] = None,
    slip: Optional[SlipModel] = None,
    vacuum_on: bool = False,
    draped: bool = False,
    com_eccentricity: float = 0.0,
) -> RotationOutcome:
    """Execute one palm move and report whether the object followed.

    A draped cloth is wedged over/between the fingers, so the palm turns
    underneath it: slipped with zero yaw change, regardless of suction.
    Otherwise the object follows unless the profile's acceleration demands
    more torque than friction plus suction supply; the shortfall integrates
    into the reported yaw lag (no re-stick credit, which is conservative).
    """
    cmd.validate(cfg)
    profile = RotationProfile(
        start_angle=current_angle,
        target_angle=cmd.target_angle,
        peak_speed=cmd.peak_speed,
        accel=cmd.accel,
    )
    duration = profile.duration
    palm_delta = cmd.target_angle - current_angle

    if obj_on_palm is None:
        return RotationOutcome(cmd.target_angle, duration, False, 0.0, 0.0)
    if draped:
        return RotationOutcome(cmd.target_angle, duration, True, abs(palm_delta), 0.0)

    if slip is None:
        slip = SlipModel.from_config(cfg)
    tau_req = required_torque(obj_on_palm, cmd.accel, com_eccentricity)
    tau_avail = available_torque(obj_on_palm, slip, vacuum_on)
    if tau_req <= tau_avail or profile.distance == 0.0:
        return RotationOutcome(cmd.target_angle, duration, False, 0.0, palm_delta)

    # Object acceleration is capped by available torque during both ramp
    # phases; the deficit angle accumulates over each ramp.
    inertia = yaw_inertia(obj_on_palm)
    alpha_avail = math.degrees(tau_avail * 1000.0 / inertia) if inertia > 0 else cmd.accel
    t_acc = profile.achieved_peak / cmd.accel
    deficit_per_ramp = 0.5 * (cmd.accel - alpha_avail) * t_acc * t_acc
    lag = min(2.0 * deficit_per_ramp, abs(palm_delta))
    yaw_change = palm_delta - math.copysign(lag, palm_delta)
    return RotationOutcome(cmd.target_angle, duration, True, lag, yaw_change)


def max_noslip_speed(
    obj: ObjectSpec,
    slip: SlipModel,
    vacuum_on: bool,
    cfg: GripperConfig,
    accel: float = DEFAULT_ACCEL,
    sweep_distance: float = 180.0,
) -> float:
    """Largest peak speed whose 180 deg move reports no slip.

    Slip is monotone in peak speed, so bisection is valid; 0 means even a
    crawl slips (the ramp itself overwhelms the hold torque).
    """
    lo_angle, hi_angle = -sweep_distance / 2.0, sweep_distance / 2.0

    def slips(speed: float) -> bool:
        cmd = RotationCommand(target_angle=hi_angle, peak_speed=speed, accel=accel)
        out = rotate_to(cmd, lo_angle, cfg, obj_on_palm=obj, slip=slip, vacuum_on=vacuum_on)
        return out.slipped

    ceiling = cfg.max_palm_speed
    if not slips(ceiling):
        return ceiling
    eps = 1e-6
    if slips(eps):
        return 0.0
    lo, hi = eps, ceiling
    for _ in range(60):
        mid = (lo + hi) / 2.0
        if slips(mid):
            hi = mid
        else:
            lo = mid
    return lo


def set_vacuum(on: bool, vacuum_on: bool, latency: float = VALVE_LATENCY) -> tuple[bool, float]:
    """Toggle the vacuum valve; returns (new state, settle latency in s).

    Idempotent: re-asserting the current state costs no latency.
    """
    if on == vacuum_on:
        return vacuum_on, 0.0
    return on, latency
