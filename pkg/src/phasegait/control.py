"""Virtual-constraint joint commands and saturated PD torques for knee and ankle."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.signal import lfilter

from .reference import FourierConstraint, eval_constraint

DEFAULT_DERIV_CUTOFF_HZ = 10.0


@dataclass(frozen=True)
class PdGains:
    """Gains per degree of error: kp in N*m/deg, kd in N*m*s/deg."""

    kp: float
    kd: float
    tau_max: float = 100.0

    def __post_init__(self):
        for name in ("kp", "kd", "tau_max"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v}")

    @classmethod
    def from_units(cls, kp: float, kd: float, tau_max: float, units: str = "deg") -> "PdGains":
        """Build gains declared per radian or per degree."""
        if units == "deg":
            return cls(kp, kd, tau_max)
        if units == "rad":
            per_deg = math.pi / 180.0
            return cls(kp * per_deg, kd * per_deg, tau_max)
        raise ValueError(f"units must be 'deg' or 'rad', got {units!r}")


DEFAULT_KNEE_GAINS = PdGains(kp=3.0, kd=0.05)
DEFAULT_ANKLE_GAINS = PdGains(kp=4.0, kd=0.05)


class JointCommand(NamedTuple):
    q_d_deg: float
    e_deg: float
    tau_nm: float


def desired_angles(knee_fc: FourierConstraint, ankle_fc: FourierConstraint, s):
    """Knee and ankle targets h(s); ``s`` may be a scalar or an array."""
    return eval_constraint(knee_fc, s), eval_constraint(ankle_fc, s)


def pd_torque(gains: PdGains, e_deg: float, edot_degps: float) -> float:
    tau = gains.kp * e_deg + gains.kd * edot_degps
    return min(max(tau, -gains.tau_max), gains.tau_max)


def pd_torque_array(gains: PdGains, e_deg, edot_degps) -> np.ndarray:
    tau = gains.kp * np.asarray(e_deg, dtype=float) + gains.kd * np.asarray(edot_degps, dtype=float)
    return np.clip(tau, -gains.tau_max, gains.tau_max)


def _alpha(dt: float, cutoff_hz: float) -> float:
    tau = 1.0 / (2.0 * math.pi * cutoff_hz)
    return dt / (tau + dt)


class DerivativeFilter:
    """Low-passed backward difference; the first sample primes the history."""

    __slots__ = ("alpha", "dt", "est", "prev", "primed")

    def __init__(self, dt: float, cutoff_hz: float = DEFAULT_DERIV_CUTOFF_HZ):
        if not dt > 0 or not cutoff_hz > 0:
            raise ValueError("dt and cutoff must be positive")
        self.dt = dt
        self.alpha = _alpha(dt, cutoff_hz)
        self.reset()

    def reset(self) -> None:
        self.est = 0.0
        self.prev = 0.0
        self.primed = False

    def update(self, x: float) -> float:
        prev = self.prev if self.primed else x
        self.est += self.alpha * ((x - prev) / self.dt - self.est)
        self.prev = x
        self.primed = True
        return self.est


def filtered_derivative(x, dt: float, cutoff_hz: float = DEFAULT_DERIV_CUTOFF_HZ) -> np.ndarray:
    """Batch form of :class:`DerivativeFilter` over a whole series."""
    x = np.asarray(x, dtype=float)
    if len(x) == 0:
        return x.copy()
    diff = np.empty_like(x)
    diff[0] = 0.0
    diff[1:] = np.diff(x) / dt
    a = _alpha(dt, cutoff_hz)
    return lfilter([a], [1.0, a - 1.0], diff)


class JointController:
    """Per-sample controller for both joints with one derivative filter each."""

    def __init__(self, knee_fc: FourierConstraint, ankle_fc: FourierConstraint,
                 knee_gains: PdGains = DEFAULT_KNEE_GAINS,
                 ankle_gains: PdGains = DEFAULT_ANKLE_GAINS,
                 dt: float = 1e-3, deriv_cutoff_hz: float = DEFAULT_DERIV_CUTOFF_HZ):
        self.knee_fc = knee_fc
        self.ankle_fc = ankle_fc
        self.knee_gains = knee_gains
        self.ankle_gains = ankle_gains
        self._knee_d = DerivativeFilter(dt, deriv_cutoff_hz)
        self._ankle_d = DerivativeFilter(dt, deriv_cutoff_hz)

    def reset(self) -> None:
        self._knee_d.reset()
        self._ankle_d.reset()

    def step(self, s: float, q_knee_deg: float, q_ankle_deg: float):
        qd_k, qd_a = desired_angles(self.knee_fc, self.ankle_fc, s)
        e_k = qd_k - q_knee_deg
        e_a = qd_a - q_ankle_deg
        tau_k = pd_torque(self.knee_gains, e_k, self._knee_d.update(e_k))
        tau_a = pd_torque(self.ankle_gains, e_a, self._ankle_d.update(e_a))
        return JointCommand(qd_k, e_k, tau_k), JointCommand(qd_a, e_a, tau_a)


def controller_step(controller: JointController, s: float, q_knee_deg: float,
                    q_ankle_deg: float):
    """Desired angles, errors and PD torques for one sample."""
    return controller.step(s, q_knee_deg, q_ankle_deg)
