"""Piecewise-holonomic phase variable driven by a five-state machine.

States:

* S1 stance (thigh descending), S2 pushoff onset, S3 pre-swing,
* S4 swing, S5 backward-stance hold.

S1, S2 and S5 map the thigh angle linearly onto ``[0, c]``; S3 and S4 use
the swing map anchored at the thigh angle and phase latched on S2 -> S3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from enum import IntEnum
from typing import NamedTuple


class FsmState(IntEnum):
    S1 = 1
    S2 = 2
    S3 = 3
    S4 = 4
    S5 = 5


S1, S2, S3, S4, S5 = FsmState

# |q_h0 - q_hm| below this makes the swing map degenerate
DEGENERATE_SPAN_DEG = 1e-6
_TIME_EPS = 1e-9


@dataclass(frozen=True)
class PhaseConfig:
    q_h0_deg: float = 20.0
    q_hmin_deg: float = -11.0
    c: float = 0.53
    q_po_deg: float = -8.4
    q_h51_deg: float = -6.0
    q_h41_deg: float = 0.0
    vel_filter_cutoff_hz: float = 10.0
    fc_on_threshold: float = 0.2
    fc_off_threshold: float = 0.1
    contact_dwell_s: float = 0.010
    sample_rate_hz: float = 1000.0

    def __post_init__(self):
        for f in fields(self):
            if not math.isfinite(getattr(self, f.name)):
                raise ValueError(f"{f.name} must be finite")
        if not self.q_hmin_deg < self.q_po_deg < self.q_h51_deg < self.q_h0_deg:
            raise ValueError("config requires q_hmin < q_po < q_h51 < q_h0")
        if not 0.0 < self.c < 1.0:
            raise ValueError("c must lie in (0, 1)")
        if not self.fc_on_threshold > self.fc_off_threshold:
            raise ValueError("fc_on_threshold must exceed fc_off_threshold")
        if self.vel_filter_cutoff_hz <= 0 or self.sample_rate_hz <= 0:
            raise ValueError("filter cutoff and sample rate must be positive")
        if self.contact_dwell_s < 0:
            raise ValueError("contact_dwell_s must be non-negative")

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate_hz

    @classmethod
    def from_landmarks(cls, landmarks, **overrides) -> "PhaseConfig":
        """Config whose thigh constants come from reference-gait landmarks."""
        values = dict(
            q_h0_deg=landmarks.q_h0_deg,
            q_hmin_deg=landmarks.q_hmin_deg,
            c=landmarks.c,
            q_po_deg=landmarks.q_po_deg,
        )
        values.update(overrides)
        return cls(**values)


class SensorSample(NamedTuple):
    t: float
    q_h_deg: float
    fc: bool


@dataclass(frozen=True)
class PhaseEngineState:
    state: FsmState
    s: float
    s_m: float
    q_hm_deg: float
    s_prev: float
    qdot_h_est: float


def stance_phase(cfg: PhaseConfig, q_h_deg: float) -> float:
    """Shift-and-scale of the thigh angle, saturated to [0, 1]."""
    s = (cfg.q_h0_deg - q_h_deg) / (cfg.q_h0_deg - cfg.q_hmin_deg) * cfg.c
    return min(max(s, 0.0), 1.0)


def swing_phase(cfg: PhaseConfig, s_m: float, q_hm_deg: float, q_h_deg: float) -> float:
    """Swing map: equals ``s_m`` at ``q_hm_deg`` and 1 at ``q_h0``.

    A latched angle within 1e-6 deg of ``q_h0`` leaves no room to ramp, so
    the leg is treated as back at touchdown pose and 1 is returned.
    """
    span = cfg.q_h0_deg - q_hm_deg
    if abs(span) < DEGENERATE_SPAN_DEG:
        return 1.0
    s = 1.0 + (1.0 - s_m) / span * (q_h_deg - cfg.q_h0_deg)
    return min(max(s, 0.0), 1.0)


def estimate_thigh_rate(prev_est: float, q_h_now: float, q_h_prev: float, dt: float,
                        cfg: PhaseConfig) -> float:
    """Backward difference passed through a first-order low-pass at the config cutoff."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    tau = 1.0 / (2.0 * math.pi * cfg.vel_filter_cutoff_hz)
    alpha = dt / (tau + dt)
    return prev_est + alpha * ((q_h_now - q_h_prev) / dt - prev_est)


def contact_from_load(load: float, prev_contact: bool, cfg: PhaseConfig) -> bool:
    """Schmitt trigger on a load signal; between thresholds the previous value holds."""
    if load >= cfg.fc_on_threshold:
        return True
    if load <= cfg.fc_off_threshold:
        return False
    return prev_contact


class PhaseEngine:
    """Owns the state machine for one leg; ``update`` is called once per sample.

    ``update`` executes the same instructions for every valid sample: every
    candidate value is computed and the result picked by tuple indexing, and
    only preallocated slots are written.
    """

    __slots__ = (
        "cfg", "state", "s", "s_prev", "s_m", "q_hm", "qdot", "q_prev", "t_prev",
        "fc", "t_fc_agree", "primed", "resets",
        "_tau", "_span", "_dt0",
    )

    def __init__(self, cfg: PhaseConfig | None = None):
        self.cfg = cfg or PhaseConfig()
        self._tau = 1.0 / (2.0 * math.pi * self.cfg.vel_filter_cutoff_hz)
        self._span = self.cfg.q_h0_deg - self.cfg.q_hmin_deg
        self._dt0 = self.cfg.dt
        self.reset()

    def reset(self) -> PhaseEngineState:
        """Return to S1 with zero phase; call with the leg near vertical."""
        self.state = S1
        self.s = 0.0
        self.s_prev = 0.0
        # swing map falls back to the nominal reference until the first S2 -> S3
        self.s_m = self.cfg.c
        self.q_hm = self.cfg.q_hmin_deg
        self.qdot = 0.0
        self.q_prev = 0.0
        self.t_prev = 0.0
        self.fc = True
        self.t_fc_agree = 0.0
        self.primed = False
        self.resets = 0
        return self.snapshot()

    def snapshot(self) -> PhaseEngineState:
        return PhaseEngineState(
            state=self.state, s=self.s, s_m=self.s_m, q_hm_deg=self.q_hm,
            s_prev=self.s_prev, qdot_h_est=self.qdot,
        )

    def step(self, sample: SensorSample) -> float:
        return self.update(sample.t, sample.q_h_deg, sample.fc)

    def update(self, t: float, q_h: float, fc: bool) -> float:
        cfg = self.cfg
        primed = self.primed
        dt = (self._dt0, t - self.t_prev)[primed]
        if not dt > 0.0:
            raise ValueError(f"sample time {t} does not advance past {self.t_prev}")
        q_prev = (q_h, self.q_prev)[primed]
        qdot = self.qdot + dt / (self._tau + dt) * ((q_h - q_prev) / dt - self.qdot)

        # contact debounce: a raw change must persist for the dwell time
        raw = bool(fc)
        t_agree = (t, self.t_fc_agree)[primed & (raw != self.fc)]
        settled = (not primed) | (t - t_agree >= cfg.contact_dwell_s - _TIME_EPS)
        contact = (self.fc, raw)[settled]
        t_agree = (t_agree, t)[contact == raw]

        # guards applied lowest priority first so the highest-priority one wins
        st = self.state
        s_stance = min(max((cfg.q_h0_deg - q_h) / self._span * cfg.c, 0.0), 1.0)
        holding = (st == S1) | (st == S5)
        to_swing = (not contact) & ((st == S3) | (holding & (s_stance == 0.0)))
        nxt = st
        nxt = (nxt, S3)[(st == S2) & (qdot >= 0.0)]
        nxt = (nxt, S2)[(st == S1) & contact & (q_h <= cfg.q_po_deg)]
        nxt = (nxt, S1)[(st == S5) & (q_h < cfg.q_h51_deg)]
        nxt = (nxt, (S5, S1)[q_h >= cfg.q_h41_deg])[contact & (st == S4)]
        nxt = (nxt, S4)[to_swing]

        # latch on S2 -> S3 keeps s continuous; direct entry to swing uses nominal anchors
        enter_pre_swing = (st == S2) & (nxt == S3)
        direct_swing = (nxt == S4) & (st != S3) & (st != S4)
        s_m = ((self.s_m, cfg.c)[direct_swing], self.s)[enter_pre_swing]
        q_hm = ((self.q_hm, cfg.q_hmin_deg)[direct_swing], q_h)[enter_pre_swing]
        span = cfg.q_h0_deg - q_hm
        degenerate = abs(span) < DEGENERATE_SPAN_DEG
        ramp = 1.0 + (1.0 - s_m) / (span, 1.0)[degenerate] * (q_h - cfg.q_h0_deg)
        s_swing = (min(max(ramp, 0.0), 1.0), 1.0)[degenerate]
        s = (s_stance, s_swing, max(s_swing, self.s))[(nxt == S4) + 2 * (nxt == S3)]

        self.resets += (st == S4) & (nxt != S4)
        self.state = nxt
        self.s_prev = self.s
        self.s = s
        self.s_m = s_m
        self.q_hm = q_hm
        self.qdot = qdot
        self.q_prev = q_h
        self.t_prev = t
        self.fc = contact
        self.t_fc_agree = t_agree
        self.primed = True
        return s


def run_phase(samples, cfg: PhaseConfig | None = None):
    """Feed a sample stream through a fresh engine; returns ``(states, phases)`` lists."""
    engine = PhaseEngine(cfg)
    states, phases = [], []
    for smp in samples:
        phases.append(engine.step(smp))
        states.append(engine.state)
    return states, phases
