"""Scenario streams, closed-loop runs against a kinematic plant, and toe kinematics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.signal import lfilter

from .control import (
    DEFAULT_ANKLE_GAINS,
    DEFAULT_DERIV_CUTOFF_HZ,
    DEFAULT_KNEE_GAINS,
    PdGains,
    filtered_derivative,
    pd_torque_array,
)
from .phase import FsmState, PhaseConfig, PhaseEngine
from .reference import (
    CSV_HEADER,
    FourierConstraint,
    GaitDataError,
    ReferenceGait,
    eval_constraint,
    fit_fourier,
    load_reference,
    synthesize_reference,
)

SCENARIO_KINDS = (
    "forward_walk", "backward_walk", "start_stop", "weight_shift", "kick",
    "obstacle_step", "replay",
)
STREAM_HEADER = ("t", "q_h_deg", "fc")
TRACE_HEADER = (
    "t", "q_h", "fc", "state", "s", "q_knee_cmd", "q_ankle_cmd", "q_knee_plant",
    "q_ankle_plant", "tau_knee", "tau_ankle", "toe_x", "toe_z",
)
DEFAULT_LINKS = (0.42, 0.43, 0.10)


@dataclass(frozen=True)
class Scenario:
    """Parameters of one synthetic task; equal fields and seed give equal streams.

    ``amplitude`` scales thigh excursions about the touchdown angle. Left as
    None it is 1 for every kind except backward walking, which picks a value
    that keeps touchdown below ``q_h41`` and the stance minimum above ``q_h51``.
    """

    kind: str = "forward_walk"
    cadence_hz: float = 1.0
    n_strides: int = 3
    seed: int = 0
    noise_deg: float = 0.0
    amplitude: float | None = None
    stance_fraction: float = 0.63
    replay_path: str | None = None
    hold_deg: float = 10.0
    dropout_s: float = 0.3
    obstacle_hip_deg: float = 12.0
    rest_s: float = 0.5

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}; expected one of {SCENARIO_KINDS}")
        if not (math.isfinite(self.cadence_hz) and self.cadence_hz > 0):
            raise ValueError("cadence_hz must be positive")
        if self.n_strides < 1:
            raise ValueError("n_strides must be at least 1")
        if not self.noise_deg >= 0:
            raise ValueError("noise_deg must be non-negative")
        if self.amplitude is not None and not self.amplitude > 0:
            raise ValueError("amplitude must be positive")
        if not 0.0 < self.stance_fraction < 1.0:
            raise ValueError("stance_fraction must lie in (0, 1)")
        if self.kind == "replay" and not self.replay_path:
            raise ValueError("replay scenario needs replay_path")
        if self.dropout_s <= 0 or self.dropout_s >= 1.0 / self.cadence_hz:
            raise ValueError("dropout_s must be positive and shorter than one period")


@dataclass(frozen=True)
class SensorStream:
    t: np.ndarray
    q_h_deg: np.ndarray
    fc: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        q = np.asarray(self.q_h_deg, dtype=float)
        fc = np.asarray(self.fc, dtype=bool)
        if not (t.shape == q.shape == fc.shape) or t.ndim != 1:
            raise GaitDataError("stream columns must be equal-length vectors")
        if len(t) and not np.all(np.diff(t) > 0):
            raise GaitDataError("stream time must be strictly increasing")
        if not np.all(np.isfinite(q)):
            raise GaitDataError("thigh angle must be finite")
        for name, v in (("t", t), ("q_h_deg", q), ("fc", fc)):
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    def __len__(self) -> int:
        return len(self.t)


@dataclass(frozen=True)
class PlantModel:
    """Kinematic joint plant: exact tracking or a first-order lag per joint."""

    mode: str = "perfect_tracking"
    knee_time_constant_s: float = 0.03
    ankle_time_constant_s: float = 0.03

    def __post_init__(self):
        if self.mode not in ("perfect_tracking", "first_order_lag"):
            raise ValueError(f"unknown plant mode {self.mode!r}")
        if self.mode == "first_order_lag" and not (
            self.knee_time_constant_s > 0 and self.ankle_time_constant_s > 0
        ):
            raise ValueError("lag plant needs positive time constants")

    def respond(self, cmd, dt: float, time_constant_s: float) -> np.ndarray:
        """Plant angle after each sample, starting at rest on the first command."""
        cmd = np.asarray(cmd, dtype=float)
        if self.mode == "perfect_tracking" or len(cmd) == 0:
            return cmd.copy()
        a = 1.0 - math.exp(-dt / time_constant_s)
        y, _ = lfilter([a], [1.0, a - 1.0], cmd, zi=[(1.0 - a) * cmd[0]])
        return y


@dataclass(frozen=True)
class SimTrace:
    t: np.ndarray
    q_h: np.ndarray
    fc: np.ndarray
    state: np.ndarray
    s: np.ndarray
    q_knee_cmd: np.ndarray
    q_ankle_cmd: np.ndarray
    q_knee_plant: np.ndarray
    q_ankle_plant: np.ndarray
    tau_knee: np.ndarray
    tau_ankle: np.ndarray
    toe_x: np.ndarray
    toe_z: np.ndarray
    qdot_est: np.ndarray = field(default=None, compare=False)

    def __len__(self) -> int:
        return len(self.t)

    def columns(self):
        return [getattr(self, name) for name in TRACE_HEADER]


# --------------------------------------------------------------------------
# Scenario generation
# --------------------------------------------------------------------------

def _thigh_curve(ref: ReferenceGait) -> FourierConstraint:
    return fit_fourier(ref.thigh_deg)


def _walk(thigh: FourierConstraint, q0: float, amp: float, sc: Scenario, dt: float):
    n = int(round(sc.n_strides / sc.cadence_hz / dt))
    t = np.arange(n) * dt
    phi = np.mod(np.round(t * sc.cadence_hz, 12), 1.0)
    q = q0 + amp * (eval_constraint(thigh, phi) - q0)
    return t, q, phi < sc.stance_fraction


def backward_amplitude(ref: ReferenceGait, cfg: PhaseConfig, stance_fraction: float = 0.63) -> float:
    """Amplitude centred in the window where reversed gait cycles S4 <-> S5.

    Backward touchdown happens at the forward toe-off pose, which must sit
    below ``q_h41``; the reversed stance minimum must stay above ``q_h51``.
    """
    thigh = _thigh_curve(ref)
    q0 = float(ref.thigh_deg[0])
    q_touch = float(eval_constraint(thigh, stance_fraction))
    q_min = float(np.min(ref.thigh_deg))
    hi = (q0 - cfg.q_h51_deg) / (q0 - q_min)
    lo = (q0 - cfg.q_h41_deg) / (q0 - q_touch) if q_touch < q0 else 0.0
    if lo >= hi:
        return 0.98 * hi
    return 0.5 * (lo + hi)


def _rest(q: float, duration: float, dt: float):
    n = int(round(duration / dt))
    return np.full(n, q), np.ones(n, dtype=bool)


def generate_scenario(sc: Scenario, ref: ReferenceGait | None = None,
                      cfg: PhaseConfig | None = None) -> SensorStream:
    """Thigh angle and foot contact sampled at the config rate."""
    cfg = cfg or PhaseConfig()
    ref = ref if ref is not None else synthesize_reference()
    dt = cfg.dt
    rng = np.random.default_rng(sc.seed)

    if sc.kind == "replay":
        return _replay(sc, cfg, rng)

    thigh = _thigh_curve(ref)
    q0 = float(ref.thigh_deg[0])
    amp = sc.amplitude
    if amp is None:
        amp = backward_amplitude(ref, cfg, sc.stance_fraction) if sc.kind == "backward_walk" else 1.0

    if sc.kind == "forward_walk":
        _, q, fc = _walk(thigh, q0, amp, sc, dt)
    elif sc.kind == "backward_walk":
        _, q, fc = _walk(thigh, q0, amp, sc, dt)
        q, fc = q[::-1].copy(), fc[::-1].copy()
    elif sc.kind == "start_stop":
        q, fc = _start_stop(thigh, q0, amp, sc, dt)
    elif sc.kind == "weight_shift":
        q, fc = _weight_shift(sc, dt)
    elif sc.kind == "kick":
        q, fc = _kick(sc, dt)
    else:
        q, fc = _obstacle(thigh, q0, amp, sc, dt)

    if sc.noise_deg > 0:
        q = q + rng.uniform(-sc.noise_deg, sc.noise_deg, len(q))
    t = np.arange(len(q)) * dt
    return SensorStream(t, q, fc)


def stride_amplitudes(n: int, top: float = 1.0) -> np.ndarray:
    """Start-stop amplitudes: ramp up over the first half, ease down on the last stride."""
    ramp = max(1, n // 2)
    amps = np.array([top * min(1.0, 0.5 + 0.5 * (i + 1) / ramp) for i in range(n)])
    if n > 2:
        amps[-1] = 0.75 * top
    return amps


def _start_stop(thigh, q0, amp, sc: Scenario, dt: float):
    n_per = int(round(1.0 / sc.cadence_hz / dt))
    phi = np.arange(n_per) * dt * sc.cadence_hz
    shape = eval_constraint(thigh, phi) - q0
    fc_stride = phi < sc.stance_fraction
    q_rest, fc_rest = _rest(q0, sc.rest_s, dt)
    qs, fcs = [q_rest], [fc_rest]
    for a in stride_amplitudes(sc.n_strides, amp):
        qs.append(q0 + a * shape)
        fcs.append(fc_stride)
    qs.append(q_rest)
    fcs.append(fc_rest)
    return np.concatenate(qs), np.concatenate(fcs)


def _weight_shift(sc: Scenario, dt: float):
    period = 1.0 / sc.cadence_hz
    n = int(round(sc.n_strides * period / dt))
    t = np.arange(n) * dt
    local = np.mod(np.round(t, 12), period)
    start = 0.5 * (period - sc.dropout_s)
    dropout = (local >= start - 1e-12) & (local < start + sc.dropout_s - 1e-12)
    return np.full(n, sc.hold_deg), ~dropout


# Kick profile over one period (fraction of period, thigh deg): stand, rapid
# hip flexion, retraction, slight forward extension onto the ground, settle.
_KICK_KNOTS = ((0.0, 8.0), (0.25, 8.0), (0.40, 50.0), (0.58, 15.0), (0.70, 19.0),
               (0.90, 8.0), (1.0, 8.0))
_KICK_AIRBORNE = (0.25, 0.70)


def _kick(sc: Scenario, dt: float):
    period = 1.6 / sc.cadence_hz
    kt, kq = zip(*_KICK_KNOTS)
    curve = PchipInterpolator(np.array(kt) * period, kq)
    n_per = int(round(period / dt))
    tl = np.arange(n_per) * dt
    q = curve(tl)
    fc = ~((tl >= _KICK_AIRBORNE[0] * period) & (tl < _KICK_AIRBORNE[1] * period))
    return np.tile(q, sc.n_strides), np.tile(fc, sc.n_strides)


def _obstacle(thigh, q0, amp, sc: Scenario, dt: float):
    """Reference stance, then a swing that lifts the hip to the obstacle angle and holds it."""
    stance_T = sc.stance_fraction / sc.cadence_hz
    n_st = int(round(stance_T / dt))
    phi = np.arange(n_st) * dt * sc.cadence_hz
    q_st = q0 + amp * (eval_constraint(thigh, phi) - q0)
    q_end = float(q0 + amp * (eval_constraint(thigh, sc.stance_fraction) - q0))
    hip = sc.obstacle_hip_deg
    knots_t = np.array([0.0, 0.15, 0.25, 0.55, 0.75])
    knots_q = [q_end, hip - 1.0, hip, hip + 1.0, q0]
    swing = PchipInterpolator(knots_t, knots_q)
    n_sw = int(round(knots_t[-1] / dt))
    q_sw = swing(np.arange(n_sw) * dt)
    q = np.concatenate([q_st, q_sw])
    fc = np.concatenate([np.ones(n_st, dtype=bool), np.zeros(n_sw, dtype=bool)])
    return np.tile(q, sc.n_strides), np.tile(fc, sc.n_strides)


def _replay(sc: Scenario, cfg: PhaseConfig, rng) -> SensorStream:
    path = Path(sc.replay_path)
    if not path.is_file():
        raise GaitDataError(f"replay file not found: {path}")
    with path.open(newline="") as fh:
        header = next(csv.reader(fh), None)
    header = [h.strip() for h in header] if header else None
    if header == list(CSV_HEADER):
        ref = load_reference(path)
        return generate_scenario(
            Scenario(**{**sc.__dict__, "kind": "forward_walk", "replay_path": None}), ref, cfg
        )
    stream = load_stream(path)
    if len(stream) > 1 and not np.allclose(np.diff(stream.t), cfg.dt, rtol=0, atol=1e-6):
        raise GaitDataError(f"{path}: sample spacing does not match {cfg.sample_rate_hz} Hz")
    if sc.noise_deg > 0:
        q = stream.q_h_deg + rng.uniform(-sc.noise_deg, sc.noise_deg, len(stream))
        return SensorStream(stream.t, q, stream.fc)
    return stream


# --------------------------------------------------------------------------
# Stream and trace files
# --------------------------------------------------------------------------

def _parse_bool(text: str) -> bool:
    v = text.strip().lower()
    if v in ("1", "true"):
        return True
    if v in ("0", "false"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def save_stream(stream: SensorStream, path) -> None:
    with Path(path).open("w", newline="") as fh:
        fh.write(",".join(STREAM_HEADER) + "\n")
        for t, q, c in zip(stream.t.tolist(), stream.q_h_deg.tolist(), stream.fc.tolist()):
            fh.write(f"{t!r},{q!r},{int(c)}\n")


def load_stream(path) -> SensorStream:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = [h.strip() for h in next(reader, [])]
            if header[:3] != list(STREAM_HEADER):
                raise GaitDataError(f"{path}: expected header starting {','.join(STREAM_HEADER)}")
            t, q, fc = [], [], []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    t.append(float(row[0]))
                    q.append(float(row[1]))
                    fc.append(_parse_bool(row[2]))
                except (ValueError, IndexError) as exc:
                    raise GaitDataError(f"{path}:{lineno}: malformed row ({exc})") from None
    except OSError as exc:
        raise GaitDataError(f"cannot read {path}: {exc}") from None
    return SensorStream(np.array(t), np.array(q), np.array(fc, dtype=bool))


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def save_trace(trace: SimTrace, path) -> None:
    cols = trace.columns()
    with Path(path).open("w", newline="") as fh:
        fh.write(",".join(TRACE_HEADER) + "\n")
        rows = zip(*[c.tolist() for c in cols])
        for t, qh, fc, st, *rest in rows:
            fh.write(f"{_fmt(t)},{_fmt(qh)},{int(fc)},S{st}," + ",".join(map(_fmt, rest)) + "\n")


def load_trace(path) -> SimTrace:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = [h.strip() for h in next(reader, [])]
            missing = [h for h in TRACE_HEADER if h not in header]
            if missing:
                raise GaitDataError(f"{path}: trace is missing columns {missing}")
            idx = [header.index(h) for h in TRACE_HEADER]
            data = {h: [] for h in TRACE_HEADER}
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    for h, i in zip(TRACE_HEADER, idx):
                        cell = row[i]
                        if h == "fc":
                            data[h].append(_parse_bool(cell))
                        elif h == "state":
                            data[h].append(int(FsmState[cell.strip()]))
                        else:
                            data[h].append(float(cell))
                except (ValueError, IndexError, KeyError) as exc:
                    raise GaitDataError(f"{path}:{lineno}: malformed row ({exc})") from None
    except OSError as exc:
        raise GaitDataError(f"cannot read {path}: {exc}") from None
    arrays = {h: np.array(v, dtype=bool if h == "fc" else int if h == "state" else float)
              for h, v in data.items()}
    return SimTrace(**arrays)


# --------------------------------------------------------------------------
# Closed loop
# --------------------------------------------------------------------------

def run_phase_engine(stream: SensorStream, cfg: PhaseConfig):
    """States, phases and thigh-rate estimates for every sample of a stream."""
    engine = PhaseEngine(cfg)
    update = engine.update
    n = len(stream)
    states = np.empty(n, dtype=np.int8)
    s = np.empty(n)
    qdot = np.empty(n)
    for i, (t, q, c) in enumerate(zip(stream.t.tolist(), stream.q_h_deg.tolist(),
                                      stream.fc.tolist())):
        s[i] = update(t, q, c)
        states[i] = engine.state
        qdot[i] = engine.qdot
    return states, s, qdot


def run_closed_loop(
    stream: SensorStream,
    cfg: PhaseConfig,
    knee_fc: FourierConstraint,
    ankle_fc: FourierConstraint,
    knee_gains: PdGains = DEFAULT_KNEE_GAINS,
    ankle_gains: PdGains = DEFAULT_ANKLE_GAINS,
    plant: PlantModel | None = None,
    *,
    deriv_cutoff_hz: float = DEFAULT_DERIV_CUTOFF_HZ,
    links=DEFAULT_LINKS,
) -> SimTrace:
    """Phase engine, constraints, PD law and plant over a whole stream.

    The plant is kinematic, so commands depend only on the phase trajectory;
    the controller senses the plant angle reached at the end of each sample.
    Results match stepping :class:`~phasegait.control.JointController`
    sample by sample.
    """
    plant = plant or PlantModel()
    dt = cfg.dt
    states, s, qdot = run_phase_engine(stream, cfg)
    knee_cmd = np.asarray(eval_constraint(knee_fc, s), dtype=float).reshape(-1)
    ankle_cmd = np.asarray(eval_constraint(ankle_fc, s), dtype=float).reshape(-1)
    knee_plant = plant.respond(knee_cmd, dt, plant.knee_time_constant_s)
    ankle_plant = plant.respond(ankle_cmd, dt, plant.ankle_time_constant_s)

    def torque(cmd, plant_q, gains):
        e = cmd - plant_q
        return pd_torque_array(gains, e, filtered_derivative(e, dt, deriv_cutoff_hz))

    tau_knee = torque(knee_cmd, knee_plant, knee_gains)
    tau_ankle = torque(ankle_cmd, ankle_plant, ankle_gains)
    toe_x, toe_z = toe_trajectory(stream.q_h_deg, knee_plant, ankle_plant, links)
    return SimTrace(
        t=stream.t, q_h=stream.q_h_deg, fc=stream.fc, state=states, s=s,
        q_knee_cmd=knee_cmd, q_ankle_cmd=ankle_cmd, q_knee_plant=knee_plant,
        q_ankle_plant=ankle_plant, tau_knee=tau_knee, tau_ankle=tau_ankle,
        toe_x=toe_x, toe_z=toe_z, qdot_est=qdot,
    )


def toe_trajectory(q_h_deg, q_knee_deg, q_ankle_deg, links=DEFAULT_LINKS):
    """Sagittal toe position (x forward, z above ground) in metres.

    Thigh flexion, knee flexion and ankle dorsiflexion are positive, and the
    thigh, shank and foot segments are collinear when every angle is zero,
    which puts the hip a full leg length above the ground.
    """
    l1, l2, l3 = (float(v) for v in links)
    if not (l1 > 0 and l2 > 0 and l3 > 0):
        raise ValueError("link lengths must be positive")
    th = np.radians(np.asarray(q_h_deg, dtype=float))
    sh = th - np.radians(np.asarray(q_knee_deg, dtype=float))
    ft = sh + np.radians(np.asarray(q_ankle_deg, dtype=float))
    x = l1 * np.sin(th) + l2 * np.sin(sh) + l3 * np.sin(ft)
    z = (l1 + l2 + l3) - (l1 * np.cos(th) + l2 * np.cos(sh) + l3 * np.cos(ft))
    return x, z


def trace_toe(trace: SimTrace, links=DEFAULT_LINKS):
    return toe_trajectory(trace.q_h, trace.q_knee_plant, trace.q_ankle_plant, links)


def default_constraints(ref: ReferenceGait | None = None):
    """Knee and ankle constraints fitted to ``ref`` (the synthetic gait by default)."""
    ref = ref if ref is not None else synthesize_reference()
    return fit_fourier(ref.knee_deg), fit_fourier(ref.ankle_deg)


def simulate(sc: Scenario, ref: ReferenceGait | None = None, cfg: PhaseConfig | None = None,
             knee_gains: PdGains = DEFAULT_KNEE_GAINS, ankle_gains: PdGains = DEFAULT_ANKLE_GAINS,
             plant: PlantModel | None = None, constraints=None) -> SimTrace:
    """Generate a scenario and run it closed loop with constraints fitted to ``ref``."""
    cfg = cfg or PhaseConfig()
    ref = ref if ref is not None else synthesize_reference()
    knee_fc, ankle_fc = constraints if constraints is not None else default_constraints(ref)
    stream = generate_scenario(sc, ref, cfg)
    return run_closed_loop(stream, cfg, knee_fc, ankle_fc, knee_gains, ankle_gains, plant)
