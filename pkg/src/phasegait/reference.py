"""Reference gait trajectories, landmark extraction and Fourier virtual constraints.

Angles are in degrees everywhere. Normalized time ``t_norm`` runs over one
stride, ``[0, 1)``, starting at heel strike.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

CSV_HEADER = ("t_norm", "thigh_deg", "knee_deg", "ankle_deg")
LANDMARK_KEYS = ("q_h0_deg", "q_hmin_deg", "c", "q_po_deg", "t_min_thigh", "t_max_thigh_swing")

MIN_SAMPLES = 8
SPACING_TOL = 1e-9


class GaitDataError(ValueError):
    """Raised for malformed or physically implausible gait data."""


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


def _check_count(n: int) -> None:
    if n < MIN_SAMPLES:
        raise GaitDataError(f"at least {MIN_SAMPLES} samples required, got {n}")
    if n % 2:
        raise GaitDataError(f"sample count must be even, got {n}")


@dataclass(frozen=True)
class ReferenceGait:
    """One stride of thigh, knee and ankle angles on a uniform normalized-time grid."""

    t_norm: np.ndarray
    thigh_deg: np.ndarray
    knee_deg: np.ndarray
    ankle_deg: np.ndarray
    label: str = "reference"

    def __post_init__(self):
        for name in ("t_norm", "thigh_deg", "knee_deg", "ankle_deg"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        n = len(self.t_norm)
        if not (len(self.thigh_deg) == len(self.knee_deg) == len(self.ankle_deg) == n):
            raise GaitDataError("column lengths differ")
        _check_count(n)
        if not np.all(np.isfinite(np.stack([self.thigh_deg, self.knee_deg, self.ankle_deg]))):
            raise GaitDataError("non-finite angle in reference")
        if self.t_norm[0] != 0.0:
            raise GaitDataError("first sample must be at t_norm = 0")
        if np.any(np.diff(self.t_norm) <= 0):
            raise GaitDataError("t_norm must be strictly increasing")
        if np.max(np.abs(self.t_norm - np.arange(n) / n)) > SPACING_TOL:
            raise GaitDataError("non-uniform spacing in t_norm")

    @property
    def n(self) -> int:
        return len(self.t_norm)


@dataclass(frozen=True)
class GaitLandmarks:
    q_h0_deg: float
    q_hmin_deg: float
    c: float
    q_po_deg: float
    t_min_thigh: float
    t_max_thigh_swing: float

    def __post_init__(self):
        if not self.q_hmin_deg < self.q_po_deg < self.q_h0_deg:
            raise GaitDataError(
                "landmarks require q_hmin < q_po < q_h0, got "
                f"{self.q_hmin_deg}, {self.q_po_deg}, {self.q_h0_deg}"
            )
        if not 0.0 < self.c < 1.0:
            raise GaitDataError(f"c must lie in (0, 1), got {self.c}")
        if not 0.0 < self.t_min_thigh < self.t_max_thigh_swing <= 1.0:
            raise GaitDataError("landmarks require 0 < t_min_thigh < t_max_thigh_swing <= 1")

    def to_text(self) -> str:
        return "".join(f"{k}={getattr(self, k)!r}\n" for k in LANDMARK_KEYS)

    @classmethod
    def from_text(cls, text: str) -> "GaitLandmarks":
        values = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or key not in LANDMARK_KEYS:
                raise GaitDataError(f"line {lineno}: unexpected entry {line!r}")
            values[key] = float(value)
        missing = set(LANDMARK_KEYS) - set(values)
        if missing:
            raise GaitDataError(f"missing landmark keys: {sorted(missing)}")
        return cls(**values)


DEFAULT_LANDMARKS = GaitLandmarks(
    q_h0_deg=20.0,
    q_hmin_deg=-11.0,
    c=0.53,
    q_po_deg=-8.4,
    t_min_thigh=0.53,
    t_max_thigh_swing=0.87,
)


# --------------------------------------------------------------------------
# CSV I/O
# --------------------------------------------------------------------------

def load_reference(path, label: str | None = None) -> ReferenceGait:
    """Read a reference-gait CSV (``t_norm,thigh_deg,knee_deg,ankle_deg``)."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise GaitDataError(f"{path}: expected header {','.join(CSV_HEADER)}")
        rows = []
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != 4:
                raise GaitDataError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            try:
                rows.append([float(x) for x in row])
            except ValueError as exc:
                raise GaitDataError(f"{path}:{lineno}: {exc}") from None
    if len(rows) < MIN_SAMPLES:
        raise GaitDataError(f"at least {MIN_SAMPLES} samples required, got {len(rows)}")
    cols = np.array(rows).T
    return ReferenceGait(*cols, label=label or path.stem)


def save_reference(ref: ReferenceGait, path) -> None:
    with Path(path).open("w", newline="") as fh:
        fh.write(",".join(CSV_HEADER) + "\n")
        for row in zip(ref.t_norm, ref.thigh_deg, ref.knee_deg, ref.ankle_deg):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


# --------------------------------------------------------------------------
# Landmarks
# --------------------------------------------------------------------------

def extract_landmarks(ref: ReferenceGait) -> GaitLandmarks:
    """Derive the phase-variable tuning constants from a reference stride.

    The pushoff-onset angle is the thigh angle at the sample of maximum
    ankle angle (peak dorsiflexion before pushoff).
    """
    thigh = ref.thigh_deg
    i_min = int(np.argmin(thigh))
    if i_min == 0 or thigh[i_min] == thigh[0]:
        raise GaitDataError("non-gait-like reference: thigh has no descending segment")
    i_max = i_min + int(np.argmax(thigh[i_min:]))
    if i_max == i_min:
        raise GaitDataError("non-gait-like reference: thigh has no ascending segment")
    i_po = int(np.argmax(ref.ankle_deg))
    return GaitLandmarks(
        q_h0_deg=float(thigh[0]),
        q_hmin_deg=float(thigh[i_min]),
        c=float(ref.t_norm[i_min]),
        q_po_deg=float(thigh[i_po]),
        t_min_thigh=float(ref.t_norm[i_min]),
        t_max_thigh_swing=float(ref.t_norm[i_max]),
    )


# --------------------------------------------------------------------------
# Synthetic reference
# --------------------------------------------------------------------------

# Thigh shape knots as fractions of each monotone section.
# Descent: (fraction of [0, t_min], fraction of the q_h0 -> q_hmin drop).
_THIGH_DESCENT = ((0.189, 0.187), (0.377, 0.377), (0.566, 0.568), (0.755, 0.758),
                  (0.887, 0.903), (0.943, 0.981))
# Ascent: (fraction of [t_min, t_max], fraction of the q_hmin -> swing peak rise).
_THIGH_ASCENT = ((0.088, 0.005), (0.176, 0.079), (0.353, 0.238), (0.559, 0.406),
                 (0.765, 0.587), (0.912, 0.810))
# Knee flexion (t_norm, deg): loading-response bump, preswing flexion, swing peak.
_KNEE = ((0.0, 3.0), (0.12, 17.0), (0.40, 5.0), (0.56, 32.0), (0.71, 62.0),
         (0.88, 10.0), (0.94, 3.0))


def _periodic_pchip(t, v) -> PchipInterpolator:
    """Shape-preserving C1 interpolant on [0, 1] whose values and slopes wrap."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    tt = np.concatenate([t[:-1] - 1.0, t, t[1:] + 1.0])
    vv = np.concatenate([v[:-1], v, v[1:]])
    return PchipInterpolator(tt, vv)


def synthesize_reference(
    landmarks: GaitLandmarks = DEFAULT_LANDMARKS,
    n: int = 150,
    *,
    swing_overshoot_deg: float = 0.5,
    label: str = "synthetic",
) -> ReferenceGait:
    """Generate a smooth, periodic, walking-like stride that honours ``landmarks``.

    The thigh descends from ``q_h0`` at heel strike to ``q_hmin`` at
    ``t_min_thigh``, rises to ``q_h0 + swing_overshoot_deg`` at
    ``t_max_thigh_swing`` and retracts back to ``q_h0``. The ankle reaches
    its maximum where the thigh passes ``q_po``.
    """
    _check_count(n)
    lm = landmarks
    q0, qmin, tmin, tmax = lm.q_h0_deg, lm.q_hmin_deg, lm.t_min_thigh, lm.t_max_thigh_swing
    qmax = q0 + swing_overshoot_deg
    if swing_overshoot_deg <= 0:
        raise GaitDataError("swing_overshoot_deg must be positive")
    if tmax >= 1.0:
        raise GaitDataError("synthetic reference needs t_max_thigh_swing < 1")

    tk = [0.0]
    vk = [q0]
    for ft, fv in _THIGH_DESCENT:
        tk.append(ft * tmin)
        vk.append(q0 - fv * (q0 - qmin))
    tk.append(tmin)
    vk.append(qmin)
    for ft, fv in _THIGH_ASCENT:
        tk.append(tmin + ft * (tmax - tmin))
        vk.append(qmin + fv * (qmax - qmin))
    tk.append(tmax)
    vk.append(qmax)
    tk.append(1.0)
    vk.append(q0)
    thigh = _periodic_pchip(tk, vk)

    # Ankle peak placed where the descending thigh crosses q_po; symmetric
    # shoulders keep the sampled argmax on the nearest grid point.
    t_po = brentq(lambda t: float(thigh(t)) - lm.q_po_deg, 0.0, tmin)
    toe_off = min(tmin + 0.09, 0.5 * (tmin + tmax))
    w = 0.25 * min(t_po - 0.08, toe_off - t_po)
    ankle = _periodic_pchip(
        [0.0, 0.08, t_po - w, t_po, t_po + w, toe_off, toe_off + 0.12, 0.9, 1.0],
        [-2.0, -6.0, 8.5, 10.0, 8.5, -20.0, 0.0, 0.5, -2.0],
    )
    kt, kv = zip(*_KNEE)
    knee = _periodic_pchip(list(kt) + [1.0], list(kv) + [kv[0]])

    t = np.arange(n) / n
    return ReferenceGait(t, thigh(t), knee(t), ankle(t), label=label)


# --------------------------------------------------------------------------
# Fourier virtual constraints
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FourierConstraint:
    """Trigonometric interpolant of one joint's reference over a stride.

    ``rho`` holds rho_0..rho_{N/2}; ``psi`` holds psi_1..psi_{N/2-1}.
    Harmonic k has angular frequency 2*pi*k in phase units.
    """

    rho: np.ndarray
    psi: np.ndarray
    n_samples: int
    _k: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "rho", _frozen(self.rho))
        object.__setattr__(self, "psi", _frozen(self.psi))
        half = self.n_samples // 2
        _check_count(self.n_samples)
        if len(self.rho) != half + 1 or len(self.psi) != half - 1:
            raise GaitDataError("coefficient lengths do not match n_samples")
        object.__setattr__(self, "_k", _frozen(np.arange(1, half)))

    def __call__(self, s):
        return eval_constraint(self, s)

    @property
    def omega(self) -> np.ndarray:
        return 2.0 * np.pi * self._k

    def to_rows(self):
        """(k, rho_k, psi_k) rows; psi is zero for k = 0 and k = N/2."""
        half = self.n_samples // 2
        psi = np.concatenate([[0.0], self.psi, [0.0]])
        return [(k, float(self.rho[k]), float(psi[k])) for k in range(half + 1)]


def fit_fourier(values) -> FourierConstraint:
    """Fit the DFT coefficients of N evenly spaced samples (direct summation)."""
    x = np.asarray(values, dtype=float)
    if x.ndim != 1:
        raise GaitDataError("values must be one-dimensional")
    n = len(x)
    _check_count(n)
    k = np.arange(n // 2 + 1)
    j = np.arange(n)
    # exact integer reduction keeps the angles small for large k*j
    ang = 2.0 * np.pi * (np.outer(k, j) % n) / n
    rho = 2.0 / n * (np.cos(ang) @ x)
    psi = -2.0 / n * (np.sin(ang) @ x)
    return FourierConstraint(rho=rho, psi=psi[1:-1], n_samples=n)


def eval_constraint(fc: FourierConstraint, s):
    """Evaluate h(s) for a phase (or array of phases) in [0, 1]."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(~(s_arr >= 0.0)) or np.any(~(s_arr <= 1.0)):
        raise ValueError(f"phase outside [0, 1]: {s}")
    n = fc.n_samples
    if s_arr.ndim == 0:
        ang = fc.omega * float(s_arr)
        return float(
            0.5 * fc.rho[0]
            + 0.5 * fc.rho[-1] * math.cos(math.pi * n * float(s_arr))
            + fc.rho[1:-1] @ np.cos(ang)
            - fc.psi @ np.sin(ang)
        )
    ang = np.multiply.outer(s_arr, fc.omega)
    return (
        0.5 * fc.rho[0]
        + 0.5 * fc.rho[-1] * np.cos(np.pi * n * s_arr)
        + np.cos(ang) @ fc.rho[1:-1]
        - np.sin(ang) @ fc.psi
    )


def save_constraint(fc: FourierConstraint, path) -> None:
    with Path(path).open("w", newline="") as fh:
        fh.write("k,rho_k,psi_k\n")
        for k, rho, psi in fc.to_rows():
            fh.write(f"{k},{rho!r},{psi!r}\n")


def load_constraint(path) -> FourierConstraint:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["k", "rho_k", "psi_k"]:
            raise GaitDataError(f"{path}: expected header k,rho_k,psi_k")
        rows = [r for r in reader if r]
    try:
        ks = [int(r[0]) for r in rows]
        rho = [float(r[1]) for r in rows]
        psi = [float(r[2]) for r in rows]
    except (ValueError, IndexError) as exc:
        raise GaitDataError(f"{path}: {exc}") from None
    if ks != list(range(len(rows))):
        raise GaitDataError(f"{path}: k column must count 0..N/2")
    return FourierConstraint(rho=rho, psi=psi[1:-1], n_samples=2 * (len(rows) - 1))
