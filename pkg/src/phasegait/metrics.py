"""Gait outcome measures: strides, correlation, symmetry, compensations, clearance."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

NORMALIZED_POINTS = 101


class MetricError(ValueError):
    """Input cannot support the requested measure."""


# --------------------------------------------------------------------------
# Aggregation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Aggregate:
    """n, mean and sample SD (n - 1 denominator; SD is 0 for a single value)."""

    n: int
    mean: float
    sd: float

    @classmethod
    def of(cls, values) -> "Aggregate":
        v = np.asarray(values, dtype=float)
        if v.size == 0:
            raise MetricError("cannot aggregate an empty set")
        sd = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
        return cls(int(v.size), float(np.mean(v)), sd)

    def cell(self, digits: int = 1) -> str:
        return format_mean_sd(self.mean, self.sd, digits)


def format_mean_sd(mean: float, sd: float, digits: int = 1) -> str:
    """Table cell such as ``16.1 (1.3)``."""
    return f"{mean:.{digits}f} ({sd:.{digits}f})"


# --------------------------------------------------------------------------
# Strides
# --------------------------------------------------------------------------

def debounce(fc, min_samples: int) -> np.ndarray:
    """Accept a contact change only after it has persisted ``min_samples`` samples."""
    raw = np.asarray(fc, dtype=bool)
    if min_samples <= 1 or raw.size == 0:
        return raw.copy()
    out = np.empty_like(raw)
    state = bool(raw[0])
    run = 0
    for i, v in enumerate(raw.tolist()):
        run = run + 1 if v != state else 0
        if run >= min_samples:
            state = v
            run = 0
            # backdate the edge to where the new value began
            out[i - min_samples + 1:i + 1] = state
        out[i] = state
    return out


@dataclass(frozen=True)
class StrideSet:
    """Strides bounded by consecutive contact rising edges.

    ``starts[i]`` is the heel-strike sample, ``toe_offs[i]`` the first swing
    sample and ``stops[i]`` the next heel strike (exclusive).
    """

    starts: np.ndarray
    toe_offs: np.ndarray
    stops: np.ndarray

    def __len__(self) -> int:
        return len(self.starts)

    def slices(self):
        return [slice(int(a), int(b)) for a, b in zip(self.starts, self.stops)]

    def stance_slices(self):
        return [slice(int(a), int(b)) for a, b in zip(self.starts, self.toe_offs)]

    def swing_slices(self):
        return [slice(int(a), int(b)) for a, b in zip(self.toe_offs, self.stops)]

    def lengths(self) -> np.ndarray:
        return self.stops - self.starts

    def normalize(self, signal, n_points: int = NORMALIZED_POINTS) -> np.ndarray:
        """Resample each stride onto ``n_points`` evenly spaced normalized times."""
        x = np.asarray(signal, dtype=float)
        grid = np.linspace(0.0, 1.0, n_points)
        out = np.empty((len(self), n_points))
        for i, (a, b) in enumerate(zip(self.starts, self.stops)):
            seg = x[a:min(b + 1, len(x))]
            out[i] = np.interp(grid, np.linspace(0.0, 1.0, len(seg)), seg)
        return out

    def mean_sd_curve(self, signal, n_points: int = NORMALIZED_POINTS):
        norm = self.normalize(signal, n_points)
        sd = norm.std(axis=0, ddof=1) if len(self) > 1 else np.zeros(n_points)
        return norm.mean(axis=0), sd


def segment_strides(fc, debounce_samples: int = 0, closed_ends: bool = False) -> StrideSet:
    """Split a contact stream at heel strikes; partial leading and trailing data is dropped.

    With ``closed_ends`` a stream that opens in contact is taken to open at a
    heel strike, and one that closes in swing to close just before the next,
    which is how simulated walking streams are laid out.
    """
    c = np.asarray(fc, dtype=bool)
    if c.ndim != 1:
        raise MetricError("contact stream must be one-dimensional")
    if debounce_samples > 1:
        c = debounce(c, debounce_samples)
    rising = np.flatnonzero(c[1:] & ~c[:-1]) + 1
    if closed_ends and c.size:
        head = [0] if c[0] else []
        tail = [c.size] if not c[-1] else []
        rising = np.concatenate([head, rising, tail]).astype(int)
    if len(rising) < 2:
        raise MetricError("no complete stride: fewer than 2 contact rising edges")
    falling = np.flatnonzero(~c[1:] & c[:-1]) + 1
    starts = rising[:-1]
    stops = rising[1:]
    toe_offs = falling[np.searchsorted(falling, starts)]
    return StrideSet(starts, toe_offs, stops)


def mid_stance_indices(fc) -> np.ndarray:
    """Temporal midpoint of every complete stance interval."""
    c = np.asarray(fc, dtype=bool)
    rising = np.flatnonzero(c[1:] & ~c[:-1]) + 1
    falling = np.flatnonzero(~c[1:] & c[:-1]) + 1
    mids = []
    for r in rising:
        j = np.searchsorted(falling, r)
        if j < len(falling):
            mids.append((r + falling[j] - 1) // 2)
    return np.array(mids, dtype=int)


# --------------------------------------------------------------------------
# Correlation and symmetry
# --------------------------------------------------------------------------

def pearson(x, y) -> float:
    """Product-moment correlation; undefined (error) when either series is constant."""
    a = np.asarray(x, dtype=float)
    b = np.asarray(y, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise MetricError("pearson needs two equal-length series")
    if a.size < 2:
        raise MetricError("pearson needs at least 2 samples")
    da = a - a.mean()
    db = b - b.mean()
    saa = float(da @ da)
    sbb = float(db @ db)
    if saa == 0.0 or sbb == 0.0:
        raise MetricError("pearson undefined: zero variance")
    r = float(da @ db) / math.sqrt(saa * sbb)
    return min(1.0, max(-1.0, r))


def symmetry_index(v_prosth: float, v_sound: float) -> float:
    """|V_P - V_S| divided by their mean; 0 means perfect symmetry."""
    half_sum = 0.5 * (v_prosth + v_sound)
    if half_sum == 0.0 or not math.isfinite(half_sum):
        raise MetricError("symmetry index undefined: zero mean of the two sides")
    return abs(v_prosth - v_sound) / abs(half_sum)


# --------------------------------------------------------------------------
# Vaulting
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class VaultingResult:
    values: np.ndarray
    flagged: np.ndarray
    summary: Aggregate


def _runs(mask) -> list[tuple[int, int]]:
    m = np.asarray(mask, dtype=bool).astype(np.int8)
    edges = np.diff(np.concatenate([[0], m, [0]]))
    return list(zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)))


def _peak_at(angle: np.ndarray, i: int, lo: int, hi: int) -> float:
    """Parabolic vertex through the samples around ``i`` (kept inside [lo, hi))."""
    if i - 1 < lo or i + 1 >= hi:
        return float(angle[i])
    y0, y1, y2 = angle[i - 1], angle[i], angle[i + 1]
    den = y0 - 2.0 * y1 + y2
    if den >= 0.0:
        return float(y1)
    d = 0.5 * (y0 - y2) / den
    return float(y1 - 0.25 * (y0 - y2) * d)


def vaulting_angle(foot_angle, single_support, foot_rate=None, dt: float = 1.0) -> VaultingResult:
    """Peak global foot angle at zero angular velocity in each single-support interval.

    Intervals without a positive-to-negative rate crossing fall back to the
    interval maximum and are flagged.
    """
    ang = np.asarray(foot_angle, dtype=float)
    mask = np.asarray(single_support, dtype=bool)
    if ang.shape != mask.shape:
        raise MetricError("foot angle and support mask differ in length")
    rate = np.gradient(ang, dt) if foot_rate is None else np.asarray(foot_rate, dtype=float)
    runs = _runs(mask)
    if not runs:
        raise MetricError("no single-support interval in mask")
    values, flags = [], []
    for lo, hi in runs:
        r = rate[lo:hi]
        cross = np.flatnonzero((r[:-1] > 0.0) & (r[1:] <= 0.0)) + lo
        if len(cross) == 0:
            values.append(float(ang[lo:hi].max()))
            flags.append(True)
            continue
        peaks = []
        for i in cross:
            k = i if ang[i] >= ang[i + 1] else i + 1
            peaks.append(_peak_at(ang, int(k), lo, hi))
        values.append(max(peaks))
        flags.append(False)
    return VaultingResult(np.array(values), np.array(flags), Aggregate.of(values))


# --------------------------------------------------------------------------
# Circumduction, backward steps, clearance
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CircumductionResult:
    ranges_mm: np.ndarray
    summary: Aggregate
    si: float | None = None


def circumduction(lateral_per_stride, sound_per_stride=None) -> CircumductionResult:
    """Medio-lateral range (max - min) of the ankle marker per stride, in mm."""
    ranges = _lateral_ranges(lateral_per_stride)
    summary = Aggregate.of(ranges)
    si = None
    if sound_per_stride is not None:
        si = symmetry_index(summary.mean, Aggregate.of(_lateral_ranges(sound_per_stride)).mean)
    return CircumductionResult(ranges, summary, si)


def _lateral_ranges(per_stride) -> np.ndarray:
    if per_stride is None:
        raise MetricError("missing lateral channel")
    out = []
    for seg in per_stride:
        a = np.asarray(seg, dtype=float) if seg is not None else np.empty(0)
        if a.size == 0 or not np.all(np.isfinite(a)):
            raise MetricError("missing lateral channel")
        out.append(float(a.max() - a.min()))
    if not out:
        raise MetricError("missing lateral channel")
    return np.array(out)


def split_strides(series, strides: StrideSet):
    x = np.asarray(series, dtype=float)
    return [x[sl] for sl in strides.slices()]


@dataclass(frozen=True)
class StepResult:
    prosth_mm: np.ndarray
    sound_mm: np.ndarray
    prosth: Aggregate
    sound: Aggregate
    si: float


def backward_step_symmetry(prosth_events, sound_events) -> StepResult:
    """Step lengths from mid-stance ankle positions, as ``(t, x_mm)`` pairs per side.

    A side's step length is its mid-stance position measured from the other
    side's preceding mid-stance position, along the overall direction of travel.
    """
    p = [(float(t), float(x), "P") for t, x in prosth_events]
    s = [(float(t), float(x), "S") for t, x in sound_events]
    if not p or not s:
        raise MetricError("need at least one mid-stance event per side")
    if abs(len(p) - len(s)) > 1:
        raise MetricError(f"unmatched mid-stance events: {len(p)} prosthetic vs {len(s)} sound")
    events = sorted(p + s)
    travel = events[-1][1] - events[0][1]
    direction = 1.0 if travel >= 0 else -1.0
    lengths = {"P": [], "S": []}
    for (_, x0, side0), (_, x1, side1) in zip(events[:-1], events[1:]):
        if side0 != side1:
            lengths[side1].append((x1 - x0) * direction)
    if not lengths["P"] or not lengths["S"]:
        raise MetricError("events do not alternate between sides")
    pa, sa = Aggregate.of(lengths["P"]), Aggregate.of(lengths["S"])
    return StepResult(np.array(lengths["P"]), np.array(lengths["S"]), pa, sa,
                      symmetry_index(pa.mean, sa.mean))


@dataclass(frozen=True)
class ClearanceResult:
    max_height_m: float
    clearance_m: float

    @property
    def collision(self) -> bool:
        return self.clearance_m < 0.0


def toe_clearance(toe_z, obstacle_height_m: float, swing_mask=None) -> ClearanceResult:
    """Maximum toe height during swing and its margin over the obstacle."""
    z = np.asarray(toe_z, dtype=float)
    if swing_mask is not None:
        z = z[np.asarray(swing_mask, dtype=bool)]
    if z.size == 0:
        raise MetricError("no swing samples")
    top = float(z.max())
    return ClearanceResult(top, top - obstacle_height_m)


# --------------------------------------------------------------------------
# Reports
# --------------------------------------------------------------------------

@dataclass
class MetricReport:
    pearson: dict = field(default_factory=dict)
    si: dict = field(default_factory=dict)
    vaulting: Aggregate | None = None
    circumduction: Aggregate | None = None
    circumduction_si: float | None = None
    backward: StepResult | None = None
    max_toe_height_m: float | None = None
    clearance_m: float | None = None
    n_strides: int | None = None

    def rows(self):
        """``(metric, value)`` rows for the CSV report."""
        out = []
        if self.n_strides is not None:
            out.append(("n_strides", str(self.n_strides)))
        for k, v in self.pearson.items():
            out.append((f"pearson_{k}", f"{v:.6f}"))
        for k, v in self.si.items():
            out.append((f"si_{k}", f"{v:.6f}"))
        if self.vaulting is not None:
            out += _agg_rows("vaulting_deg", self.vaulting)
        if self.circumduction is not None:
            out += _agg_rows("circumduction_mm", self.circumduction)
        if self.circumduction_si is not None:
            out.append(("circumduction_si", f"{self.circumduction_si:.6f}"))
        if self.backward is not None:
            out += _agg_rows("step_prosth_mm", self.backward.prosth)
            out += _agg_rows("step_sound_mm", self.backward.sound)
            out.append(("step_si", f"{self.backward.si:.6f}"))
        if self.max_toe_height_m is not None:
            out.append(("max_toe_height_m", f"{self.max_toe_height_m:.6f}"))
        if self.clearance_m is not None:
            out.append(("toe_clearance_m", f"{self.clearance_m:.6f}"))
        return out

    def to_csv(self) -> str:
        return "metric,value\n" + "".join(f"{k},{v}\n" for k, v in self.rows())

    def to_text(self) -> str:
        """Flat summary laid out like the outcome tables."""
        blocks = []
        if self.backward is not None:
            b = self.backward
            blocks.append(render_table(
                ["Length (mm)", "SI"], ["P", "S"],
                [[b.prosth.cell(0), b.sound.cell(0)], [f"{b.si:.2f}", ""]],
            ))
        if self.pearson:
            blocks.append(render_table(["r"], list(self.pearson),
                                       [[f"{v:.2f}" for v in self.pearson.values()]]))
        if self.vaulting is not None:
            blocks.append(render_table(["Vaulting (deg)"], ["Mean (SD)"], [[self.vaulting.cell()]]))
        if self.circumduction is not None:
            si = "" if self.circumduction_si is None else f"{self.circumduction_si:.1f}"
            blocks.append(render_table(["Circumduction (mm)"], ["Mean (SD)", "SI"],
                                       [[self.circumduction.cell(), si]]))
        if self.max_toe_height_m is not None:
            line = f"max toe height: {self.max_toe_height_m:.3f} m"
            if self.clearance_m is not None:
                line += f", clearance: {self.clearance_m:.3f} m"
            blocks.append(line + "\n")
        return "\n".join(blocks)


def _agg_rows(name: str, agg: Aggregate):
    return [(f"{name}_n", str(agg.n)), (f"{name}_mean", f"{agg.mean:.6f}"),
            (f"{name}_sd", f"{agg.sd:.6f}")]


def render_table(row_labels, col_labels, cells) -> str:
    """Pipe-delimited text table; ``cells`` is indexed ``[row][col]``."""
    if len(cells) != len(row_labels) or any(len(r) != len(col_labels) for r in cells):
        raise ValueError("cell grid does not match labels")
    widths = [max(len(str(row_labels[i])) for i in range(len(row_labels)))] if row_labels else [0]
    for j, c in enumerate(col_labels):
        widths.append(max([len(str(c))] + [len(str(r[j])) for r in cells]))
    def line(first, rest):
        parts = [str(first).ljust(widths[0])] + [str(v).rjust(w) for v, w in zip(rest, widths[1:])]
        return "| " + " | ".join(parts) + " |"
    out = [line("", col_labels)]
    out += [line(lbl, row) for lbl, row in zip(row_labels, cells)]
    return "\n".join(out) + "\n"


def speed_table(title: str, columns, rows: dict, digits: int = 1) -> str:
    """Render Slow/Normal/Fast rows of Aggregates (or plain floats) under ``columns``."""
    labels = list(rows)
    cells = []
    for lbl in labels:
        cells.append([v.cell(digits) if isinstance(v, Aggregate) else f"{v:.{digits}f}"
                      for v in rows[lbl]])
    return f"{title}\n" + render_table(labels, list(columns), cells)
