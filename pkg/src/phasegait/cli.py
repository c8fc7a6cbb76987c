"""Command-line entry point: ``fit``, ``landmarks``, ``simulate`` and ``analyze``.

Exit status is 0 on success, 1 for usage errors and 2 for bad input data.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    ALL_KEYS,
    _INT_KEYS,
    _STR_KEYS,
    build_gains,
    build_phase_config,
    build_plant,
    build_scenario,
    load_config,
)
from .metrics import (
    Aggregate,
    MetricError,
    MetricReport,
    backward_step_symmetry,
    circumduction,
    mid_stance_indices,
    pearson,
    segment_strides,
    split_strides,
    symmetry_index,
    toe_clearance,
)
from .reference import (
    eval_constraint,
    extract_landmarks,
    fit_fourier,
    load_constraint,
    load_reference,
    save_constraint,
    save_reference,
    synthesize_reference,
    ReferenceGait,
)
from .sim import generate_scenario, load_trace, run_closed_loop, save_trace

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunManifest:
    command: str
    config_path: str | None
    input_paths: list
    output_dir: str
    seed: int | None
    tool_version: str = __version__
    argv: list = field(default_factory=list)
    outputs: dict = field(default_factory=dict)

    def write(self, out_dir: Path) -> Path:
        path = out_dir / "manifest.json"
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")
        return path


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _finish(manifest: RunManifest, out_dir: Path, outputs) -> None:
    manifest.outputs = {p.name: _sha256(p) for p in outputs}
    manifest.write(out_dir)


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _resample(ref: ReferenceGait, n: int) -> ReferenceGait:
    """Re-sample every joint of ``ref`` to ``n`` nodes through its trigonometric interpolant."""
    t = np.arange(n) / n
    cols = [eval_constraint(fit_fourier(v), t) for v in (ref.thigh_deg, ref.knee_deg, ref.ankle_deg)]
    return ReferenceGait(t, *cols, label=ref.label)


def _reference_arg(args) -> ReferenceGait:
    if args.reference:
        return load_reference(args.reference)
    return synthesize_reference(n=args.n or 150)


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------

def cmd_fit(args, argv) -> int:
    ref = _reference_arg(args)
    if args.n and args.n != ref.n:
        ref = _resample(ref, args.n)
    out = _out_dir(args.out)
    outputs = []
    for joint, values in (("knee", ref.knee_deg), ("ankle", ref.ankle_deg), ("thigh", ref.thigh_deg)):
        fc = fit_fourier(values)
        node_err = float(np.max(np.abs(eval_constraint(fc, ref.t_norm) - values)))
        if node_err >= 1e-9:
            raise ValueError(f"{joint} fit failed node check (max error {node_err:.3g} deg)")
        path = out / f"{joint}_constraint.csv"
        save_constraint(fc, path)
        outputs.append(path)
    if not args.reference:
        path = out / "reference.csv"
        save_reference(ref, path)
        outputs.append(path)
    _finish(RunManifest("fit", None, [args.reference] if args.reference else [], str(out), None,
                        argv=argv), out, outputs)
    print(f"fitted {ref.n}-sample constraints into {out}")
    return EXIT_OK


def cmd_landmarks(args, argv) -> int:
    ref = _reference_arg(args)
    text = extract_landmarks(ref).to_text()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _run_values(args) -> dict:
    values = load_config(args.config) if args.config else {}
    for key in ALL_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return values


def cmd_simulate(args, argv) -> int:
    values = _run_values(args)
    cfg = build_phase_config(values)
    knee_g, ankle_g = build_gains(values)
    plant = build_plant(values)
    sc = build_scenario(values)
    ref = load_reference(args.reference) if args.reference else synthesize_reference()
    if bool(args.knee_constraint) != bool(args.ankle_constraint):
        raise UsageError("--knee-constraint and --ankle-constraint go together")
    if args.knee_constraint:
        knee_fc, ankle_fc = load_constraint(args.knee_constraint), load_constraint(args.ankle_constraint)
    else:
        knee_fc, ankle_fc = fit_fourier(ref.knee_deg), fit_fourier(ref.ankle_deg)
    stream = generate_scenario(sc, ref, cfg)
    trace = run_closed_loop(stream, cfg, knee_fc, ankle_fc, knee_g, ankle_g, plant)
    out = _out_dir(args.out)
    path = out / "trace.csv"
    save_trace(trace, path)
    inputs = [p for p in (args.reference, args.knee_constraint, args.ankle_constraint,
                          sc.replay_path) if p]
    _finish(RunManifest("simulate", args.config, inputs, str(out), sc.seed, argv=argv),
            out, [path])
    print(f"wrote {len(trace)} samples to {path}")
    return EXIT_OK


def _load_markers(path):
    """Marker CSV ``t,x_mm,y_mm,z_mm`` -> (t, xyz) arrays."""
    from .reference import GaitDataError

    try:
        data = np.genfromtxt(path, delimiter=",", names=True, dtype=float)
    except (OSError, ValueError) as exc:
        raise GaitDataError(f"cannot read markers {path}: {exc}") from None
    names = data.dtype.names or ()
    if names[:1] != ("t",):
        raise GaitDataError(f"{path}: expected header t,x_mm,y_mm,z_mm")
    if "y_mm" not in names:
        raise MetricError(f"{path}: missing lateral channel y_mm")
    if "x_mm" not in names:
        raise GaitDataError(f"{path}: missing x_mm column")
    return np.atleast_1d(data["t"]), np.atleast_1d(data["x_mm"]), np.atleast_1d(data["y_mm"])


def _load_fc(path, n_expected: int):
    from .reference import GaitDataError

    if not path:
        raise MetricError("missing FC channel: pass --fc with marker input")
    try:
        data = np.genfromtxt(path, delimiter=",", names=True, dtype=float)
    except (OSError, ValueError) as exc:
        raise GaitDataError(f"cannot read FC channel {path}: {exc}") from None
    names = data.dtype.names or ()
    if "fc" not in names:
        raise MetricError(f"missing FC channel in {path}")
    fc = np.atleast_1d(data["fc"]) > 0.5
    if len(fc) != n_expected:
        raise GaitDataError(f"{path}: FC channel has {len(fc)} rows, markers have {n_expected}")
    return fc


def cmd_analyze(args, argv) -> int:
    report = MetricReport()
    inputs = []
    if not (args.trace or args.marker_prosth or args.step_lengths):
        raise UsageError("analyze needs --trace, --marker-prosth or --step-lengths")

    if args.step_lengths:
        vp, vs = args.step_lengths
        report.si["step_length"] = symmetry_index(vp, vs)

    if args.trace:
        inputs.append(args.trace)
        trace = load_trace(args.trace)
        strides = segment_strides(trace.fc, closed_ends=True)
        report.n_strides = len(strides)
        report.pearson["knee_tracking"] = pearson(trace.q_knee_cmd, trace.q_knee_plant)
        report.pearson["ankle_tracking"] = pearson(trace.q_ankle_cmd, trace.q_ankle_plant)
        if args.compare:
            inputs.append(args.compare)
            other = load_trace(args.compare)
            if len(other) != len(trace):
                raise MetricError("compared traces differ in length")
            report.pearson["knee_vs_compare"] = pearson(trace.q_knee_cmd, other.q_knee_cmd)
            report.pearson["ankle_vs_compare"] = pearson(trace.q_ankle_cmd, other.q_ankle_cmd)
        if args.reference:
            inputs.append(args.reference)
            ref = load_reference(args.reference)
            grid = np.linspace(0.0, 1.0, 101)
            for joint, cmd, refv in (("knee", trace.q_knee_cmd, ref.knee_deg),
                                     ("ankle", trace.q_ankle_cmd, ref.ankle_deg)):
                mean_curve = strides.normalize(cmd).mean(axis=0)
                ref_curve = eval_constraint(fit_fourier(refv), grid)
                report.pearson[f"{joint}_vs_reference"] = pearson(mean_curve, ref_curve)
        swing = ~trace.fc
        if swing.any():
            cl = toe_clearance(trace.toe_z, args.obstacle_height or 0.0, swing)
            report.max_toe_height_m = cl.max_height_m
            if args.obstacle_height is not None:
                report.clearance_m = cl.clearance_m

    if args.marker_prosth:
        inputs.append(args.marker_prosth)
        t, x, y = _load_markers(args.marker_prosth)
        fc = _load_fc(args.fc, len(t))
        strides = segment_strides(fc)
        report.n_strides = len(strides)
        sound_y = None
        if args.marker_sound:
            inputs.append(args.marker_sound)
            ts, xs, ys = _load_markers(args.marker_sound)
            fcs = _load_fc(args.fc_sound or args.fc, len(ts))
            sound_y = split_strides(ys, segment_strides(fcs))
            mids_p = mid_stance_indices(fc)
            mids_s = mid_stance_indices(fcs)
            report.backward = backward_step_symmetry(
                list(zip(t[mids_p], x[mids_p])), list(zip(ts[mids_s], xs[mids_s])))
        circ = circumduction(split_strides(y, strides), sound_y)
        report.circumduction = circ.summary
        report.circumduction_si = circ.si

    out = _out_dir(args.out)
    csv_path = out / "report.csv"
    txt_path = out / "report.txt"
    csv_path.write_text(report.to_csv())
    txt_path.write_text(report.to_text())
    _finish(RunManifest("analyze", None, inputs, str(out), None, argv=argv), out,
            [csv_path, txt_path])
    sys.stdout.write(report.to_csv())
    return EXIT_OK


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

def _even_count(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="phasegait", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"phasegait {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", help="fit knee/ankle/thigh Fourier constraints")
    f.add_argument("--reference", help="reference CSV (default: synthetic gait)")
    f.add_argument("--n", type=_even_count, help="number of nodes to fit")
    f.add_argument("--out", required=True, help="output directory")

    lm = sub.add_parser("landmarks", help="extract phase-engine landmarks from a reference")
    lm.add_argument("--reference", help="reference CSV (default: synthetic gait)")
    lm.add_argument("--n", type=_even_count, help="synthetic sample count")
    lm.add_argument("--out", help="landmark file (default: stdout)")

    s = sub.add_parser("simulate", help="run a scenario closed loop and write a trace")
    s.add_argument("--config", help="key=value config file; flags override it")
    s.add_argument("--reference", help="reference CSV (default: synthetic gait)")
    s.add_argument("--knee-constraint")
    s.add_argument("--ankle-constraint")
    s.add_argument("--out", required=True, help="output directory")
    for key in ALL_KEYS:
        kind = int if key in _INT_KEYS else str if key in _STR_KEYS else float
        names = [f"--{key}"] + ([f"--{key.replace('_', '-')}"] if "_" in key else [])
        if key == "kind":
            names.append("--scenario")
        s.add_argument(*names, dest=key, type=kind, default=None)

    a = sub.add_parser("analyze", help="compute gait metrics from a trace or marker files")
    a.add_argument("--trace", help="simulation trace CSV")
    a.add_argument("--compare", help="second trace to correlate commands against")
    a.add_argument("--reference", help="reference CSV for stride-mean correlation")
    a.add_argument("--obstacle-height", type=float, help="obstacle height in metres")
    a.add_argument("--marker-prosth", help="prosthetic ankle marker CSV t,x_mm,y_mm,z_mm")
    a.add_argument("--marker-sound", help="sound ankle marker CSV t,x_mm,y_mm,z_mm")
    a.add_argument("--fc", help="prosthetic-side contact CSV with an fc column")
    a.add_argument("--fc-sound", help="sound-side contact CSV (default: --fc)")
    a.add_argument("--step-lengths", nargs=2, type=float, metavar=("PROSTH", "SOUND"),
                   help="mean step lengths for a symmetry index")
    a.add_argument("--out", required=True, help="output directory")
    return p


_COMMANDS = {"fit": cmd_fit, "landmarks": cmd_landmarks, "simulate": cmd_simulate,
             "analyze": cmd_analyze}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args, argv)
    except UsageError as exc:
        print(f"phasegait: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"phasegait: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
