"""Command-line front end.

Exit codes: 0 success, 1 domain failure (fit failure, infeasible design,
too little data), 2 input error (bad file, bad argument).
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import PUBLISHED_MODEL, CalibrationModel, design_coupler, fit_table
from .circuits import BUILTIN_CIRCUITS, qkd_measure_batch
from .errors import FitFailure, InfeasibleDesign, InsufficientData, InvalidArgument, IqopError, ParseError
from .io import (
    SWEEP_COLUMNS,
    bundled_table_path,
    dumps,
    file_digest,
    load_circuit,
    load_json,
    manifest,
    parse_angle,
    parse_measurement_table,
    parse_state,
    parse_sweep,
    write_csv,
)
from .semiclassical import (
    GratingConfig,
    SweepRecord,
    displacement_grid,
    fit_sweep,
    fitted_curve,
    grating_phase,
    simulate_projection_test,
    sweep_probabilities,
)
from .states import RNG_ALGORITHM, detection_probabilities, sample_clicks
from .unitary import compose

DOMAIN_FAILURE = 1
INPUT_ERROR = 2


def _digest_inputs(*paths):
    return {str(p): file_digest(p) for p in paths if p is not None and Path(p).is_file()}


def _emit(args, text: str):
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _angle(text):
    try:
        return parse_angle(text)
    except InvalidArgument as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def cmd_fit(args):
    if args.table in (None, "table1"):
        path = bundled_table_path()
    else:
        path = Path(args.table)
    table = parse_measurement_table(path)
    model = fit_table(
        table,
        exclude=args.exclude_series,
        method=args.method,
        max_fold=args.max_fold,
        shared_delta=args.shared_delta,
    )
    m = manifest("fit", _digest_inputs(path), args.seed)
    fmt = args.format or "json"
    if fmt == "csv":
        rows = [(s.d_m, s.a_l, s.b_l, s.delta_l_c, s.residual, " ".join(map(str, s.folds))) for s in model.series]
        _emit(args, write_csv(("d_m_um", "a_l", "b_l", "delta_l_c_mm", "residual", "folds"), rows, m))
        return 0
    out = model.to_dict()
    out["provenance"] = {"input_digest": file_digest(path), "timestamp": m["timestamp"]}
    out["manifest"] = m
    _emit(args, dumps(out))
    return 0


def cmd_design(args):
    if args.model == "published":
        model, inputs = PUBLISHED_MODEL, {}
    else:
        data, _ = load_json(args.model)
        try:
            model = CalibrationModel.from_dict(data)
        except InvalidArgument as exc:
            raise ParseError(f"{args.model}: {exc}") from None
        inputs = _digest_inputs(args.model)
    design = design_coupler(model, args.theta, d_m=args.fix_dm, l_c=args.fix_lc, delta_l_c=args.delta_lc)
    m = manifest("design", inputs, args.seed)
    if (args.format or "json") == "csv":
        d = design.to_dict()
        _emit(args, write_csv(d.keys(), [d.values()], m))
    else:
        _emit(args, dumps({**design.to_dict(), "manifest": m}))
    return 0


def _load_layout(name):
    if name in BUILTIN_CIRCUITS:
        return BUILTIN_CIRCUITS[name](), {}
    return load_circuit(name), _digest_inputs(name)


def cmd_simulate(args):
    layout, inputs = _load_layout(args.circuit)
    state = parse_state(args.state, layout.dim)
    inputs.update(_digest_inputs(args.state))
    probs = detection_probabilities(state, compose(layout))
    fmt = args.format or "csv"
    if args.trials is None:
        m = manifest("simulate", inputs, None, circuit=args.circuit, state=args.state)
        if fmt == "csv":
            rows = [(k + 1, p) for k, p in enumerate(probs)]
            _emit(args, write_csv(("output_index", "probability"), rows, m))
        else:
            _emit(args, dumps({"probabilities": probs.tolist(), "manifest": m}))
        return 0
    clicks = sample_clicks(probs / probs.sum(), args.trials, args.seed)
    m = manifest("simulate", inputs, args.seed, circuit=args.circuit, state=args.state, rng=RNG_ALGORITHM)
    if fmt == "csv":
        _emit(args, write_csv(("output_index", "count", "trials", "seed"), clicks.csv_rows(), m))
    else:
        out = {
            "probabilities": probs.tolist(),
            "counts": list(clicks.counts),
            "trials": clicks.trials,
            "seed": clicks.seed,
            "manifest": m,
        }
        _emit(args, dumps(out))
    return 0


def _write_curve(path, fit, m):
    curve = fitted_curve(fit)
    Path(path).write_text(write_csv(("epsilon_deg", "epsilon_rad", "P1", "P2"), curve.tolist(), m), encoding="utf-8")


def _sweep_fit_output(args, fit, m):
    if args.emit_curve:
        _write_curve(args.emit_curve, fit, m)
    if (args.format or "json") == "csv":
        d = fit.to_dict()
        _emit(args, write_csv(d.keys(), [d.values()], m))
    else:
        _emit(args, dumps({**fit.to_dict(), "manifest": m}))


def cmd_sweep(args):
    g = GratingConfig(args.period)
    if args.fit:
        records = parse_sweep(args.fit)
        m = manifest("sweep", _digest_inputs(args.fit), args.seed)
        _sweep_fit_output(args, fit_sweep(records), m)
        return 0
    if args.theta is None:
        raise InvalidArgument("--theta is required unless --fit is given")
    dx = displacement_grid(args.dx_from, args.dx_to, args.dx_step)
    eps = grating_phase(dx, g)
    if args.trials is None:
        probs = sweep_probabilities(args.theta, eps, swap_outputs=args.swap_outputs)
        seed = None
    else:
        shots = simulate_projection_test(
            args.theta, dx, g, args.trials, args.seed, swap_outputs=args.swap_outputs
        )
        probs = np.array([s.clicks.frequencies for s in shots])
        seed = args.seed
    m = manifest("sweep", {}, seed, theta=args.theta, period=g.period, trials=args.trials)
    if args.emit_curve:
        fit = fit_sweep([SweepRecord(x, e, p[0], p[1]) for x, e, p in zip(dx, eps, probs)])
        _write_curve(args.emit_curve, fit, m)
    rows = [(x, e, p[0], p[1]) for x, e, p in zip(dx, eps, probs)]
    if (args.format or "csv") == "json":
        _emit(args, dumps({"rows": [dict(zip(SWEEP_COLUMNS, r)) for r in rows], "manifest": m}))
    else:
        _emit(args, write_csv(SWEEP_COLUMNS, rows, m))
    return 0


def cmd_qkd(args):
    state = parse_state(args.state, 4)
    batch = qkd_measure_batch(state, args.trials, args.seed)
    m = manifest(
        "qkd-sim", _digest_inputs(args.state), args.seed, state=args.state, rng=RNG_ALGORITHM,
        off_protocol=batch.off_protocol,
    )
    if (args.format or "csv") == "json":
        counts = batch.counts()
        out = {
            "trials": batch.trials,
            "counts": counts.tolist(),
            "frequencies": (counts / batch.trials).tolist(),
            "basis_frequencies": batch.basis_frequencies(),
            "off_protocol": batch.off_protocol,
            "manifest": m,
        }
        _emit(args, dumps(out))
    else:
        _emit(args, write_csv(("trial", "output", "basis", "label", "seed"), batch.csv_rows(), m))
    if batch.off_protocol:
        print("warning: input has amplitude outside guides 1 and 3", file=sys.stderr)
    return 0


def _seed(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=0, help="PRNG seed (unsigned 64-bit)")
    common.add_argument("--output", "-o", help="write to this file instead of stdout")
    common.add_argument("--format", choices=("csv", "json"), help="output format")

    parser = argparse.ArgumentParser(prog="iqop", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", parents=[common], help="fit calibration laws to a measurement table")
    p.add_argument("table", nargs="?", help="measurement CSV (default: bundled table1)")
    p.add_argument("--exclude-series", type=float, action="append", default=[], metavar="D_M")
    p.add_argument("--method", choices=("loglinear", "nonlinear"), default="loglinear")
    p.add_argument("--shared-delta", action="store_true", help="fit one delta_l_c shared by all series")
    p.add_argument("--max-fold", type=int, default=4)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("design", parents=[common], help="coupler geometry for a target coupling phase")
    p.add_argument("--model", default="published", help="calibration model JSON, or 'published'")
    p.add_argument("--theta", type=_angle, required=True)
    fix = p.add_mutually_exclusive_group(required=True)
    fix.add_argument("--fix-dm", type=float, metavar="UM")
    fix.add_argument("--fix-lc", type=float, metavar="MM")
    p.add_argument("--delta-lc", type=float, default=0.0, metavar="MM")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("simulate", parents=[common], help="detection probabilities or clicks behind a circuit")
    p.add_argument("--circuit", required=True, help=f"circuit JSON or one of {', '.join(BUILTIN_CIRCUITS)}")
    p.add_argument("--state", required=True, help="mode:<j>, <X|Y>:<D|A|L|R>@(j,j') or a state JSON file")
    p.add_argument("--trials", type=_positive_int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", parents=[common], help="grating sweep of a coupler, or fit a measured sweep")
    p.add_argument("--theta", type=_angle)
    p.add_argument("--dx-from", type=float, default=0.0, metavar="UM")
    p.add_argument("--dx-to", type=float, default=30.0, metavar="UM")
    p.add_argument("--dx-step", type=float, default=1.0, metavar="UM")
    p.add_argument("--period", type=float, default=60.0, metavar="UM")
    p.add_argument("--trials", type=_positive_int)
    p.add_argument("--swap-outputs", action="store_true")
    p.add_argument("--fit", metavar="CSV", help="fit a sweep file instead of generating one")
    p.add_argument("--emit-curve", metavar="PATH", help="write the fitted curve at 1 degree steps")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("qkd-sim", parents=[common], help="random-basis projector measurements")
    p.add_argument("--state", required=True)
    p.add_argument("--trials", type=_positive_int, default=1000)
    p.set_defaults(func=cmd_qkd)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FitFailure, InfeasibleDesign, InsufficientData) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DOMAIN_FAILURE
    except (IqopError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INPUT_ERROR
