"""Command-line front end.

Exit codes: 0 success, 1 analysis infeasibility or failed report section,
2 input error (missing file, malformed matrix, bad flag).
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import DegenerateLineError, corollary_bound, feasible_band, prop1_bound
from .closeness import ClosenessParams, Segment, check_closeness, fit_wedge, outlier_models
from .corrdata import (
    AccuracyPairSet,
    MatrixFormatError,
    MatrixValidationError,
    accuracies,
    align,
    align_matrices,
    load_matrix,
    save_matrix,
)
from .events import dominance_table, iter_point_blocks, points_to_csv, PointArray
from .gridbound import GridSearchConfig, InfeasibleRegionError, max_residual_grid
from .svgplot import Chart
from .synth import RNG_ALGORITHM, example1, example2, exact_matrix, planted_pair, sample_matrix
from .trends import DegenerateFitError, compare_fits, ols_fit, piecewise_fit, probit_fit

SCHEMA_VERSION = 1
EXIT_OK, EXIT_INFEASIBLE, EXIT_INPUT = 0, 1, 2

log = logging.getLogger("collinear")


class InputError(Exception):
    pass


# -- helpers --------------------------------------------------------------------


def _clean(obj):
    """Make an object JSON-safe: numpy scalars/arrays, tuples, non-finite floats."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def _envelope(command: str, body: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        **body,
        "metadata": {
            "tool_version": __version__,
            "generated_at": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "rng_algorithm": RNG_ALGORITHM,
        },
    }


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _write_json(path: Path, command: str, body: dict) -> dict:
    doc = _clean(_envelope(command, body))
    _write(path, json.dumps(doc, indent=2, allow_nan=False) + "\n")
    return doc


def _floats(text: str, n: int | None = None) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if n is not None and len(vals) != n:
        raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers, got {text!r}")
    return vals


def _three(text: str) -> list[float]:
    return _floats(text, 3)


def _wedge_args(p: argparse.ArgumentParser, required: bool = False) -> None:
    g = p.add_argument_group("wedge")
    for name in ("delta1", "delta2", "nu1", "nu2"):
        g.add_argument(f"--{name}", type=float, required=required)
    g.add_argument("--coverage", type=float, default=1.0)
    g.add_argument("--segment2", type=_three, metavar="T,DELTA2,NU2",
                   help="looser upper bound applied when P(A) < T")


def _wedge_from(args) -> ClosenessParams | None:
    vals = [getattr(args, n) for n in ("delta1", "delta2", "nu1", "nu2")]
    if all(v is None for v in vals):
        return None
    if any(v is None for v in vals):
        raise InputError("give all of --delta1 --delta2 --nu1 --nu2, or none")
    seg = Segment(*args.segment2) if args.segment2 else None
    try:
        return ClosenessParams(*vals, coverage=args.coverage, segment2=seg)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _load(path: str, label: str):
    if not os.path.exists(path):
        raise InputError(f"no such file: {path}")
    return load_matrix(path, label)


def _formats(args) -> set[str]:
    return {f.strip() for f in args.formats.split(",") if f.strip()}


def _emit_stdout(doc: dict) -> None:
    print(json.dumps(doc, indent=2))


# -- subcommands ----------------------------------------------------------------


def cmd_dominance(args) -> int:
    m = _load(args.matrix, "P")
    report = dominance_table(m, threshold=args.threshold)
    out = Path(args.out)
    fmts = _formats(args)
    _write_json(out / "dominance.json", "dominance", {"input": args.matrix, "dominance": report.to_dict()})
    if "csv" in fmts:
        rows = ["lo,hi,lo_name,hi_name,gap,dominance,similarity"]
        rows += [f"{e.lo},{e.hi},{e.lo_name},{e.hi_name},{e.gap!r},{e.dominance!r},{e.similarity!r}"
                 for e in report.entries]
        _write(out / "dominance.csv", "\n".join(rows) + "\n")
    if "svg" in fmts:
        chart = Chart("Dominance probabilities", "accuracy difference", "dominance probability")
        chart.scatter([e.gap for e in report.entries], [e.dominance for e in report.entries])
        _write(out / "dominance.svg", chart.render())
    print(f"pairs={len(report.entries)} zeta_max={report.zeta_max:.6g} "
          f"fraction_below_{report.threshold:g}={report.fraction_below:.4f}")
    return EXIT_OK


def _wedge_chart(points: PointArray, params: ClosenessParams, title: str) -> Chart:
    chart = Chart(title, "P(A)", "Q(A)")
    chart.scatter(points.p.tolist(), points.q.tolist(), radius=1.2)
    top = float(points.p.max()) if len(points) else 1.0
    xs = np.linspace(0, top, 101)
    chart.line(xs.tolist(), params.upper(xs).tolist(), dashed=True, label="upper")
    chart.line(xs.tolist(), params.lower(xs).tolist(), dashed=True, label="lower")
    chart.line([0, top], [0, top], color="#000000", label="identity")
    return chart


def cmd_closeness(args) -> int:
    mp, mq = align_matrices(_load(args.p, "P"), _load(args.q, "Q"))
    if mp.h < 3:
        raise InputError(f"closeness needs at least 3 shared models, got {mp.h}")
    points = PointArray.concat(iter_point_blocks(mp, mq))
    fitted = fit_wedge(points, coverage=args.coverage)
    body = {
        "models": list(mp.model_names),
        "n_points": len(points),
        "fitted_wedge": fitted.to_dict(),
        "fitted_report": check_closeness(points, fitted, mp.model_names).to_dict(),
    }
    given = _wedge_from(args)
    target = given or fitted
    if given is not None:
        rep = check_closeness(points, given, mp.model_names)
        body["given_wedge"] = given.to_dict()
        body["given_report"] = rep.to_dict()
        body["outliers"] = outlier_models(rep, args.outlier_threshold)
    out = Path(args.out)
    fmts = _formats(args)
    _write_json(out / "closeness.json", "closeness", body)
    if "csv" in fmts:
        _write(out / "points.csv", points_to_csv(points))
    if "svg" in fmts:
        _write(out / "closeness.svg", _wedge_chart(points, target, "Events defined by triplets").render())
    d = fitted
    print(f"points={len(points)} fitted wedge delta1={d.delta1:.4g} delta2={d.delta2:.4g} "
          f"nu1={d.nu1:.4g} nu2={d.nu2:.4g} (coverage {args.coverage:g})")
    return EXIT_OK


def cmd_bound(args) -> int:
    params = _wedge_from(args)
    if params is None:
        raise InputError("bound needs --delta1 --delta2 --nu1 --nu2")
    mu = sorted(args.mu)
    try:
        rep = prop1_bound(*mu, params, mu_q=args.mu_q)
    except DegenerateLineError as exc:
        raise InputError(str(exc)) from exc
    body = {
        "prop1": rep.to_dict(),
        "corollary": corollary_bound(mu[0], mu[-1], params),
        "params": params.to_dict(),
    }
    doc = _write_json(Path(args.out) / "bound.json", "bound", body)
    _emit_stdout({k: doc[k] for k in ("prop1", "corollary")})
    return EXIT_OK


def cmd_grid_bound(args) -> int:
    params = _wedge_from(args)
    if params is None:
        raise InputError("grid-bound needs --delta1 --delta2 --nu1 --nu2")
    try:
        cfg = GridSearchConfig(args.zeta, tuple(args.mu), params, args.p_step, args.q_points)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    result = max_residual_grid(cfg)
    doc = _write_json(Path(args.out) / "grid_bound.json", "grid-bound", result.to_dict())
    _emit_stdout({k: doc[k] for k in ("max", "halved", "certified_upper", "witness")})
    return EXIT_OK


def _pairs_from(args) -> AccuracyPairSet:
    if args.pairs:
        if not os.path.exists(args.pairs):
            raise InputError(f"no such file: {args.pairs}")
        names, mp, mq = [], [], []
        with open(args.pairs, encoding="utf-8") as fh:
            header = fh.readline()
            if not header.strip():
                raise InputError("empty pairs file")
            for line in fh:
                if not line.strip():
                    continue
                try:
                    n, a, b = (c.strip() for c in line.split(","))
                    names.append(n)
                    mp.append(float(a))
                    mq.append(float(b))
                except ValueError as exc:
                    raise InputError(f"bad pairs line {line.strip()!r}") from exc
        return AccuracyPairSet.from_lists(names, mp, mq)
    if not (args.p and args.q):
        raise InputError("give P and Q matrices, or --pairs")
    return align(_load(args.p, "P"), _load(args.q, "Q"))


def _fit_chart(pairs: AccuracyPairSet, fits: list, title: str) -> Chart:
    chart = Chart(title, "accuracy on P", "accuracy on Q")
    chart.scatter(pairs.mu_p, pairs.mu_q, label="models")
    xs = np.linspace(min(pairs.mu_p), max(pairs.mu_p), 101)
    colors = {"linear": "#d62728", "probit": "#9467bd", "piecewise": "#2ca02c"}
    for f in fits:
        chart.line(xs.tolist(), f.predict(xs).tolist(), colors[f.kind], dashed=True, label=f.kind)
    lo, hi = min(pairs.mu_p), max(pairs.mu_p)
    chart.line([lo, hi], [lo, hi], color="#000000", dashed=True, label="identity")
    return chart


def cmd_trend(args) -> int:
    pairs = _pairs_from(args)
    if args.kind == "linear":
        fit = ols_fit(pairs)
    elif args.kind == "probit":
        fit = probit_fit(pairs)
    else:
        fit = piecewise_fit(pairs, args.switch, continuous=not args.free)
    out = Path(args.out)
    _write_json(out / "trend.json", "trend", {"fit": fit.to_dict()})
    if "svg" in _formats(args):
        _write(out / "trend.svg", _fit_chart(pairs, [fit], f"{args.kind} fit").render())
    print(f"{fit.kind}: r_squared={fit.r_squared:.6f} max_residual={fit.max_residual:.6f}")
    return EXIT_OK


def _parse_anchors(text: str) -> list[tuple[float, float]]:
    try:
        pts = [tuple(float(v) for v in item.split(":")) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"anchors look like 0.4:0.3,0.8:0.7, got {text!r}")
    if any(len(p) != 2 for p in pts):
        raise argparse.ArgumentTypeError(f"anchors look like 0.4:0.3,0.8:0.7, got {text!r}")
    return sorted(pts)


def cmd_band(args) -> int:
    params = _wedge_from(args)
    if params is None:
        raise InputError("band needs --delta1 --delta2 --nu1 --nu2")
    anchors = args.anchors
    grid = np.linspace(anchors[0][0], anchors[-1][0], args.grid_points)
    try:
        band = feasible_band(anchors, params, args.zeta, grid, args.p_step, args.q_points)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    out = Path(args.out)
    fmts = _formats(args)
    if "csv" in fmts:
        _write(out / "band.csv", band.to_csv())
    _write_json(out / "band.json", "band", {
        "anchors": anchors, "zeta": args.zeta, "params": params.to_dict(),
        "mu_p": band.mu_p, "lower": band.lower, "upper": band.upper,
    })
    if "svg" in fmts:
        chart = Chart("Feasible band", "accuracy on P", "accuracy on Q")
        chart.line(band.mu_p.tolist(), band.lower.tolist(), "#1f77b4", label="lower")
        chart.line(band.mu_p.tolist(), band.upper.tolist(), "#d62728", label="upper")
        chart.scatter([a[0] for a in anchors], [a[1] for a in anchors], "#000000", 4, "anchors")
        _write(out / "band.svg", chart.render())
    print(band.to_csv(), end="")
    return EXIT_OK


def cmd_scenario(args) -> int:
    out = Path(args.out)
    if args.name in ("example1", "example2"):
        sc = example1() if args.name == "example1" else example2()
        if args.sampled:
            mp = sample_matrix(sc.P, args.n, args.seed, label="P")
            mq = sample_matrix(sc.Q, args.n, args.seed + 1, label="Q")
        else:
            mp = exact_matrix(sc.P, args.n, args.seed, label="P")
            mq = exact_matrix(sc.Q, args.n, args.seed + 1, label="Q")
        sidecar = sc.to_dict()
    else:
        acc = np.linspace(args.low, args.high, args.models).round(6).tolist()
        mp, mq = planted_pair(acc, args.slope, args.intercept, args.n, args.seed)
        sidecar = {
            "name": "planted",
            "expected": {
                "mu_p": accuracies(mp).tolist(),
                "mu_q": accuracies(mq).tolist(),
                "line": {"slope": args.slope, "intercept": args.intercept},
                "zeta_max": 0.0,
            },
        }
    out.mkdir(parents=True, exist_ok=True)
    save_matrix(mp, out / "P.csv")
    save_matrix(mq, out / "Q.csv")
    sidecar.update({"n_examples": args.n, "seed": args.seed, "sampled": bool(args.sampled)})
    _write_json(out / "expected.json", "scenario", sidecar)
    print(f"wrote {out / 'P.csv'}, {out / 'Q.csv'}, {out / 'expected.json'}")
    return EXIT_OK


def _report_sections(args, mp, mq, out: Path) -> tuple[dict, list]:
    sections: dict = {}
    failures: list = []
    pairs = align(mp, mq)
    sections["accuracies"] = {
        "models": list(pairs.model_names), "mu_p": pairs.mu_p, "mu_q": pairs.mu_q,
        "missing": list(pairs.missing),
    }
    mp, mq = align_matrices(mp, mq)
    given = _wedge_from(args)
    state: dict = {}

    def run(name, fn):
        try:
            sections[name] = fn()
        except (ValueError, ArithmeticError) as exc:
            log.error("report section %s failed: %s", name, exc)
            failures.append({"section": name, "error": f"{type(exc).__name__}: {exc}"})

    def dominance():
        rep = dominance_table(mp)
        return {k: v for k, v in rep.to_dict().items() if k != "entries"}

    def wedge():
        if mp.h < 3:
            raise ValueError("wedge fitting needs at least 3 models")
        points = PointArray.concat(iter_point_blocks(mp, mq))
        fitted = fit_wedge(points, coverage=args.coverage)
        params = given or fitted
        state["params"] = params
        rep = check_closeness(points, params, mp.model_names)
        return {
            "n_points": len(points),
            "fitted": fitted.to_dict(),
            "used": params.to_dict(),
            "used_source": "flags" if given else "fitted",
            "violating": rep.violating,
            "coverage": rep.coverage,
            "per_model": rep.per_model,
            "outliers": outlier_models(rep, args.outlier_threshold),
        }

    def bounds():
        params = state["params"]
        if params.segment2 is not None:
            raise ValueError("analytic bounds need a single-segment wedge")
        rows = []
        for r in range(len(pairs) - 2):
            idx = (r, r + 1, r + 2)
            mu = [pairs.mu_p[k] for k in idx]
            if mu[0] == mu[2]:
                rows.append({"triple": list(idx), "skipped": "outer accuracies coincide"})
                continue
            rep = prop1_bound(*mu, params, mu_q=[pairs.mu_q[k] for k in idx], triple=idx)
            rows.append({**rep.to_dict(), "models": [pairs.model_names[k] for k in idx]})
        return {
            "consecutive_triples": rows,
            "corollary": corollary_bound(pairs.mu_p[0], pairs.mu_p[-1], params),
        }

    def grid():
        params = state["params"]
        lo, hi = pairs.mu_p[0], pairs.mu_p[-1]
        res = []
        for zeta in args.zeta:
            for r in range(1, len(pairs) - 1):
                entry = {"zeta": zeta, "model": pairs.model_names[r]}
                try:
                    cfg = GridSearchConfig(zeta, (lo, pairs.mu_p[r], hi), params, args.p_step, args.q_points)
                    g = max_residual_grid(cfg)
                    entry.update({"mu": list(cfg.mu), "max": g.max_value, "halved": g.halved,
                                  "certified_upper": g.certified_upper})
                except ValueError as exc:
                    entry["infeasible"] = str(exc)
                res.append(entry)
        return res

    def trends():
        switch = args.switch if args.switch is not None else max(2, min(6, len(pairs) - 1))
        summary = compare_fits(pairs, switch)
        state["fits"] = summary["fits"]
        return {
            "switch_index": switch,
            "table": summary["table"],
            "r_squared_differences": summary["r_squared_differences"],
            "fits": {k: f.to_dict() for k, f in summary["fits"].items()},
        }

    def curves():
        params = state["params"]
        anchors = [(pairs.mu_p[0], pairs.mu_q[0]), (pairs.mu_p[-1], pairs.mu_q[-1])]
        grid_mu = np.linspace(anchors[0][0], anchors[1][0], args.grid_points)
        result = {"anchors": anchors, "mu_p": grid_mu, "lower": {}}
        for zeta in [0.0, *args.zeta]:
            band = feasible_band(anchors, params, zeta, grid_mu, args.p_step, args.q_points)
            result["lower"][f"{zeta:g}"] = band.lower
        state["curves"] = result
        return result

    run("dominance", dominance)
    run("wedge", wedge)
    if "params" in state:
        run("bounds", bounds)
        run("grid_bounds", grid)
        run("lower_bound_curves", curves)
    else:
        failures.append({"section": "bounds", "error": "skipped: no wedge parameters"})
    run("trends", trends)

    if "svg" in _formats(args):
        fits = state.get("fits", {})
        if "linear" in fits:
            _write(out / "fig1.svg", _fit_chart(pairs, [fits["linear"]], "Linear fit").render())
        if "piecewise" in fits:
            _write(out / "fig5.svg", _fit_chart(pairs, [fits["piecewise"]], "Piecewise fit").render())
        if "probit" in fits and "curves" in state:
            chart = _fit_chart(pairs, [fits["probit"]], "Probit fit and lower bounds")
            c = state["curves"]
            palette = ["#1f77b4", "#8c564b", "#e377c2", "#7f7f7f"]
            for n, (z, lower) in enumerate(c["lower"].items()):
                chart.line(c["mu_p"].tolist(), np.asarray(lower).tolist(),
                           palette[n % len(palette)], label=f"lower, zeta={z}")
            _write(out / "fig4.svg", chart.render())
    return sections, failures


def cmd_report(args) -> int:
    mp, mq = _load(args.p, "P"), _load(args.q, "Q")
    out = Path(args.out)
    sections, failures = _report_sections(args, mp, mq, out)
    body = {"inputs": {"P": args.p, "Q": args.q}, **sections, "failures": failures}
    _write_json(out / "report.json", "report", body)
    if failures:
        _write_json(out / "failures.json", "report", {"failures": failures})
        print(f"report written with {len(failures)} failed section(s); see failures.json")
        return EXIT_INFEASIBLE
    print(f"report written to {out / 'report.json'}")
    return EXIT_OK


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="collinear",
        description="Dominance, closeness, residual bounds and trend fits for model accuracies "
                    "measured on two distributions.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--formats", default="json,csv,svg", help="subset of json,csv,svg")

    p = sub.add_parser("dominance", help="pairwise dominance probabilities of one matrix")
    p.add_argument("matrix")
    p.add_argument("--threshold", type=float, default=0.05)
    common(p)
    p.set_defaults(func=cmd_dominance)

    p = sub.add_parser("closeness", help="fit and check the closeness wedge over triplet events")
    p.add_argument("p")
    p.add_argument("q")
    _wedge_args(p)
    p.add_argument("--outlier-threshold", type=int, default=0)
    common(p)
    p.set_defaults(func=cmd_closeness)

    p = sub.add_parser("bound", help="analytic residual bounds for three accuracies")
    p.add_argument("--mu", type=_three, required=True)
    p.add_argument("--mu-q", type=_three)
    _wedge_args(p)
    common(p)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("grid-bound", help="numerical residual bound with dominance up to zeta")
    p.add_argument("--zeta", type=float, required=True)
    p.add_argument("--mu", type=_three, required=True)
    _wedge_args(p)
    p.add_argument("--p-step", type=float, default=0.01)
    p.add_argument("--q-points", type=int, default=5)
    common(p)
    p.set_defaults(func=cmd_grid_bound)

    p = sub.add_parser("trend", help="linear, probit or piecewise trend fit")
    p.add_argument("p", nargs="?")
    p.add_argument("q", nargs="?")
    p.add_argument("--pairs", help="CSV of model,mu_p,mu_q instead of matrices")
    p.add_argument("--kind", choices=("linear", "probit", "piecewise"), default="linear")
    p.add_argument("--switch", type=int, default=6)
    p.add_argument("--free", action="store_true", help="piecewise without continuity at the knot")
    common(p)
    p.set_defaults(func=cmd_trend)

    p = sub.add_parser("band", help="feasible Q-accuracy band between anchor models")
    p.add_argument("--anchors", type=_parse_anchors, required=True, metavar="P:Q,P:Q,...")
    p.add_argument("--zeta", type=float, default=0.0)
    p.add_argument("--grid-points", type=int, default=41)
    p.add_argument("--p-step", type=float, default=0.01)
    p.add_argument("--q-points", type=int, default=5)
    _wedge_args(p)
    common(p)
    p.set_defaults(func=cmd_band)

    p = sub.add_parser("scenario", help="write example or planted fixture matrices")
    p.add_argument("name", choices=("example1", "example2", "planted"))
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sampled", action="store_true", help="i.i.d. sampling instead of exact counts")
    p.add_argument("--models", type=int, default=8)
    p.add_argument("--low", type=float, default=0.5)
    p.add_argument("--high", type=float, default=0.8)
    p.add_argument("--slope", type=float, default=0.9)
    p.add_argument("--intercept", type=float, default=-0.05)
    common(p)
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("report", help="full analysis bundle for a P/Q pair")
    p.add_argument("p")
    p.add_argument("q")
    _wedge_args(p)
    p.add_argument("--zeta", type=_floats, default=[0.05, 0.1])
    p.add_argument("--switch", type=int)
    p.add_argument("--p-step", type=float, default=0.01)
    p.add_argument("--q-points", type=int, default=5)
    p.add_argument("--grid-points", type=int, default=21)
    p.add_argument("--outlier-threshold", type=int, default=0)
    common(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, MatrixFormatError, MatrixValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InfeasibleRegionError, DegenerateLineError, DegenerateFitError) as exc:
        print(f"analysis error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
