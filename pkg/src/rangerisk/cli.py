"""Command-line interface: risk reports, fits, frontiers, published tables, oracle checks."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import paperdata as P
from .boxmass import IntegrationError
from .distributions import EllipticalModel, StandardBox, marginal_vars
from .estimation import ReturnPanel, fit_normal, fit_student_t
from .generators import DomainError
from .portfolio import FrontierInput, frontier
from .quadrature import QuadratureError
from .riskmeasures import RangeSpec, oracle, oracle_draws, risk_report

EXIT_DOMAIN = 2
EXIT_INTEGRATION = 3


# ---------------------------------------------------------------------------
# formatting

def fmt(x) -> str:
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return f"{x:.9g}"


def _clean(obj):
    """Round floats to 9 significant digits for stable JSON output."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return fmt(x)
        return float(fmt(x))
    return obj


def _emit(text: str, out):
    if out:
        d = os.path.dirname(os.path.abspath(out))
        os.makedirs(d, exist_ok=True)
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=False) + "\n"


def _csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for r in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# inputs

def _load_json(arg, what):
    if arg is None:
        raise DomainError(f"missing-{what}", f"--{what} is required")
    text = arg if arg.lstrip().startswith("{") else None
    if text is None:
        try:
            with open(arg) as fh:
                text = fh.read()
        except OSError as exc:
            raise DomainError(f"bad-{what}", f"cannot read {arg}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DomainError(f"bad-{what}", f"invalid JSON: {exc.msg}") from None


def _model(args) -> EllipticalModel:
    d = _load_json(args.model, "model")
    if "model" in d and "mu" not in d:
        d = d["model"]
    return EllipticalModel.from_dict(d)


def _range(args):
    d = _load_json(args.range, "range")
    if "lower" in d:
        lo = [-math.inf if v is None else float(v) for v in d["lower"]]
        hi = [math.inf if v is None else float(v) for v in d["upper"]]
        return StandardBox(lo, hi)
    return RangeSpec.from_dict(d)


def _check_config(args):
    if not 1e-10 <= args.tol <= 1e-2:
        raise DomainError("bad-tolerance", "--tol must lie in [1e-10, 1e-2]")
    if not 0 <= args.seed < 2 ** 64:
        raise DomainError("bad-seed", "--seed must be a 64-bit unsigned integer")


# ---------------------------------------------------------------------------
# commands

def _check_finite(rep):
    if not (np.all(np.isfinite(rep.mrvar)) and np.all(np.isfinite(rep.mrcov))):
        raise IntegrationError("integration produced non-finite moments", rep.diagnostics)

def cmd_risk(args):
    model = _model(args)
    rng = _range(args)
    rep = risk_report(model, rng, tol=args.tol, seed=args.seed, region=args.region,
                      engine=args.engine, strict=args.strict)
    _check_finite(rep)
    if args.format == "csv":
        n = model.n
        rows = [["quantity", "i", "j", "value", "std_error"]]
        rows += [["mrvar", i + 1, "", rep.mrvar[i], rep.mrvar_se[i]] for i in range(n)]
        rows += [["mrcov", i + 1, j + 1, rep.mrcov[i, j], rep.mrcov_se[i, j]]
                 for i in range(n) for j in range(n)]
        rows += [["mrcorr", i + 1, j + 1, rep.mrcorr[i, j], "exact" if i == j else rep.mrcorr_se[i, j]]
                 for i in range(n) for j in range(n)]
        _emit(_csv(rows), args.out)
    else:
        _emit(_json(rep.to_dict()), args.out)


def cmd_fit(args):
    if args.panel is None:
        raise DomainError("missing-panel", "--panel is required")
    panel = ReturnPanel.from_csv(args.panel)
    if args.family == "normal":
        res = fit_normal(panel)
    else:
        res = fit_student_t(panel, "fixed" if args.dof is not None else "profile", args.dof)
    out = res.to_dict()
    out["asset_labels"] = panel.asset_labels
    _emit(_json(out), args.out)


def cmd_frontier(args):
    model = _model(args)
    rng = _range(args)
    rep = risk_report(model, rng, tol=args.tol, seed=args.seed, region=args.region,
                      engine=args.engine, strict=args.strict)
    _check_finite(rep)
    if args.targets:
        targets = [float(t) for t in args.targets.split(",")]
    else:
        lo, hi = float(rep.mrvar.min()), float(rep.mrvar.max())
        targets = list(np.linspace(lo, hi, args.n_targets))
    pts = frontier(FrontierInput(rep.mrvar, rep.mrcov, targets))
    n = model.n
    header = ["mu0", "std", "variance"] + [f"w{i + 1}" for i in range(n)]
    rows = [header] + [[p.mu0, p.std, p.variance] + list(p.weights) for p in pts]
    if args.format == "json":
        _emit(_json({"abcd": pts[0].abcd, "points": [dict(zip(header, r)) for r in rows[1:]]}), args.out)
    else:
        _emit(_csv(rows), args.out)


def cmd_oracle(args):
    model = _model(args)
    rng = _range(args)
    out = {"draws": args.draws, "seed": args.seed, "modes": {}}
    for mode in ("y_box", "x_box"):
        rep = risk_report(model, rng, tol=args.tol, seed=args.seed, region=mode, engine=args.engine)
        draws = args.draws if not args.auto_draws else oracle_draws(rep.diagnostics[0]["value"], args.draws)
        o = oracle(model, rng, mode, draws, args.seed)
        zv = (rep.mrvar - o.mrvar) / np.sqrt(o.mrvar_se ** 2 + rep.mrvar_se ** 2)
        zc = (rep.mrcov - o.mrcov) / np.sqrt(o.mrcov_se ** 2 + rep.mrcov_se ** 2)
        out["modes"][mode] = {
            "accepted": o.accepted, "draws": draws,
            "formula_mrvar": rep.mrvar, "oracle_mrvar": o.mrvar, "oracle_mrvar_std_error": o.mrvar_se,
            "mrvar_z": zv, "formula_mrcov": rep.mrcov, "oracle_mrcov": o.mrcov,
            "oracle_mrcov_std_error": o.mrcov_se, "mrcov_z": zc,
            "within_3_std_errors": bool(np.all(np.abs(zv) <= 3) and np.all(np.abs(zc) <= 3)),
        }
    # formula values in each mode measured against the literal range event
    out["y_box_formula_vs_x_box_oracle"] = {
        "mrvar_delta": np.asarray(out["modes"]["y_box"]["formula_mrvar"])
        - np.asarray(out["modes"]["x_box"]["oracle_mrvar"]),
    }
    _emit(_json(out), args.out)


# paper tables ---------------------------------------------------------------

def _paper_table1(tol):
    rows = [["p", "variable", "value", "paper", "abs_delta", "rel_delta"]]
    for j, name in enumerate("UVW"):
        m = P.model3(name)
        for p in (0.0,) + tuple(P.TABLE1_P) + (1.0,):
            v = marginal_vars(m, p)
            for k in range(3):
                if p in (0.0, 1.0):
                    ref = -math.inf if p == 0.0 else math.inf
                    rows.append([p, f"{name}{k + 1}", v[k], ref, 0.0 if v[k] == ref else math.nan, 0.0])
                    continue
                ref = P.TABLE1[P.TABLE1_P.index(p), 3 * j + k]
                rows.append([p, f"{name}{k + 1}", v[k], ref, v[k] - ref, (v[k] - ref) / abs(ref)])
    return rows


def _paper_three(tol, seed, engine):
    mv = [["model", "range", "component", "value", "std_error", "paper", "abs_delta"]]
    mc = [["model", "range", "i", "j", "value", "std_error", "paper", "abs_delta", "rel_delta"]]
    cr = [["model", "range", "i", "j", "value", "paper", "abs_delta"]]
    for name in "UVW":
        m = P.model3(name)
        for k, (p, q) in P.RANGES3.items():
            rep = risk_report(m, RangeSpec.uniform(p, q, 3), tol=tol, seed=seed, engine=engine)
            for i in range(3):
                ref = P.MRVAR3[name][k][i]
                mv.append([name, k, i + 1, rep.mrvar[i], rep.mrvar_se[i], ref, rep.mrvar[i] - ref])
            pc = np.array(P.MRCOV3[name][k])
            for i in range(3):
                for j in range(3):
                    d = rep.mrcov[i, j] - pc[i, j]
                    mc.append([name, k, i + 1, j + 1, rep.mrcov[i, j], rep.mrcov_se[i, j], pc[i, j], d,
                               d / abs(pc[i, j])])
            for (i, j), ref in zip(((0, 1), (0, 2), (1, 2)), P.MRCORR3[name][k]):
                cr.append([name, k, i + 1, j + 1, rep.mrcorr[i, j], ref, rep.mrcorr[i, j] - ref])
    return mv, mc, cr


def _paper_five(tol, seed, engine):
    m = P.model5()
    t5 = [["p", "variable", "value", "paper", "abs_delta"]]
    for i, p in enumerate(P.TABLE5_P):
        v = marginal_vars(m, p)
        for k in range(5):
            t5.append([p, P.LABELS5[k], v[k], P.TABLE5[i, k], v[k] - P.TABLE5[i, k]])
    t6 = [["range", "variable", "value", "std_error", "paper", "rel_delta"]]
    c5 = [["range", "i", "j", "value", "std_error", "paper", "rel_delta"]]
    for k, (p, q) in P.RANGES5.items():
        rep = risk_report(m, RangeSpec.uniform(p, q, 5), tol=tol, seed=seed, engine=engine)
        for i in range(5):
            ref = P.MRVAR5[k][i]
            t6.append([k, P.LABELS5[i], rep.mrvar[i], rep.mrvar_se[i], ref, (rep.mrvar[i] - ref) / abs(ref)])
        for i in range(5):
            for j in range(5):
                ref = P.MRCOV5[k][i, j]
                c5.append([k, i + 1, j + 1, rep.mrcov[i, j], rep.mrcov_se[i, j], ref,
                           (rep.mrcov[i, j] - ref) / abs(ref)])
    return t5, t6, c5


def cmd_paper_tables(args):
    out = args.out or "paper_tables"
    os.makedirs(out, exist_ok=True)
    which = args.which
    written = []

    def save(name, rows):
        path = os.path.join(out, name)
        with open(path, "w", newline="") as fh:
            fh.write(_csv(rows))
        written.append(path)

    if which in ("all", "table1"):
        save("table1_var.csv", _paper_table1(args.tol))
    if which in ("all", "three"):
        mv, mc, cr = _paper_three(args.tol, args.seed, args.engine)
        save("tables2to4_mrvar.csv", mv)
        save("mrcov_three_asset.csv", mc)
        save("mrcorr_three_asset.csv", cr)
    if which in ("all", "five"):
        t5, t6, c5 = _paper_five(args.tol, args.seed, args.engine)
        save("table5_var.csv", t5)
        save("table6_mrvar.csv", t6)
        save("mrcov_five_asset.csv", c5)
    sys.stdout.write("\n".join(written) + "\n")


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", help="model JSON file or inline JSON")
    common.add_argument("--panel", help="CSV panel: date column then one column per asset")
    common.add_argument("--range", help="range JSON {p, q} or box JSON {lower, upper}")
    common.add_argument("--tol", type=float, default=1e-6, help="relative integration tolerance")
    common.add_argument("--seed", type=int, default=42, help="master seed")
    common.add_argument("--engine", choices=("auto", "quadrature", "qmc"), default="auto")
    common.add_argument("--region", choices=("x_box", "y_box"), default="x_box",
                        help="condition on the X-space box or on the standardized Y-space box")
    common.add_argument("--strict", action="store_true",
                        help="exit 3 when any integration term misses the tolerance")
    common.add_argument("--out", help="output path (stdout when omitted)")
    common.add_argument("--format", choices=("csv", "json"), default=None,
                        help="json for reports, csv for frontiers by default")

    p = argparse.ArgumentParser(prog="rangerisk", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("risk", parents=[common], help="MRVaR, MRCov and MRCorr for a model and range")
    f = sub.add_parser("fit", parents=[common], help="fit a normal or Student-t model to a panel")
    f.add_argument("--family", choices=("normal", "student_t"), default="student_t")
    f.add_argument("--dof", type=float, default=None, help="fix the Student-t dof")
    fr = sub.add_parser("frontier", parents=[common], help="range-based efficient frontier")
    fr.add_argument("--targets", help="comma-separated target levels")
    fr.add_argument("--n-targets", type=int, default=50)
    pt = sub.add_parser("paper-tables", parents=[common], help="regenerate the published tables")
    pt.add_argument("--which", choices=("all", "table1", "three", "five"), default="all")
    o = sub.add_parser("oracle", parents=[common], help="Monte-Carlo check in both conditioning modes")
    o.add_argument("--draws", type=int, default=1_000_000)
    o.add_argument("--auto-draws", action="store_true",
                   help="raise the draw count for rare ranges")
    return p


COMMANDS = {"risk": cmd_risk, "fit": cmd_fit, "frontier": cmd_frontier,
            "paper-tables": cmd_paper_tables, "oracle": cmd_oracle}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.format is None:
        args.format = "csv" if args.command == "frontier" else "json"
    try:
        _check_config(args)
        COMMANDS[args.command](args)
    except DomainError as exc:
        sys.stderr.write(json.dumps({"error": exc.code, "message": str(exc)}) + "\n")
        return EXIT_DOMAIN
    except (IntegrationError, QuadratureError) as exc:
        sys.stderr.write(json.dumps({"error": "integration-failure", "message": str(exc)}) + "\n")
        return EXIT_INTEGRATION
    return 0


if __name__ == "__main__":
    sys.exit(main())
