"""Command-line surface: solve, simulate, sweep and chart the auction models.

Subcommands
-----------
solve-private      equilibrium bid schedule of the hybrid private-value auction
solve-candlestick  break-even slow bid of the common-value candlestick auction
simulate           Monte Carlo verification of either model (PASS/FAIL line)
sweep              one solved row per grid point along a parameter axis
figure             SVG bid-schedule chart (plus companion CSV)

Exit codes: 0 success, 2 usage error, 3 solver failure, 4 verification
failure, 5 I/O failure. Every output file is written atomically (temp file
plus rename) so failures leave no partial files behind. All flags can also be
given through ``--config file.json`` (flags override the file; unknown keys
are rejected).
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from .charts import Series, line_chart_svg
from .common_values import (CandlestickConfig, PriceProcess, RootNotFoundError,
                            solve_candlestick)
from .distributions import parse_distribution
from .private_equilibrium import (HybridAuctionConfig, OdeSingularityError,
                                  SolverError, solve_fixed_point, solve_ode,
                                  verify_envelope)
from .simulator import (simulate_candlestick, simulate_hybrid, sweep,
                        sweep_header)

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SOLVER = 3
EXIT_VERIFY = 4
EXIT_IO = 5


# ------------------------------ option registry -------------------------------


@dataclass(frozen=True)
class _Opt:
    name: str
    type: type = str
    default: object = None
    required: bool = False
    help: str = ""
    choices: tuple = None


_PRIVATE_OPTS = (
    _Opt("na", int, required=True, help="number of integrated builders (>= 0)"),
    _Opt("nb", int, required=True, help="number of neutral builders (>= 1)"),
    _Opt("fa", str, required=True, help="integrated value law, e.g. 'uniform(0,1)'"),
    _Opt("fb", str, required=True, help="neutral value law, e.g. 'beta(2,2)'"),
    _Opt("grid", int, 512, help="value-grid points (default 512)"),
    _Opt("tol", float, None, help="solver tolerance (default 1e-6 fixed-point, 1e-9 ode)"),
    _Opt("max-iter", int, 10_000, help="fixed-point sweep cap"),
    _Opt("damping", float, 0.5, help="fixed-point damping in (0,1]"),
    _Opt("method", str, "auto", choices=("fixed-point", "ode", "auto"),
         help="solver; auto cross-checks fixed-point with ode when nb >= 2"),
    _Opt("out", str, required=True, help="output CSV path (JSON envelope written alongside)"),
)

_CANDLESTICK_OPTS = (
    _Opt("v0", float, 1.0, help="value at time 0"),
    _Opt("vol", float, 0.2, help="volatility per sqrt-second"),
    _Opt("delta", float, 1.0, help="fast bidder's lead time in seconds"),
    _Opt("p", float, required=True, help="fast-bidder revision probability in [0,1]"),
    _Opt("tol", float, 1e-12, help="root bracket width"),
    _Opt("out", str, required=True, help="output JSON path"),
)

_SIMULATE_OPTS = (
    _Opt("model", str, required=True, choices=("hybrid", "candlestick")),
    _Opt("na", int, 3), _Opt("nb", int, 1),
    _Opt("fa", str, "uniform(0,1)"), _Opt("fb", str, "uniform(0,1)"),
    _Opt("grid", int, 512), _Opt("tol", float, None),
    _Opt("v0", float, 1.0), _Opt("vol", float, 0.2), _Opt("delta", float, 1.0),
    _Opt("p", float, 0.5), _Opt("n-slow", int, 2),
    _Opt("reps", int, 100_000, help="replications (>= 10000)"),
    _Opt("seed", int, 42, help="64-bit stream seed"),
    _Opt("out", str, required=True, help="output JSON report path"),
)

_SWEEP_OPTS = (
    _Opt("axis", str, required=True, choices=("p", "vol", "delta", "na", "nb")),
    _Opt("grid", str, required=True, help="comma-separated axis values"),
    _Opt("v0", float, 1.0), _Opt("vol", float, 0.2), _Opt("delta", float, 1.0),
    _Opt("p", float, 0.5),
    _Opt("na", int, 1), _Opt("nb", int, 1),
    _Opt("fa", str, "uniform(0,1)"), _Opt("fb", str, "uniform(0,1)"),
    _Opt("grid-size", int, 512), _Opt("tol", float, None),
    _Opt("n-slow", int, 2),
    _Opt("verify-reps", int, 0, help="Monte Carlo replications per point (0 = off)"),
    _Opt("seed", int, 42),
    _Opt("out", str, required=True, help="output CSV path"),
)

_FIGURE_OPTS = (
    _Opt("fa", str, "beta(2,2)"), _Opt("fb", str, "beta(2,2)"),
    _Opt("na", int, 3), _Opt("nb", int, 3),
    _Opt("grid", int, 512), _Opt("tol", float, None),
    _Opt("out", str, required=True, help="output SVG path (companion CSV alongside)"),
)


def _add_options(sub: argparse.ArgumentParser, opts: tuple[_Opt, ...]):
    for o in opts:
        kwargs = {"dest": o.name.replace("-", "_"), "default": None,
                  "help": o.help or None}
        if o.choices:
            kwargs["choices"] = o.choices
        if o.type is not str:
            kwargs["type"] = o.type
        sub.add_argument(f"--{o.name}", **kwargs)
    sub.add_argument("--config", default=None,
                     help="JSON file supplying any of the flags above "
                          "(explicit flags take precedence)")


def _resolve(parser: argparse.ArgumentParser, args: argparse.Namespace,
             opts: tuple[_Opt, ...]) -> SimpleNamespace:
    """Merge CLI flags over config-file values over defaults."""
    file_cfg = {}
    if args.config is not None:
        try:
            with open(args.config) as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"cannot read config file {args.config}: {exc}")
        if not isinstance(file_cfg, dict):
            parser.error(f"config file {args.config} must hold a JSON object")
        known = {o.name.replace("-", "_") for o in opts}
        unknown = sorted(set(file_cfg) - known)
        if unknown:
            parser.error(f"unknown config keys: {', '.join(unknown)}")
    merged = {}
    for o in opts:
        dest = o.name.replace("-", "_")
        value = getattr(args, dest)
        if value is None:
            value = file_cfg.get(dest, o.default)
        if value is None and o.required:
            parser.error(f"--{o.name} is required")
        if value is not None and o.choices and value not in o.choices:
            parser.error(f"--{o.name} must be one of {o.choices}, got {value!r}")
        merged[dest] = value
    return SimpleNamespace(**merged)


# --------------------------------- file I/O -----------------------------------


def _write_atomic(path, text: str):
    """Write via a temp file in the target directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=str(path.parent or Path(".")),
                               prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def _jsonify(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON-serializable: {type(obj)}")


def _json_text(payload: dict) -> str:
    envelope = {"schema_version": 1, **payload,
                "meta": {"created_utc": datetime.now(timezone.utc).isoformat()}}
    return json.dumps(envelope, sort_keys=True, indent=2, default=_jsonify) + "\n"


def _solution_csv(solution) -> str:
    cols = solution.table()
    lines = ["v,sigma,x,S"]
    for v, s, x, big_s in zip(cols["v"], cols["sigma"], cols["x"], cols["S"]):
        lines.append(f"{v:.12g},{s:.12g},{x:.12g},{big_s:.12g}")
    return "\n".join(lines) + "\n"


def _rows_csv(header: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


# --------------------------------- commands -----------------------------------


def _private_config(ns) -> HybridAuctionConfig:
    return HybridAuctionConfig(ns.na, ns.nb, parse_distribution(ns.fa),
                               parse_distribution(ns.fb))


def cmd_solve_private(ns) -> int:
    config = _private_config(ns)
    if ns.method == "ode":
        solution = solve_ode(config, ns.grid, tol=ns.tol or 1e-9)
    else:
        solution = solve_fixed_point(config, ns.grid, tol=ns.tol or 1e-6,
                                     max_iter=ns.max_iter, damping=ns.damping)
    disagreement = None
    cross_note = None
    if ns.method == "auto" and ns.nb >= 2:
        try:
            ode_solution = solve_ode(config, ns.grid)
            disagreement = float(np.max(np.abs(solution.bids - ode_solution.bids)))
        except (OdeSingularityError, SolverError) as exc:
            cross_note = f"ode cross-check unavailable: {exc}"

    out = Path(ns.out)
    _write_atomic(out, _solution_csv(solution))
    _write_atomic(out.with_suffix(".json"), _json_text({
        "config": config.describe(),
        "solver": solution.metadata(),
        "residuals": {
            "equation": solution.residual,
            "envelope_defect": verify_envelope(solution).max_defect,
            "cross_method_max_disagreement": disagreement,
            "cross_method_note": cross_note,
        },
    }))
    msg = f"solved: residual={solution.residual:.3g} ({solution.method})"
    if disagreement is not None:
        msg += f", fixed-point vs ode max disagreement={disagreement:.3g}"
    print(msg)
    return EXIT_OK


def cmd_solve_candlestick(ns) -> int:
    config = CandlestickConfig(PriceProcess(ns.v0, ns.vol, ns.delta), ns.p)
    solution = solve_candlestick(config, tol=ns.tol)
    payload = solution.to_dict()
    payload["bracket"] = list(solution.bracket) if solution.bracket else None
    payload["iterations"] = solution.iterations
    _write_atomic(ns.out, _json_text(payload))
    print(f"b0s={solution.b0s:.12g} slow_win_prob={solution.slow_win_prob:.6g} "
          f"residual={solution.residual:.3g}")
    return EXIT_OK


def cmd_simulate(ns) -> int:
    if ns.model == "hybrid":
        config = _private_config(ns)
        solution = solve_fixed_point(config, ns.grid, tol=ns.tol or 1e-6)
        report = simulate_hybrid(config, solution, ns.reps, ns.seed)
    else:
        config = CandlestickConfig(PriceProcess(ns.v0, ns.vol, ns.delta), ns.p)
        solution = solve_candlestick(config, tol=ns.tol or 1e-12)
        report = simulate_candlestick(config, solution, ns.n_slow, ns.reps, ns.seed)

    _write_atomic(ns.out, _json_text(report.to_dict()))
    if report.agreement_ok:
        print(f"PASS: {len(report.checks)}/{len(report.checks)} analytic-vs-MC "
              f"checks within 3 half-widths ({ns.model}, reps={ns.reps})")
        return EXIT_OK
    failed = [c["name"] for c in report.checks if not c["ok"]]
    print(f"FAIL: analytic-vs-MC outside 3 half-widths for {', '.join(failed)} "
          f"({ns.model}, reps={ns.reps})")
    return EXIT_VERIFY


def _parse_grid(value) -> list[float]:
    if isinstance(value, (list, tuple)):
        return [float(x) for x in value]
    toks = [tok.strip() for tok in str(value).split(",")]
    return [float(tok) for tok in toks if tok]


def cmd_sweep(ns) -> int:
    grid_values = _parse_grid(ns.grid)
    base = {"v0": ns.v0, "vol": ns.vol, "delta": ns.delta, "p": ns.p,
            "na": ns.na, "nb": ns.nb,
            "fa": parse_distribution(ns.fa), "fb": parse_distribution(ns.fb),
            "grid_size": ns.grid_size, "n_slow": ns.n_slow}
    if ns.tol is not None:
        base["tol"] = ns.tol
    rows = sweep(ns.axis, grid_values, base, verify_reps=ns.verify_reps,
                 seed=ns.seed)
    _write_atomic(ns.out, _rows_csv(sweep_header(ns.axis), rows))
    bad = sum(1 for r in rows if r["status"] != "ok")
    print(f"sweep over {ns.axis}: {len(rows)} rows, {bad} non-ok")
    return EXIT_OK


def cmd_figure(ns) -> int:
    config = _private_config(ns)
    solution = solve_fixed_point(config, ns.grid, tol=ns.tol or 1e-6)
    v = solution.values
    svg = line_chart_svg(
        [Series(v, solution.bids, "equilibrium bid"),
         Series(v, v, "truthful bid (45-degree)", dashed=True)],
        xlabel="value v", ylabel="bid",
        title=f"Neutral-builder bid schedule: na={ns.na}, nb={ns.nb}, fb={ns.fb}")
    out = Path(ns.out)
    _write_atomic(out, svg)
    _write_atomic(out.with_suffix(".csv"), _solution_csv(solution))
    print(f"wrote {out} and {out.with_suffix('.csv')}")
    return EXIT_OK


# ----------------------------------- main --------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pbslab",
        description="Equilibria of the hybrid and candlestick block-builder "
                    "auctions: analytic solvers cross-checked by Monte Carlo.")
    sub = parser.add_subparsers(dest="command")
    for name, opts, handler, desc in (
        ("solve-private", _PRIVATE_OPTS, cmd_solve_private,
         "solve the private-value hybrid auction bid schedule"),
        ("solve-candlestick", _CANDLESTICK_OPTS, cmd_solve_candlestick,
         "solve the candlestick break-even slow bid"),
        ("simulate", _SIMULATE_OPTS, cmd_simulate,
         "solve, then verify by Monte Carlo (prints PASS/FAIL)"),
        ("sweep", _SWEEP_OPTS, cmd_sweep,
         "solve one row per point along a parameter axis"),
        ("figure", _FIGURE_OPTS, cmd_figure,
         "emit an SVG bid-schedule chart plus companion CSV"),
    ):
        p = sub.add_parser(name, help=desc, description=desc)
        _add_options(p, opts)
        p.set_defaults(handler=handler, option_spec=opts)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "handler", None) is None:
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        ns = _resolve(parser, args, args.option_spec)
        return args.handler(ns)
    except SystemExit as exc:  # argparse --help (0) and usage errors (2)
        return int(exc.code or 0)
    except (SolverError, RootNotFoundError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"invalid arguments: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
