"""Command-line front end: ground-state, evolve, sweep and verify.

Exit codes: 0 success, 2 usage or configuration error, 3 numeric failure
(including a failed verify ledger).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import multiprocessing as mp
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .errors import ConfigurationError, InvSqError, NumericError, UsageError

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
THREADS_ENV = "INVSQ_NLS_THREADS"
BLAS_ENV = ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS")

log = logging.getLogger("invsq_nls")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _emit_error("UsageError", message)
        sys.exit(EXIT_USAGE)


def _emit_error(kind: str, message: str, out: Path | None = None) -> None:
    doc = json.dumps({"error": kind, "message": message}, sort_keys=True)
    print(doc, file=sys.stderr)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "error.json").write_text(doc + "\n")


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n")


def _load_json(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigurationError(f"{path}: top level must be a JSON object")
    return doc


# --- ground-state --------------------------------------------------------------------

def cmd_ground_state(args) -> int:
    from .groundstate import solve_ground_state

    out = Path(args.out)
    gs = solve_ground_state(args.a, args.p, tol=args.tol, n=args.n, r_max=args.rmax)
    if not gs.certified:
        raise NumericError(f"ground state not certified: residual={gs.residual_sup:.3e}, "
                           f"pohozaev={gs.pohozaev_errors}")
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "certificate.json", gs.certificate())
    with open(out / "profile.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "Q"])
        for r, q in zip(gs.profile.grid.nodes, gs.profile.values.real):
            w.writerow([repr(float(r)), repr(float(q))])
    print(json.dumps({"C_a": gs.sharp_constant, "alpha_star": gs.alpha_star,
                      "pohozaev_errors": gs.pohozaev_errors, "out": str(out)}, sort_keys=True))
    return EXIT_OK


# --- evolve ----------------------------------------------------------------------------

GRID_KEYS = ("n", "r_max")


def parse_run_config(doc: dict, overrides: dict | None = None):
    """Split a run document into (SimConfig, grid dict, initial-data spec)."""
    from .evolve import SimConfig

    doc = dict(doc)
    grid = dict(doc.pop("grid", {}))
    init = doc.pop("initial_data", None)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key in GRID_KEYS:
            grid[key] = value
        else:
            doc[key] = value
    if init is None:
        raise ConfigurationError("config needs an 'initial_data' object")
    unknown = set(grid) - set(GRID_KEYS)
    if unknown or set(grid) != set(GRID_KEYS):
        raise ConfigurationError(f"config 'grid' needs exactly {list(GRID_KEYS)}")
    try:
        cfg = SimConfig.from_dict(doc)
    except TypeError as exc:
        raise ConfigurationError(f"invalid SimConfig: {exc}") from None
    return cfg, {"n": int(grid["n"]), "r_max": float(grid["r_max"])}, init


def run_member(cfg, grid_spec: dict, init: dict) -> "Trajectory":
    from .evolve import build_initial_data, evolve
    from .grid import grid_for_potential

    grid = grid_for_potential(cfg.a, grid_spec["r_max"], grid_spec["n"])
    u0 = build_initial_data(grid, init, cfg.p)
    return evolve(u0, cfg, keep_fields=False)


def _overrides(args) -> dict:
    return {"n": args.n, "r_max": args.rmax, "dt": args.dt, "t_max": args.tmax}


def cmd_evolve(args) -> int:
    out = Path(args.out)
    cfg, grid_spec, init = parse_run_config(_load_json(args.config), _overrides(args))
    traj = run_member(cfg, grid_spec, init)
    out.mkdir(parents=True, exist_ok=True)
    traj.write_csv(out / "diagnostics.csv")
    doc = traj.verdict_document()
    doc["grid"] = grid_spec
    doc["initial_data"] = init
    _write_json(out / "verdict.json", doc)
    print(json.dumps({"verdict": doc["verdict"], "out": str(out)}, sort_keys=True))
    return EXIT_OK


# --- sweep -----------------------------------------------------------------------------

def _member_label(index: int, value: float) -> str:
    return f"member_{index:03d}_{value:.6g}"


def _sweep_member(payload: dict) -> dict:
    """Run one sweep member in a worker process and write its artifacts."""
    from .evolve import SimConfig
    from .groundstate import solve_ground_state, threshold_report
    from .grid import grid_for_potential
    from .evolve import build_initial_data, evolve

    cfg = SimConfig.from_dict(payload["config"])
    grid_spec, init = payload["grid"], payload["initial_data"]
    grid = grid_for_potential(cfg.a, grid_spec["r_max"], grid_spec["n"])
    gs = solve_ground_state(cfg.a, cfg.p)
    u0 = build_initial_data(grid, init, cfg.p, gs=gs)
    thr = threshold_report(gs, u0).as_dict()
    traj = evolve(u0, cfg, keep_fields=False)
    out = Path(payload["out"])
    out.mkdir(parents=True, exist_ok=True)
    traj.write_csv(out / "diagnostics.csv")
    doc = traj.verdict_document()
    doc.update({"grid": grid_spec, "initial_data": init, "thresholds": thr})
    _write_json(out / "verdict.json", doc)
    return {"value": payload["value"], "label": out.name, "verdict": doc["verdict"], "thresholds": thr}


def sweep_payloads(spec: dict, overrides: dict, out: Path) -> list[dict]:
    base = spec.get("base")
    family = spec.get("family")
    if not isinstance(base, dict) or not isinstance(family, dict):
        raise ConfigurationError("sweep spec needs 'base' and 'family' objects")
    values = family.get("values")
    if not isinstance(values, list) or not values:
        raise UsageError("sweep family is empty")
    if any(not isinstance(v, (int, float)) or not v > 0 for v in values):
        raise ConfigurationError("sweep family values must be positive numbers")
    kind = family.get("type")
    probe = dict(base)
    probe["initial_data"] = {"type": "gaussian"}
    cfg, grid_spec, _ = parse_run_config(probe, overrides)
    payloads = []
    for i, v in enumerate(values):
        if kind == "ground-state-multiple":
            init = {"type": kind, "params": {"c": float(v)}}
        elif kind == "gaussian":
            init = {"type": kind, "params": {"amplitude": float(v), "width": float(family.get("width", 1.0))}}
        else:
            raise ConfigurationError(f"unknown sweep family type {kind!r}")
        payloads.append({"index": i, "value": float(v), "config": cfg.to_dict(), "grid": grid_spec,
                         "initial_data": init, "out": str(out / _member_label(i, v))})
    return payloads


def sweep_workers(n_members: int) -> int:
    raw = os.environ.get(THREADS_ENV)
    cap = os.cpu_count() or 1
    if raw:
        try:
            cap = int(raw)
        except ValueError:
            raise ConfigurationError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
        if cap < 1:
            raise ConfigurationError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return max(1, min(cap, n_members))


def run_sweep(payloads: list[dict], workers: int) -> list[dict]:
    # Members always run in single-threaded worker processes so their bytes do
    # not depend on the concurrency degree.
    for var in BLAS_ENV:
        os.environ[var] = "1"
    ctx = mp.get_context("spawn")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        results = list(pool.map(_sweep_member, payloads))
    return sorted(results, key=lambda r: r["value"])


def cmd_sweep(args) -> int:
    out = Path(args.out)
    spec = _load_json(args.spec)
    if "outputs" in spec and args.out_given is False:
        out = Path(spec["outputs"])
    payloads = sweep_payloads(spec, _overrides(args), out)
    results = run_sweep(payloads, sweep_workers(len(payloads)))
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "threshold_table.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["value", "mass_energy_ratio", "gradient_ratio", "energy", "threshold_verdict", "verdict"])
        for r in results:
            t = r["thresholds"]
            me = "" if t["mass_energy_ratio"] is None else repr(float(t["mass_energy_ratio"]))
            w.writerow([repr(r["value"]), me, repr(float(t["gradient_ratio"])), repr(float(t["energy"])),
                        t["verdict"], r["verdict"]])
    _write_json(out / "sweep.json", {"family": spec["family"], "members": results})
    print(json.dumps({"verdicts": {r["label"]: r["verdict"] for r in results}, "out": str(out)}, sort_keys=True))
    return EXIT_OK


# --- verify ----------------------------------------------------------------------------

def cmd_verify(args) -> int:
    from .verify_suite import NAMED_CONFIGS, run_suite, suite_names

    if args.list:
        for name in suite_names():
            print(name)
        return EXIT_OK
    if args.config not in NAMED_CONFIGS:
        raise ConfigurationError(f"unknown verify config {args.config!r}; choose from {sorted(NAMED_CONFIGS)}")
    params = dict(NAMED_CONFIGS[args.config])
    if args.a is not None:
        params["a"] = args.a
    if args.p is not None:
        params["p"] = args.p
    ledger = run_suite(params["a"], params["p"], inject=args.inject)
    ledger["config"] = args.config
    text = json.dumps(ledger, indent=2, sort_keys=True)
    print(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "verify.json").write_text(text + "\n")
    return EXIT_OK if ledger["passed"] else EXIT_NUMERIC


# --- entry point -------------------------------------------------------------------------

def _positive(kind):
    def parse(text):
        try:
            value = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
        if not (value > 0 and math.isfinite(value)):
            raise argparse.ArgumentTypeError(f"expected a positive value, got {text!r}")
        return value
    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="invsq-nls", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--out", default="out", help="output directory (default: ./out)")
        p.add_argument("--n", type=int, default=None, help="number of grid nodes")
        p.add_argument("--rmax", type=_positive(float), default=None, help="outer radius of the grid")
        p.add_argument("--dt", type=_positive(float), default=None, help="time step")
        p.add_argument("--tmax", type=_positive(float), default=None, help="final time")

    gs = sub.add_parser("ground-state", help="solve and certify the ground state Q_a")
    gs.add_argument("--a", type=float, required=True, help="potential strength a > 0")
    gs.add_argument("--p", type=float, required=True, help="nonlinearity exponent p > 2")
    gs.add_argument("--tol", type=_positive(float), default=1e-12, help="bisection tolerance on Q(0) scale")
    common(gs)
    gs.set_defaults(func=cmd_ground_state)

    ev = sub.add_parser("evolve", help="run one trajectory from a JSON config")
    ev.add_argument("--config", required=True, help="JSON run config")
    common(ev)
    ev.set_defaults(func=cmd_evolve)

    sw = sub.add_parser("sweep", help="run a family of initial data concurrently")
    sw.add_argument("--spec", required=True, help="JSON sweep spec")
    common(sw)
    sw.set_defaults(func=cmd_sweep)

    vf = sub.add_parser("verify", help="run the identity and inequality suite")
    vf.add_argument("--config", default="default", help="named parameter set (default: a=1, p=4)")
    vf.add_argument("--list", action="store_true", help="print the suite without running it")
    vf.add_argument("--a", type=float, default=None)
    vf.add_argument("--p", type=float, default=None)
    vf.add_argument("--out", default=None, help="also write verify.json here")
    vf.add_argument("--inject", default=None, help=argparse.SUPPRESS)
    vf.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    raw = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(raw)
    args.out_given = "--out" in raw
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "ground-state":
        if args.n is None:
            args.n = 512
    out = Path(args.out) if getattr(args, "out", None) else None
    try:
        return args.func(args)
    except (ConfigurationError, UsageError) as exc:
        _emit_error(type(exc).__name__, str(exc), out)
        return EXIT_USAGE
    except (NumericError, FloatingPointError, ArithmeticError) as exc:
        _emit_error(type(exc).__name__, str(exc), out)
        return EXIT_NUMERIC
    except InvSqError as exc:
        _emit_error(type(exc).__name__, str(exc), out)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
