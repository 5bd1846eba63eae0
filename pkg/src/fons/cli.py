"""Command-line front end: fons {gen-set,gen-field,besov,flux,run,sweep}."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .besov import besov_seminorm, structure_function
from .flux import flux_scaling
from .grid import PeriodicGrid, TimeField
from .harness import (ConfigError, ExperimentConfig, StageError, build, run_experiment,
                      threshold_sweep, write_report, write_sweep)
from .scaling import dyadic_ladder
from .sets import SingularSet, minkowski_dimension, set_from_descriptor
from .synthesis import verify_hypotheses

log = logging.getLogger("fons")

EXIT_OK, EXIT_ERROR, EXIT_NEGATIVE = 0, 1, 2


class UsageError(ValueError):
    pass


def _out_dir(args) -> Path:
    out = Path(os.environ.get("FONS_OUT") or args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_json(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"cannot read config {path}: {e}") from None
    if not isinstance(raw, dict):
        raise UsageError("config must be a JSON object")
    return raw


def _experiment_config(args) -> ExperimentConfig:
    if not args.config:
        raise UsageError("--config is required")
    raw = _load_json(args.config)
    if args.seed is not None:
        raw["seed"] = args.seed
    try:
        return ExperimentConfig.from_dict(raw)
    except ConfigError as e:
        raise UsageError(str(e)) from None


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_set(args) -> int:
    if args.config:
        raw = _load_json(args.config)
        d, n = int(raw.get("d", args.d)), int(raw.get("n", args.n))
        desc = raw.get("set", raw)
    else:
        d, n = args.d, args.n
        params = {}
        if args.kind == "cantor":
            params = {"removed_fraction": args.removed_fraction, "depth": args.depth,
                      "axes": args.axes}
        elif args.kind == "product":
            if not args.factors:
                raise UsageError("--factors is required for product sets")
            params = {"factors": json.loads(args.factors)}
        elif args.kind == "hyperplane":
            params = {"axis": args.axes[0]}
        elif args.kind == "point_cloud":
            params = {"count": args.count}
        desc = {"kind": args.kind, "parameters": params}
    grid = PeriodicGrid(d, n)
    s = set_from_descriptor(grid, desc, args.seed or 0)
    out = _out_dir(args)
    io.write_field(out / "set.fons", s.as_field())
    report = {"d": d, "n": n, "tag": s.tag, "analytic_dim": s.analytic_dim,
              "minkowski": None}
    if not s.is_empty:
        report["minkowski"] = minkowski_dimension(s).to_dict()
    io.write_json(out / "set.json", report)
    gam = report["minkowski"]["dimension"] if report["minkowski"] else None
    print(f"set {s.kind}: gamma_hat = {'n/a' if gam is None else io.fmt(gam)}")
    return EXIT_OK


def cmd_gen_field(args) -> int:
    cfg = _experiment_config(args)
    fam, v, spec = build(cfg)
    hyp = verify_hypotheses(v, fam, spec, theta=cfg.theta, r=cfg.r)
    out = _out_dir(args)
    count = {"none": 0, "first": 1, "all": len(v)}[cfg.artifacts]
    for k in range(count):
        io.write_field(out / f"field_{k}.fons", v.slices[k])
        io.write_field(out / f"set_{k}.fons", fam.sets()[k].as_field())
    io.write_json(out / "hypotheses.json", {"config": cfg.to_dict(), "hypotheses": hyp.to_dict()})
    print(f"field {cfg.field}: hypotheses {'met' if hyp.passed else 'not met'}"
          f" ({', '.join(hyp.flags) or 'no flags'})")
    return EXIT_OK if hyp.passed else EXIT_NEGATIVE


def _field_input(args) -> TimeField:
    if args.input:
        return TimeField([io.read_field(p) for p in args.input])
    cfg = _experiment_config(args)
    return build(cfg)[1]


def cmd_besov(args) -> int:
    v = _field_input(args)
    g = v.grid
    scales = (np.asarray(args.scales, float) if args.scales
              else dyadic_ladder(1 / g.n, 1 / 4))
    table = structure_function(v, scales, args.orders)
    out = _out_dir(args)
    io.write_csv(out / "structure.csv", ["p", "scale", "S_p"], table.rows())
    fits = {str(p): (None if f is None else f.to_dict()) for p, f in table.fits().items()}
    semi = [besov_seminorm(f, args.theta, args.p, scales).to_dict() for f in v]
    io.write_json(out / "besov.json", {"orders": list(table.orders), "scales": list(scales),
                                       "fits": fits, "theta": args.theta, "p": args.p,
                                       "seminorms": semi})
    shown = ", ".join(f"zeta_{p}={'n/a' if f is None else io.fmt(f['exponent'])}"
                      for p, f in fits.items())
    print(f"structure functions: {shown}")
    return EXIT_OK


def cmd_flux(args) -> int:
    if args.input:
        if not args.set:
            raise UsageError("--set is required with --input")
        f = io.read_field(args.input[0])
        occ = io.read_field(args.set).samples[0] > 0.5
        kind = "custom" if occ.any() else "empty"
        s = SingularSet(f.grid, occ, {"kind": kind})
    else:
        cfg = _experiment_config(args)
        fam, v, _ = build(cfg)
        f, s = v.slices[0], fam.sets()[0]
    g = f.grid
    ladder = (np.asarray(args.deltas, float) if args.deltas
              else dyadic_ladder(4 / g.n, 1 / 8))
    rep = flux_scaling(f, s, ladder, args.method)
    out = _out_dir(args)
    io.write_csv(out / "flux.csv", ["delta", "eps", "inner", "outer", "total"], rep.rows)
    io.write_json(out / "flux.json", rep)
    fi = rep.fits.get("inner")
    print(f"flux: inner slope = {'n/a' if fi is None else io.fmt(fi.exponent)}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _experiment_config(args)
    rep = run_experiment(cfg, args.workers)
    write_report(rep, _out_dir(args))
    print(f"verdict: {rep.verdict} (gamma_hat = {rep.gamma_hat}, "
          f"alpha_hat = {io.fmt(rep.alpha_hat)}, threshold = {io.fmt(rep.threshold)})")
    return EXIT_NEGATIVE if rep.negative else EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _experiment_config(args)
    if cfg.set is not None or cfg.gamma_target is None:
        raw = cfg.to_dict()
        raw.update(set=None, gamma_target=0.0)
        cfg = ExperimentConfig.from_dict(raw)
    rep = threshold_sweep(cfg, args.targets, args.workers)
    write_sweep(rep, _out_dir(args))
    cross = "n/a" if rep.crossing is None else io.fmt(rep.crossing)
    print(f"sweep: monotone = {rep.monotone}, crossing = {cross}, "
          f"threshold = {io.fmt(rep.threshold)}")
    return EXIT_OK if rep.monotone else EXIT_NEGATIVE


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config path")
    common.add_argument("--out", default="fons_out", help="output directory (FONS_OUT overrides)")
    common.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="fons", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen-set", parents=[common], help="generate a singular set")
    s.add_argument("--kind", default="cantor",
                   choices=["cantor", "product", "hyperplane", "point_cloud", "empty", "full"])
    s.add_argument("--d", type=int, default=1)
    s.add_argument("--n", type=int, default=1024)
    s.add_argument("--depth", type=int, default=4)
    s.add_argument("--removed-fraction", type=float, default=1 / 3)
    s.add_argument("--axes", type=int, nargs="+", default=[0])
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--factors", help='JSON list, e.g. \'[["cantor", 0.333, 5], "full"]\'')
    s.set_defaults(func=cmd_gen_set)

    s = sub.add_parser("gen-field", parents=[common], help="synthesize a field and check it")
    s.set_defaults(func=cmd_gen_field)

    s = sub.add_parser("besov", parents=[common], help="structure functions and seminorms")
    s.add_argument("--input", nargs="+", help="field files (one per time slice)")
    s.add_argument("--orders", type=float, nargs="+", default=[1, 2, 3, 4, 6])
    s.add_argument("--scales", type=float, nargs="+")
    s.add_argument("--theta", type=float, default=0.2)
    s.add_argument("--p", type=float, default=3.0)
    s.set_defaults(func=cmd_besov)

    s = sub.add_parser("flux", parents=[common], help="near/far energy flux scaling")
    s.add_argument("--input", nargs=1, help="vector field file")
    s.add_argument("--set", help="set file matching --input")
    s.add_argument("--deltas", type=float, nargs="+")
    s.add_argument("--method", choices=["fd", "spectral"], default="fd")
    s.set_defaults(func=cmd_flux)

    s = sub.add_parser("run", parents=[common], help="full experiment")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", parents=[common], help="dimension sweep across the threshold")
    s.add_argument("--targets", type=float, nargs="+", required=True)
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"fons: error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except (StageError, ValueError, OSError) as e:
        log.debug("failure", exc_info=True)
        print(f"fons: error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
