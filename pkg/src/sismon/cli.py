"""Command-line driver: ``sismon {synth,plan,estimate,diagnose,simulate}``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 config error.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .config import ProposalSpec, SimConfig, StrataSpec, load_config
from .designs import KINDS, STRATIFIED, WEIGHTED, DesignSpec, draw_plan, estimate, read_plan, write_estimate, write_plan
from .diagnostics import format_report, stratum_diagnostics, theorem_report
from .errors import ConfigError, DataError, SimulationError
from .harness import derive_seed, design_tag, run_simulation
from .pool import PRESETS, LabelOracle, load_pool, load_synth_spec, preset_spec, synth_pool, write_pool
from .proposal import DEFAULT_FLOOR, FAMILIES
from .strata import allocate_proportional

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CONFIG = 0, 2, 3, 4


def _pool_for(args, cfg: SimConfig | None = None):
    path = args.pool or (cfg.pool if cfg is not None else None)
    if path is None:
        raise ConfigError("no pool given: pass --pool or set 'pool' in the config")
    try:
        return load_pool(path)
    except FileNotFoundError:
        raise DataError(f"pool file {path} not found") from None


def cmd_synth(args) -> int:
    if (args.preset is None) == (args.spec is None):
        raise ConfigError("give exactly one of --preset or --spec")
    if args.preset is not None:
        laws, n_classes = preset_spec(args.preset, args.size), 2
    else:
        laws, n_classes = load_synth_spec(args.spec)
    write_pool(synth_pool(laws, args.seed, n_classes), args.out)
    return EXIT_OK


def _plan_spec(args, pool):
    """(DesignSpec, ProposalSpec or None) from either --config or flags."""
    kind = args.design
    strata_spec = pspec = None
    if args.config is not None:
        cfg = load_config(args.config)
        strata_spec = cfg.strata
        pspec = cfg.proposals[0] if cfg.proposals else None
    if args.strata_attr is not None:
        strata_spec = StrataSpec("categorical", {"attr": args.strata_attr}, args.min_count, args.min_frac)
    if args.family is not None or args.alpha is not None or pspec is None:
        pspec = ProposalSpec(
            args.family or "raw_score",
            1.0 if args.alpha is None else args.alpha,
            args.floor,
        )
    if kind in STRATIFIED and strata_spec is None:
        raise ConfigError(f"{kind} needs strata: pass --strata-attr or --config")
    strat = strata_spec.build(pool) if kind in STRATIFIED else None
    prop = pspec.build(pool) if kind in WEIGHTED else None
    return DesignSpec(kind, args.budget, strat, prop), (pspec if kind in WEIGHTED else None)


def cmd_plan(args) -> int:
    pool = _pool_for(args)
    spec, pspec = _plan_spec(args, pool)
    seed = args.seed
    if args.replication is not None:
        seed = derive_seed(args.seed, design_tag(spec.kind, pspec), spec.budget, args.replication)
    write_plan(draw_plan(spec, pool, seed), args.out)
    return EXIT_OK


def cmd_estimate(args) -> int:
    pool = _pool_for(args)
    plan = read_plan(args.plan)
    labels = LabelOracle.from_csv(args.labels).query(plan.ids.tolist())
    est = estimate(plan, labels, pool)
    if args.out is not None:
        write_estimate(est, args.out)
    print(repr(est.value))
    return EXIT_OK


def cmd_diagnose(args) -> int:
    cfg = load_config(args.config)
    pool = _pool_for(args, cfg)
    pool.require_oracle("diagnostics")
    if cfg.strata is None or not cfg.proposals:
        raise ConfigError("diagnose needs 'strata' and 'proposal' sections")
    strat = cfg.strata.build(pool)
    blocks = []
    for pspec in cfg.proposals:
        diag = stratum_diagnostics(pool, strat, pspec.build(pool))
        for n in cfg.budgets:
            rep = theorem_report(diag, allocate_proportional(strat, n))
            blocks.append(f"# strata={strat.name} proposal={pspec.tag} n={n}\n" + format_report(diag, rep))
    sys.stdout.write("\n".join(blocks))
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    pool = _pool_for(args, cfg)
    report = run_simulation(cfg, pool, workers=args.workers)
    jpath, cpath = report.write(args.out)
    print(f"wrote {jpath} and {cpath}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sismon", description="Label-budgeted defect-rate estimation.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic oracle-complete pool")
    s.add_argument("--preset", help=f"one of: {', '.join(PRESETS)}")
    s.add_argument("--spec", help="JSON synth spec file")
    s.add_argument("--size", type=int, default=10_000, help="pool size for presets")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("plan", help="draw a sampling plan for annotation")
    s.add_argument("--pool", required=True)
    s.add_argument("--design", choices=KINDS, required=True)
    s.add_argument("--budget", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--replication", type=int,
                   help="derive the seed as the simulation would for this replication index")
    s.add_argument("--config", help="take strata and proposal from a config file")
    s.add_argument("--strata-attr", help="categorical stratification attribute")
    s.add_argument("--min-count", type=int, default=3)
    s.add_argument("--min-frac", type=float, default=0.005)
    s.add_argument("--family", choices=FAMILIES)
    s.add_argument("--alpha", type=float)
    s.add_argument("--floor", type=float, default=DEFAULT_FLOOR)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_plan)

    s = sub.add_parser("estimate", help="estimate the defect rate from a labelled plan")
    s.add_argument("--plan", required=True)
    s.add_argument("--labels", required=True, help="CSV with columns id,true_label")
    s.add_argument("--pool", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("diagnose", help="exact per-stratum moments and theorem criteria")
    s.add_argument("--pool")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_diagnose)

    s = sub.add_parser("simulate", help="Monte-Carlo MSE and relative efficiency")
    s.add_argument("--pool")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, SimulationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    raise SystemExit(main())
