"""Command-line entry point.

Subcommands: simulate, compare, certify, sweep. Exit codes: 0 success,
2 configuration problem, 3 numeric blowup during integration.
"""

from __future__ import annotations

import argparse
import re
import sys

from .errors import ConfigError, NumericBlowupError, ParameterError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3


def parse_seeds(text):
    """Comma-separated nonnegative integers; 'a-b' is an inclusive range."""
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        m = re.fullmatch(r"(\d+)-(\d+)", part)
        if m:
            lo, hi = int(m.group(1)), int(m.group(2))
            if hi < lo:
                raise ConfigError([f"seeds: empty range {part!r}"])
            seeds.extend(range(lo, hi + 1))
        elif re.fullmatch(r"\d+", part):
            seeds.append(int(part))
        else:
            raise ConfigError([f"seeds: cannot parse {part!r}"])
    if not seeds:
        raise ConfigError(["seeds: no seeds given"])
    return seeds


def build_parser():
    parser = argparse.ArgumentParser(
        prog="delaynets",
        description="Delayed-network simulation with decentralized adaptive "
                    "gains, dominance certificates, and Lyapunov monitors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seeds=False):
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out-dir", default=None, help="override outputs.dir")
        p.add_argument("--horizon", type=float, default=None,
                       help="override sim.horizon")
        p.add_argument("--step", type=float, default=None, help="override sim.h")
        if seeds:
            p.add_argument("--seeds", required=True,
                           help="comma list / a-b ranges, e.g. 1-10,20")

    p_sim = sub.add_parser("simulate", help="run one configuration")
    common(p_sim)
    p_sim.add_argument("--seed", type=int, default=None,
                       help="override seeds (graph_seed=s, phi seed=s+10000)")

    p_cmp = sub.add_parser("compare", help="adaptive vs fixed over seeds")
    common(p_cmp, seeds=True)
    p_cmp.add_argument("--fixed-config", required=True,
                       help="JSON config with the fixed controller")
    p_cmp.add_argument("--workers", type=int, default=1)

    p_cert = sub.add_parser("certify", help="dominance certificate + gain bound")
    p_cert.add_argument("--config", required=True)
    p_cert.add_argument("--out-dir", default=None)
    p_cert.add_argument("--budget", type=int, default=None,
                        help="override certify.budget")

    p_swp = sub.add_parser("sweep", help="one config across seeds")
    common(p_swp, seeds=True)
    p_swp.add_argument("--workers", type=int, default=1)
    return parser


def _apply_overrides(config, args):
    from .experiments import with_seed

    if getattr(args, "horizon", None) is not None:
        config.sim.horizon = float(args.horizon)
    if getattr(args, "step", None) is not None:
        config.sim.h = float(args.step)
    if getattr(args, "seed", None) is not None:
        config = with_seed(config, args.seed)
    if getattr(args, "out_dir", None) is not None:
        config.outputs.dir = args.out_dir
    return config


def _cmd_simulate(args):
    from .experiments import load_config, run

    config = _apply_overrides(load_config(args.config), args)
    traj = run(config)
    s = traj.summary
    gain = "" if s["mean_final_gain"] is None else \
        f"; mean final gain {s['mean_final_gain']:.4g}"
    print(
        f"converged {s['n_converged']}/{s['n_nodes']} nodes "
        f"(|x| < {s['x_tol']} over final {s['final_window_fraction']:.0%}); "
        f"max final |x| {s['max_final_x']:.3g}{gain}"
    )
    print(f"wrote {config.outputs.dir}")
    return EXIT_OK


def _cmd_compare(args):
    from .experiments import compare, load_config

    cfg_a = _apply_overrides(load_config(args.config), args)
    cfg_f = _apply_overrides(load_config(args.fixed_config), args)
    if args.out_dir is None and cfg_a.outputs.dir is None:
        raise ConfigError(["outputs.dir: required (or pass --out-dir)"])
    rows = compare(cfg_a, cfg_f, parse_seeds(args.seeds),
                   out_dir=args.out_dir, workers=args.workers)
    print("seed adaptive_all fixed_all adaptive_gain fixed_worst_x")
    for row in rows:
        print(
            f"{row['seed']} {str(row['adaptive_converged_all']).lower()} "
            f"{str(row['fixed_converged_all']).lower()} "
            f"{row['adaptive_mean_final_gain']:.4g} "
            f"{row['fixed_worst_final_x']:.3g}"
        )
    return EXIT_OK


def _cmd_certify(args):
    from .experiments import certify, load_config

    config = load_config(args.config)
    if args.budget is not None:
        config.certify.budget = int(args.budget)
    if args.out_dir is not None:
        config.outputs.dir = args.out_dir
    results = certify(config)
    rep = results["input_matrix"]
    verdict = "PASS" if rep.passed else "FAIL"
    print(f"input-matrix column dominance: {verdict} "
          f"(c_star={rep.c_star:.6g}, samples={rep.samples_checked})")
    print(f"a estimate {results['a_estimate']:.6g} "
          f"(x{1.2:g} inflation -> {results['a_used']:.6g})")
    if results["gain_bound"] is not None:
        print(f"required uniform gain level: {results['gain_bound']:.6g}")
    if results["weights"] is not None:
        ws = results["weights"]
        print(f"weight search: {'feasible' if ws.feasible else 'infeasible'}"
              + (f" (c={ws.c:.6g})" if ws.feasible else ""))
    return EXIT_OK


def _cmd_sweep(args):
    from .experiments import load_config, sweep

    config = _apply_overrides(load_config(args.config), args)
    if args.out_dir is None and config.outputs.dir is None:
        raise ConfigError(["outputs.dir: required (or pass --out-dir)"])
    rows = sweep(config, parse_seeds(args.seeds), out_dir=args.out_dir,
                 workers=args.workers)
    print("seed converged_all n_converged mean_final_gain max_final_x")
    for row in rows:
        gain = "-" if row["mean_final_gain"] is None else \
            f"{row['mean_final_gain']:.4g}"
        print(
            f"{row['seed']} {str(row['converged_all']).lower()} "
            f"{row['n_converged']} {gain} {row['max_final_x']:.3g}"
        )
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "compare": _cmd_compare,
    "certify": _cmd_certify,
    "sweep": _cmd_sweep,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericBlowupError as exc:
        print(f"numeric blowup: {exc}", file=sys.stderr)
        return EXIT_BLOWUP


if __name__ == "__main__":
    sys.exit(main())
