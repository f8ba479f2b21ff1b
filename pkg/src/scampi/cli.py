"""Command-line interface for the benchmark harness.

Subcommands:

* ``run <config>``  -- run the experiment described by a config file;
* ``fig6|fig7|fig8`` -- bundled reproduction presets (SCAMPI vs SD across
  sizes; EM vs uniform prior; phase-shifter reduction robustness);
* ``estimate``      -- single-instance debug run with an optional
  per-iteration trace CSV.

Common flags ``--seed``, ``--trials``, ``--out``, ``--jobs``, ``--timing``
override the corresponding config fields.
"""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import bench
from .augment import augment
from .backend import ACTIVE_BACKEND
from .core import run_em_scampi, run_scampi


def _add_overrides(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=None, help="master seed override")
    p.add_argument("--trials", type=int, default=None, help="trials per point")
    p.add_argument("--out", type=str, default=None, help="output directory")
    p.add_argument("--jobs", type=int, default=None, help="parallel worker processes")
    p.add_argument("--timing", choices=("off", "wall"), default=None,
                   help="record wall time per trial (off keeps results.csv "
                        "byte-reproducible)")


def _apply_overrides(cfg: bench.ExperimentConfig, args) -> bench.ExperimentConfig:
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.trials is not None:
        updates["trials"] = args.trials
    if args.out is not None:
        updates["out_dir"] = args.out
    if args.jobs is not None:
        updates["jobs"] = args.jobs
    if args.timing is not None:
        updates["timing"] = args.timing
    return replace(cfg, **updates) if updates else cfg


def _cmd_experiment(cfg: bench.ExperimentConfig) -> int:
    table = bench.run_experiment(cfg)
    out = Path(cfg.out_dir)
    print(f"backend: {ACTIVE_BACKEND}")
    print(f"wrote {out / 'results.csv'} ({len(table.rows)} rows) "
          f"and {out / ('plot_' + cfg.name + '.svg')}")
    for row in table.sorted_rows():
        print(f"  {row.algorithm:16s} {row.size_m}x{row.size_n} p={row.p:g} "
              f"snr={row.snr_db:g} dB  nmse={row.nmse_mean:.3e} "
              f"(std {row.nmse_std:.1e}, {row.trials} trials)")
    return 0


def _parse_size(text: str):
    m_s, _, n_s = text.partition("x")
    return int(m_s), int(n_s)


def _cmd_estimate(args) -> int:
    M, N = _parse_size(args.size)
    Q = bench._q_for(args.q_rule, M * N)
    snr = None if args.snr.lower() in ("inf", "none") else float(args.snr)
    chan, net, meas, diff = bench.build_instance(
        args.seed, M, N, Q, args.L, 12.0, 12.0, 1.0, snr, args.p, args.trial,
        args.beam_jitter, args.angles)
    sys_aug = augment(net, diff, meas)
    options = {"omega": args.omega, "pooled_noise": args.pooled}
    if args.t_max is not None:
        options["t_max"] = args.t_max
    if args.algorithm in ("uniform_scampi", "em_scampi"):
        opts = bench._scampi_options(args.algorithm, options)
        runner = run_em_scampi if args.algorithm == "em_scampi" else run_scampi
        rep = runner(sys_aug, opts, truth=chan.h, trace=args.trace)
        print(f"backend: {ACTIVE_BACKEND}")
        print(f"{args.algorithm} on {M}x{N} (Q={Q}, p={args.p:g}, "
              f"snr={'inf' if snr is None else snr} dB, trial {args.trial})")
        print(f"  converged={rep.converged} after {rep.iterations} iterations, "
              f"final tau={rep.tau_trace[-1]:.3e}")
        print(f"  nmse={rep.nmse:.6e}")
        if rep.learned_prior is not None:
            lp = rep.learned_prior
            print(f"  learned prior: lam={lp.lam:.4g} a={lp.a:.4g} v={lp.v:.4g}")
        if rep.learned_noise_summary:
            ns = rep.learned_noise_summary
            print(f"  learned noise: delta={ns['delta_mean']:.4g} "
                  f"upsilon={ns['upsilon_mean']:.4g}")
        if args.trace:
            print(f"  trace written to {args.trace}")
    else:
        from . import baselines
        if args.algorithm == "sd":
            rep = baselines.sd_estimate(meas, net, args.L, args.square,
                                        shape=(M, N), truth=chan.h)
        elif args.algorithm == "omp":
            rep = baselines.omp_estimate(meas, net, args.k, truth=chan.h)
        else:
            h_est = baselines.ls_estimate(meas, net)
            nmse = bench.compute_nmse(h_est, chan.h)
            print(f"ls on {M}x{N} (Q={Q}): nmse={nmse:.6e}")
            return 0
        print(f"{args.algorithm} on {M}x{N} (Q={Q}): nmse={rep.nmse:.6e} "
              f"({rep.iterations} steps)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scampi",
        description="Beamspace channel estimation benchmarks (cosparse AMP)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a config file")
    p_run.add_argument("config", type=str, help="path to a key = value config")
    _add_overrides(p_run)

    for fig, help_text in (("fig6", "SCAMPI vs support detection across sizes"),
                           ("fig7", "EM-learned vs uniform prior across sizes"),
                           ("fig8", "phase-shifter reduction robustness")):
        p_fig = sub.add_parser(fig, help=help_text)
        _add_overrides(p_fig)

    p_est = sub.add_parser("estimate", help="single-instance debug estimate")
    p_est.add_argument("--size", default="32x32", help="grid as MxN")
    p_est.add_argument("--snr", default="30", help="SNR in dB, or 'inf'")
    p_est.add_argument("--algorithm", default="em_scampi",
                       choices=("uniform_scampi", "em_scampi", "sd", "ls", "omp"))
    p_est.add_argument("--seed", type=int, default=0)
    p_est.add_argument("--trial", type=int, default=0)
    p_est.add_argument("--p", type=float, default=0.0,
                       help="phase-shifter reduction ratio")
    p_est.add_argument("--q-rule", default="half", dest="q_rule")
    p_est.add_argument("--L", type=int, default=3,
                       help="paths beyond line of sight (L+1 total)")
    p_est.add_argument("--omega", type=float, default=0.0)
    p_est.add_argument("--t-max", type=int, default=None, dest="t_max")
    p_est.add_argument("--pooled", action=argparse.BooleanOptionalAction,
                       default=True,
                       help="pooled noise learning (matches the bundled "
                            "configs; --no-pooled learns per row)")
    p_est.add_argument("--beam-jitter", type=float, default=0.15,
                       dest="beam_jitter", help="AoA jitter in beam spacings")
    p_est.add_argument("--angles", choices=("grid", "uniform"), default="grid",
                       help="AoA draw: beam-grid with jitter, or uniform sines")
    p_est.add_argument("--square", type=int, default=8, help="sd square side")
    p_est.add_argument("--k", type=int, default=64, help="omp sparsity")
    p_est.add_argument("--trace", type=str, default=None,
                       help="write per-iteration trace CSV here")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    args = build_parser().parse_args(argv)
    if args.command == "run":
        cfg = bench.load_config(args.config)
        return _cmd_experiment(_apply_overrides(cfg, args))
    if args.command in ("fig6", "fig7", "fig8"):
        cfg = bench.bundled_config(args.command)
        return _cmd_experiment(_apply_overrides(cfg, args))
    if args.command == "estimate":
        return _cmd_estimate(args)
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
