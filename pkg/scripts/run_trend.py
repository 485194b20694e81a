"""Run generate, train and evaluate for a config and summarise the trends.

Prints the seed-mean eps_a curve over r for every (variant, N), the seed-mean
eps_c and eps_p against N at the largest r, and how often BiFi-NN beats
MPOD-NN seed by seed.  Figure tables are written next to the metrics.

    python scripts/run_trend.py scripts/configs/elliptic1d_trend.json [--output-dir DIR]
"""
import argparse
import time
from pathlib import Path

from bifinn import cli
from bifinn.config import ExperimentConfig
from bifinn.io import read_csv
from bifinn.trends import decreases_then_saturates, paired_wins, seed_mean_curve


def summarise(cfg, rows):
    r_max = max(cfg.r)
    Ns = sorted(cfg.N_train)
    if len(cfg.r) > 1:
        print("seed-mean eps_a against r =", sorted(cfg.r))
        for variant in cfg.variants:
            for N in Ns:
                _, ea = seed_mean_curve(rows, "eps_a", variant, N)
                _, ep = seed_mean_curve(rows, "eps_p", variant, N)
                print(f"  {variant:11s} N={N:4d} " + " ".join(f"{e:.2e}" for e in ea)
                      + f"  saturates={decreases_then_saturates(ea, ep)}")
    print(f"seed means at r={r_max}")
    for variant in cfg.variants:
        for N in Ns:
            ranks, ec = seed_mean_curve(rows, "eps_c", variant, N)
            _, ea = seed_mean_curve(rows, "eps_a", variant, N)
            _, ep = seed_mean_curve(rows, "eps_p", variant, N)
            i = list(ranks).index(r_max)
            print(f"  {variant:11s} N={N:4d} eps_a {ea[i]:.3e} eps_c {ec[i]:.3e} eps_p {ep[i]:.3e}")
    if {"bifinn", "mpodnn"} <= set(cfg.variants):
        for N in Ns:
            for metric in ("eps_a", "eps_c"):
                wins, n = paired_wins(rows, metric, "bifinn", "mpodnn", N, r_max)
                print(f"  N={N}: bifinn {metric} < mpodnn {metric} in {wins}/{n} seeds")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--output-dir")
    args = ap.parse_args()
    cfg = ExperimentConfig.load(args.config)
    if args.output_dir:
        cfg.output_dir = args.output_dir
    t0 = time.perf_counter()
    cli.cmd_generate(cfg)
    cli.cmd_train(cfg)
    cli.cmd_evaluate(cfg)
    print(f"pipeline finished in {time.perf_counter() - t0:.0f} s")
    edir = cli.eval_dir(cfg)
    for fig in cli.FIGURES:
        cli.cmd_figure([edir / "metrics.csv"], fig, edir / f"{fig}.csv")
    problems = cli.cmd_verify(cfg)
    print("verify:", "OK" if not problems else problems)
    summarise(cfg, read_csv(edir / "metrics.csv"))


if __name__ == "__main__":
    main()
