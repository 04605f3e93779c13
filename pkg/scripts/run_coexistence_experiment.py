#!/usr/bin/env python3
"""Adaptive-threshold coexistence experiment.

Runs the hidden-base scenario over a seed sweep with adaptation off and
on, prints the pooled median downlink file throughput per technology,
and writes the per-run CSV under ./results/.

    python scripts/run_coexistence_experiment.py [--runs 10] [--seed 1]
"""

import argparse
from pathlib import Path

from coexsim.config import build_scenario, load_config
from coexsim.simulator import Simulator, jain_index, summarize


def pooled_medians(seeds, adaptive):
    wifi, lte = [], []
    for seed in seeds:
        cfg = load_config("figure4_coexistence")
        cfg["seed"] = seed
        cfg["simulate"]["adaptive_ed"] = adaptive
        metrics = Simulator(build_scenario(cfg)).run()
        wifi += metrics.file_throughputs_mbps.get("sta1", [])
        lte += metrics.file_throughputs_mbps.get("ue1", [])
    return summarize(wifi), summarize(lte), len(wifi), len(lte)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--runs", type=int, default=10)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--outdir", default="results")
    args = parser.parse_args()

    seeds = [args.seed + i for i in range(args.runs)]
    wifi_off, lte_off, n_wo, n_lo = pooled_medians(seeds, False)
    wifi_on, lte_on, n_wn, n_ln = pooled_medians(seeds, True)

    print(f"adaptive off: wifi median {wifi_off:5.1f} Mbps ({n_wo} files), "
          f"lte median {lte_off:5.1f} Mbps ({n_lo} files)")
    print(f"adaptive on : wifi median {wifi_on:5.1f} Mbps ({n_wn} files), "
          f"lte median {lte_on:5.1f} Mbps ({n_ln} files)")
    print(f"wifi gain x{wifi_on / wifi_off:.2f}, lte change "
          f"{(lte_on - lte_off) / lte_off * 100:+.0f}%, "
          f"sum {wifi_off + lte_off:.1f} -> {wifi_on + lte_on:.1f} Mbps, "
          f"fairness {jain_index([wifi_off, lte_off]):.3f} -> "
          f"{jain_index([wifi_on, lte_on]):.3f}")

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    from coexsim.cli import main as cli_main
    out = outdir / "coexistence_comparison.csv"
    rc = cli_main([
        "simulate", "--config", "figure4_coexistence",
        "--seed", str(args.seed), "--runs", str(args.runs),
        "--compare-adaptive", "--out", str(out),
    ])
    if rc != 0:
        raise SystemExit(rc)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
