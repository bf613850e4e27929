"""Sweep the tracker mixing step for DIKF and PIKF on a scenario.

The sweep uses predicted (second-moment) MSE only, so it needs no Monte Carlo.

    python scripts/beta_sweep.py [--config configs/default.toml] [--factors 0.25 0.5 1 1.5 1.9]
"""

import argparse
from pathlib import Path

from distkf.gains import GainConfig, precompute_schedule
from distkf.harness import load_config, mse_db, validate

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(ROOT / "configs" / "default.toml"))
    ap.add_argument("--factors", type=float, nargs="+", default=[0.25, 0.5, 1.0, 1.5, 1.9])
    args = ap.parse_args()

    scn = validate(load_config(args.config))
    pr, T = scn.problem, scn.config.T
    lam = pr.network.lambda_max
    print(f"lambda_max = {lam:.4f}; beta = factor / lambda_max; network-average MSE at i={T} (dB)")
    print(f"{'factor':>7s} {'dikf':>9s} {'pikf':>9s}")
    for f in args.factors:
        row = []
        for kind in ("dikf", "pikf"):
            s = precompute_schedule(pr.model, pr.suite, pr.network, pr.pseudo,
                                    GainConfig(T=T, beta=f / lam), kind)
            row.append(mse_db(float(s.predicted_mse[-1].mean())))
        print(f"{f:7.2f} {row[0]:9.3f} {row[1]:9.3f}")


if __name__ == "__main__":
    main()
