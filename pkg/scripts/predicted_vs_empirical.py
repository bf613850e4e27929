"""Compare each distributed filter's precomputed MSE with Monte-Carlo MSE over time.

    python scripts/predicted_vs_empirical.py [--config configs/path3.toml] [--trials 4000]
"""

import argparse
from pathlib import Path

from distkf.harness import ScenarioConfig, load_config, run

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(ROOT / "configs" / "path3.toml"))
    ap.add_argument("--trials", type=int, default=4000)
    ap.add_argument("--threads", type=int, default=4)
    args = ap.parse_args()

    d = load_config(args.config).to_dict()
    d.update(trials=args.trials, estimators=["ckf", "cikf", "dikf", "pikf"])
    rep = run(ScenarioConfig.from_dict(d), threads=args.threads)
    print(f"{'est':5s} {'time':>5s} {'empirical':>10s} {'predicted':>10s} {'rel':>8s}")
    for est, res in rep.results.items():
        pred = res.predicted_mse.mean(axis=1)
        for t, m, p in zip(rep.record_times, res.mse_avg, pred):
            print(f"{est:5s} {t:5d} {m:10.5f} {p:10.5f} {m / p - 1:+8.2%}")


if __name__ == "__main__":
    main()
