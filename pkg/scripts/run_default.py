"""Run the default comparison scenario and print a short table.

    python scripts/run_default.py [--config configs/default.toml] [--out runs/default] [--threads 4]
"""

import argparse
import json
from pathlib import Path

from distkf.harness import emit, load_config, run, summary

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(ROOT / "configs" / "default.toml"))
    ap.add_argument("--out", default=str(ROOT / "runs" / "default"))
    ap.add_argument("--threads", type=int, default=4)
    ap.add_argument("--trials", type=int, help="override the trial count")
    args = ap.parse_args()

    cfg = load_config(args.config)
    if args.trials:
        cfg.trials = args.trials
    rep = run(cfg, threads=args.threads)
    emit(rep, args.out)
    s = summary(rep)
    print(f"{'estimator':10s} {'MSE':>10s} {'dB':>9s} {'stderr':>10s}  (i={s['final_time']}, {cfg.trials} trials)")
    for est, f in s["final"].items():
        print(f"{est:10s} {f['mse']:10.5f} {f['mse_db']:9.3f} {f['stderr']:10.5f}")
    if s["ordering"]:
        print("ordering:", json.dumps([(c["lower"], c["higher"], c["pass"]) for c in s["ordering"]["checks"]]))
    print(f"wrote {args.out}/mse.csv, summary.json, config.echo")


if __name__ == "__main__":
    main()
