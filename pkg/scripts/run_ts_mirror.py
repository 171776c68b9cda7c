"""Baseline vs TS vs CDA-TS on the synthetic long-tailed mirror, over several seeds.

    python3 scripts/run_ts_mirror.py --seeds 5 --ratio 100 --out results/ts_ratio100.json
"""

import argparse

from _common import print_summary, summarize, write

from cdacal.pipeline import compare_calibration, fit_eval_parts, mirror_spec
from cdacal.datagen import sample_gaussian_mixture
from cdacal.distill import train


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--ratio", type=float, default=100.0)
    ap.add_argument("--gamma", type=float, default=0.1)
    ap.add_argument("--out")
    args = ap.parse_args()

    per_seed, wins = {}, {"ts": 0, "cda": 0}
    for seed in range(args.seeds):
        spec = mirror_spec(seed, ratio=args.ratio)
        data = sample_gaussian_mixture(spec.data)
        tr = data.train()
        fit_set, eval_set = fit_eval_parts(data, seed)
        base = train(tr, spec.train)
        run = compare_calibration(base.model, tr.profile, fit_set, eval_set, gamma=args.gamma)
        per_seed[seed] = run.rows
        ece = {r["method"]: r["ece"] for r in run.rows}
        wins["ts"] += ece["TS"] < ece["Baseline"]
        wins["cda"] += ece["CDA-TS"] <= ece["TS"]
        print(f"seed {seed}: T_opt={run.t_opt:.3f}  ECE base {ece['Baseline']:.4f}  TS {ece['TS']:.4f}  "
              f"CDA-TS {ece['CDA-TS']:.4f}")
    summary = summarize(per_seed)
    print_summary(summary)
    print(f"ECE(TS) < ECE(baseline): {wins['ts']}/{args.seeds}; ECE(CDA-TS) <= ECE(TS): {wins['cda']}/{args.seeds}")
    write(args.out, per_seed, summary, ratio=args.ratio, gamma=args.gamma, seeds=args.seeds)


if __name__ == "__main__":
    main()
