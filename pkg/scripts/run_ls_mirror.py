"""CE vs LS vs CDA-LS training on the synthetic long-tailed mirror.

    python3 scripts/run_ls_mirror.py --seeds 5 --alpha 0.1 --gamma 0.01
"""

import argparse

from _common import print_summary, summarize, write

from cdacal.datagen import sample_gaussian_mixture
from cdacal.pipeline import compare_smoothing, fit_eval_parts, mirror_spec


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--ratio", type=float, default=100.0)
    ap.add_argument("--alpha", type=float, default=0.1)
    ap.add_argument("--gamma", type=float, default=0.01)
    ap.add_argument("--out")
    args = ap.parse_args()

    per_seed = {}
    for seed in range(args.seeds):
        spec = mirror_spec(seed, ratio=args.ratio)
        data = sample_gaussian_mixture(spec.data)
        _, eval_set = fit_eval_parts(data, seed)
        rows, _ = compare_smoothing(data.train(), eval_set, spec.train, args.alpha, args.gamma)
        per_seed[seed] = rows
        print(f"seed {seed}: " + "  ".join(f"{r['method']} ECE {r['ece']:.4f}" for r in rows))
    summary = summarize(per_seed)
    print_summary(summary)
    write(args.out, per_seed, summary, ratio=args.ratio, alpha=args.alpha, gamma=args.gamma, seeds=args.seeds)


if __name__ == "__main__":
    main()
