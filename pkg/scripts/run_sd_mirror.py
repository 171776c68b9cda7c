"""Self-distillation with T=4, the teacher's T_opt, and its CDA vector.

    python3 scripts/run_sd_mirror.py --seeds 3 --ratio 10
"""

import argparse

from _common import print_summary, summarize, write

from cdacal.datagen import sample_gaussian_mixture
from cdacal.distill import train
from cdacal.pipeline import compare_distillation, fit_eval_parts, mirror_spec


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--ratio", type=float, default=10.0)
    ap.add_argument("--max-per-class", type=int, default=3000)
    ap.add_argument("--fixed-t", type=float, default=4.0)
    ap.add_argument("--fuse-lambda", type=float, default=0.5)
    ap.add_argument("--out")
    args = ap.parse_args()

    per_seed = {}
    for seed in range(args.seeds):
        spec = mirror_spec(seed, ratio=args.ratio, max_per_class=args.max_per_class)
        data = sample_gaussian_mixture(spec.data)
        tr = data.train()
        fit_set, eval_set = fit_eval_parts(data, seed)
        teacher = train(tr, spec.train).model
        rows, extra = compare_distillation(teacher, tr, fit_set, eval_set, spec.train, args.fuse_lambda, args.fixed_t)
        per_seed[seed] = rows
        print(f"seed {seed}: teacher T_opt={extra['t_opt']:.3f}  "
              + "  ".join(f"{r['method']} ECE {r['ece']:.4f}" for r in rows))
    summary = summarize(per_seed)
    print_summary(summary)
    write(args.out, per_seed, summary, ratio=args.ratio, fixed_t=args.fixed_t, fuse_lambda=args.fuse_lambda)


if __name__ == "__main__":
    main()
