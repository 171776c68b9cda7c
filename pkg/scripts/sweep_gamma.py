"""ECE of CDA-TS as a function of gamma, for one trained baseline per seed.

    python3 scripts/sweep_gamma.py --seeds 3 --gammas 0 0.05 0.1 0.2 0.4
"""

import argparse

import numpy as np

from cdacal.calibrate import CdaConfig, apply_temperature, cda_temperature, fit_optimal_temperature
from cdacal.datagen import sample_gaussian_mixture
from cdacal.distill import model_logits, train
from cdacal.metrics import bin_stats, ece
from cdacal.pipeline import fit_eval_parts, mirror_spec


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--ratio", type=float, default=100.0)
    ap.add_argument("--gammas", type=float, nargs="+", default=[0.0, 0.05, 0.1, 0.2, 0.4, 0.8])
    args = ap.parse_args()

    table = np.zeros((args.seeds, len(args.gammas)))
    for seed in range(args.seeds):
        spec = mirror_spec(seed, ratio=args.ratio)
        data = sample_gaussian_mixture(spec.data)
        tr = data.train()
        fit_set, eval_set = fit_eval_parts(data, seed)
        model = train(tr, spec.train).model
        t_opt = fit_optimal_temperature(model_logits(model, fit_set))
        logits = model_logits(model, eval_set)
        for j, g in enumerate(args.gammas):
            temps = cda_temperature(t_opt, tr.profile, CdaConfig(g))
            table[seed, j] = ece(bin_stats(apply_temperature(logits, temps)))
    print(f"{'gamma':>8}{'ECE mean':>12}{'std':>10}")
    for j, g in enumerate(args.gammas):
        print(f"{g:>8.3f}{table[:, j].mean():>12.4f}{table[:, j].std():>10.4f}")


if __name__ == "__main__":
    main()
