"""Shared helpers for the experiment scripts."""

import json
from pathlib import Path

import numpy as np

from cdacal.pipeline import comparison_doc


def summarize(per_seed: dict[int, list[dict]], keys=("acc", "ece", "sce", "tace", "brier", "uce")) -> list[dict]:
    """Mean and std of each metric per method across seeds."""
    methods = [r["method"] for r in next(iter(per_seed.values()))]
    out = []
    for method in methods:
        rows = [next(r for r in rows if r["method"] == method) for rows in per_seed.values()]
        row = {"method": method}
        for k in keys:
            vals = np.array([r[k] for r in rows])
            row[k] = float(vals.mean())
            row[f"{k}_std"] = float(vals.std())
        out.append(row)
    return out


def print_summary(rows, keys=("acc", "ece", "sce", "tace", "brier", "uce")):
    print(f"{'Method':<15}" + "".join(f"{k.upper():>16}" for k in keys))
    for r in rows:
        cells = "".join(f"{r[k]:>9.4f}±{r[k + '_std']:.3f}" for k in keys)
        print(f"{r['method']:<15}{cells}")


def write(out, per_seed, summary, **settings):
    if out is None:
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = comparison_doc(summary, per_seed={str(s): rows for s, rows in per_seed.items()}, **settings)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"wrote {path}")
