"""End-to-end comparisons: baseline vs TS vs CDA-TS, CE vs LS vs CDA-LS, and
self-distillation with fixed, optimal and class-aware temperatures.

The in-memory functions return metric rows keyed by method name; `run_pipeline`
additionally writes every intermediate artifact to an output directory.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import io
from .calibrate import CdaConfig, TsFitConfig, apply_temperature, cda_temperature, temperature_line_search
from .core import ClassFrequencyProfile, TemperatureVector
from .datagen import Dataset, SyntheticSpec, sample_gaussian_mixture, stratified_holdout
from .distill import DistillConfig, LinearModel, TrainConfig, model_logits, self_distill, train
from .errors import InvalidSpecError
from .metrics import SCHEMA_VERSION, MetricsConfig, bin_stats, confidence_by_class, metric_report, reliability_rows
from .smooth import CDA_LS_GAMMA

ROW_KEYS = ("acc", "ece", "sce", "tace", "brier", "uce", "nll")


@dataclass
class PipelineSpec:
    data: SyntheticSpec = field(default_factory=SyntheticSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    fit: TsFitConfig = field(default_factory=TsFitConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    cda_gamma: float = CdaConfig().gamma
    # optional extra comparisons; None skips them
    ls: dict | None = None
    sd: dict | None = None
    split_seed: int = 0

    @classmethod
    def from_dict(cls, doc: dict) -> PipelineSpec:
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known - {"out_dir", "schema_version"}
        if unknown:
            raise InvalidSpecError(f"unknown pipeline keys: {sorted(unknown)}")
        try:
            return cls(
                data=SyntheticSpec(**doc.get("data", {})),
                train=TrainConfig(**doc.get("train", {})),
                fit=TsFitConfig(**doc.get("fit", {})),
                metrics=MetricsConfig(**doc.get("metrics", {})),
                cda_gamma=float(doc.get("cda_gamma", CdaConfig().gamma)),
                ls=doc.get("ls"),
                sd=doc.get("sd"),
                split_seed=int(doc.get("split_seed", 0)),
            )
        except TypeError as exc:
            raise InvalidSpecError(f"bad pipeline spec: {exc}") from None

    def to_dict(self) -> dict:
        return asdict(self)


def mirror_spec(seed: int = 0, ratio: float = 100.0, max_per_class: int = 10200) -> PipelineSpec:
    """Desk-scale analog of a CIFAR-LT run.

    10 classes, long-tailed training split of about 20k samples at ratio 100,
    a stratified (long-tailed) validation split for fitting temperatures and
    a balanced test split of 1000 per class for evaluation. Unregularized
    logistic regression on 32-d features overfits enough to be overconfident.
    """
    return PipelineSpec(
        data=SyntheticSpec(
            num_classes=10, max_per_class=max_per_class, imbalance_ratio=ratio, feature_dim=32,
            class_separation=2.0, seed=seed, holdout_fraction=0.2, test_per_class=1000,
        ),
        train=TrainConfig(epochs=30, batch_size=128, learning_rate=0.1, momentum=0.9, seed=seed),
    )


def fit_eval_parts(dataset: Dataset, seed: int = 0) -> tuple[Dataset, Dataset]:
    """The split temperatures are fitted on, and the split metrics are reported on.

    Uses (val, test) when the dataset has a test split; otherwise the
    validation split is halved class-stratified so fitting and evaluation
    never share rows.
    """
    val, test = dataset.val(), dataset.test()
    if val is None:
        raise InvalidSpecError("dataset has no validation split to fit temperatures on")
    if test is not None:
        return val, test
    mask = stratified_holdout(val.labels, 0.5, np.random.default_rng(seed))
    return val.subset(~mask), val.subset(mask)


def metric_row(method: str, probs, cfg: MetricsConfig, **extra) -> dict:
    report = metric_report(probs, cfg)
    row = {"method": method}
    row.update({k: report[k] for k in ROW_KEYS})
    row.update(extra)
    return row


@dataclass
class CalibrationRun:
    rows: list[dict]
    t_opt: float
    cda_temps: TemperatureVector
    probs: dict
    by_class: dict


def compare_calibration(
    model: LinearModel,
    train_profile: ClassFrequencyProfile,
    fit_set: Dataset,
    eval_set: Dataset,
    fit_cfg: TsFitConfig = TsFitConfig(),
    gamma: float = CdaConfig().gamma,
    metrics_cfg: MetricsConfig = MetricsConfig(),
) -> CalibrationRun:
    """Baseline, scalar TS and CDA-TS rows for one trained model."""
    fit = temperature_line_search(model_logits(model, fit_set), fit_cfg)
    n = train_profile.num_classes
    temps = {
        "Baseline": TemperatureVector.constant(1.0, n),
        "TS": TemperatureVector.constant(fit.t_opt, n),
        "CDA-TS": cda_temperature(fit.t_opt, train_profile, CdaConfig(gamma)),
    }
    eval_logits = model_logits(model, eval_set)
    rows, probs, by_class = [], {}, {}
    for name, t in temps.items():
        p = apply_temperature(eval_logits, t)
        probs[name] = p
        by_class[name] = confidence_by_class(p, train_profile)
        scalar = None if name == "CDA-TS" else float(t.t[0])
        rows.append(metric_row(name, p, metrics_cfg, temperature=scalar))
    return CalibrationRun(rows, fit.t_opt, temps["CDA-TS"], probs, by_class)


def compare_smoothing(
    train_set: Dataset,
    eval_set: Dataset,
    cfg: TrainConfig,
    alpha: float = 0.1,
    gamma: float = CDA_LS_GAMMA,
    metrics_cfg: MetricsConfig = MetricsConfig(),
) -> tuple[list[dict], dict]:
    """Train with CE, LS(alpha) and CDA-LS(alpha, gamma); rows on `eval_set`."""
    rows, models = [], {}
    for name, mode in (("Baseline", "ce"), ("LS", "ls"), ("CDA-LS", "cda-ls")):
        result = train(train_set, replace(cfg, loss_mode=mode, alpha=alpha, gamma=gamma))
        models[name] = result
        p = apply_temperature(model_logits(result.model, eval_set), TemperatureVector.constant(1.0, eval_set.num_classes))
        rows.append(metric_row(name, p, metrics_cfg))
    return rows, models


def compare_distillation(
    teacher: LinearModel,
    train_set: Dataset,
    fit_set: Dataset,
    eval_set: Dataset,
    cfg: TrainConfig,
    fuse_lambda: float = 0.5,
    fixed_t: float = 4.0,
    fit_cfg: TsFitConfig = TsFitConfig(),
    gamma: float = CdaConfig().gamma,
    metrics_cfg: MetricsConfig = MetricsConfig(),
) -> tuple[list[dict], dict]:
    """Self-distillation rows with a fixed T, the teacher's T_opt and its CDA vector.

    The "Baseline" row is the teacher itself.
    """
    n = train_set.num_classes
    t_opt = temperature_line_search(model_logits(teacher, fit_set), fit_cfg).t_opt
    variants = {
        "SD": TemperatureVector.constant(fixed_t, n),
        "SD Opt. T": TemperatureVector.constant(t_opt, n),
        "SD CDA Opt. T": cda_temperature(t_opt, train_set.profile, CdaConfig(gamma)),
    }
    ones = TemperatureVector.constant(1.0, n)
    rows = [metric_row("Baseline", apply_temperature(model_logits(teacher, eval_set), ones), metrics_cfg)]
    results = {}
    for name, temps in variants.items():
        res = self_distill(teacher, train_set, DistillConfig(temps, fuse_lambda, cfg))
        results[name] = res
        p = apply_temperature(model_logits(res.model, eval_set), ones)
        scalar = float(temps.t[0]) if temps.is_constant else None
        rows.append(metric_row(name, p, metrics_cfg, temperature=scalar))
    return rows, {"t_opt": t_opt, "students": results, "temps": variants}


def comparison_doc(rows: list[dict], **settings) -> dict:
    return {"schema_version": SCHEMA_VERSION, "kind": "comparison", "rows": rows, "settings": settings}


def format_table(rows: list[dict]) -> str:
    head = f"{'Method':<15}" + "".join(f"{k.upper():>9}" for k in ("acc", "ece", "sce", "tace", "brier", "uce"))
    lines = [head]
    for r in rows:
        lines.append(f"{r['method']:<15}" + "".join(f"{r[k]:>9.4f}" for k in ("acc", "ece", "sce", "tace", "brier", "uce")))
    return "\n".join(lines)


def run_pipeline(spec: PipelineSpec, out_dir) -> dict:
    """gen-data -> train -> fit-ts -> cda-temps -> metrics, with every artifact on disk.

    Returns the comparison document that is also written to
    ``out_dir/comparison.json``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataset = sample_gaussian_mixture(spec.data)
    io.save_dataset(dataset, out / "data")
    train_set = dataset.train()
    fit_set, eval_set = fit_eval_parts(dataset, spec.split_seed)

    base = train(train_set, replace(spec.train, loss_mode="ce"), val=fit_set)
    io.save_model(base.model, out / "baseline_model.json", {"config": asdict(spec.train), "seed": spec.train.seed})
    io.write_rows_csv(base.trace, ["epoch", "train_loss", "val_acc", "val_ece"], out / "baseline_trace.csv")
    io.save_logits(model_logits(base.model, fit_set), out / "fit_logits.json")
    io.save_logits(model_logits(base.model, eval_set), out / "eval_logits.json")

    run = compare_calibration(base.model, train_set.profile, fit_set, eval_set, spec.fit, spec.cda_gamma, spec.metrics)
    n = train_set.num_classes
    io.dump_json(io.temperatures_doc(run.t_opt, TemperatureVector.constant(run.t_opt, n)), out / "ts_temps.json")
    io.dump_json(
        io.temperatures_doc(run.t_opt, run.cda_temps, spec.cda_gamma, train_set.profile), out / "cda_temps.json"
    )
    for name, probs in run.probs.items():
        slug = name.lower().replace(" ", "_")
        io.dump_json(metric_report(probs, spec.metrics), out / f"report_{slug}.json")
        io.write_rows_csv(
            reliability_rows(bin_stats(probs, spec.metrics)),
            ["bin_lo", "bin_hi", "n", "acc", "conf", "gap"],
            out / f"reliability_{slug}.csv",
        )
        io.write_rows_csv(
            run.by_class[name], ["class", "count", "freq_normalized", "mean_confidence"], out / f"by_class_{slug}.csv"
        )
    rows = list(run.rows)

    if spec.ls is not None:
        ls_rows, _ = compare_smoothing(
            train_set, eval_set, spec.train,
            float(spec.ls.get("alpha", 0.1)), float(spec.ls.get("gamma", CDA_LS_GAMMA)), spec.metrics,
        )
        rows.extend(r for r in ls_rows if r["method"] != "Baseline")
    if spec.sd is not None:
        sd_rows, _ = compare_distillation(
            base.model, train_set, fit_set, eval_set, spec.train,
            float(spec.sd.get("lambda", 0.5)), float(spec.sd.get("fixed_t", 4.0)),
            spec.fit, spec.cda_gamma, spec.metrics,
        )
        rows.extend(r for r in sd_rows if r["method"] != "Baseline")

    doc = comparison_doc(
        rows,
        t_opt=run.t_opt,
        cda_temps=[float(v) for v in run.cda_temps.t],
        train_counts=[int(c) for c in train_set.profile.counts],
        n_fit=len(fit_set),
        n_eval=len(eval_set),
        spec=spec.to_dict(),
    )
    io.dump_json(doc, out / "comparison.json")
    return doc
