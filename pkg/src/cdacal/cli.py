"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Diagnostics go to stderr; machine-readable output goes to files only.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from . import io
from .calibrate import CdaConfig, TsFitConfig, apply_temperature, cda_temperature, temperature_line_search
from .core import TemperatureVector
from .datagen import SyntheticSpec, frequency_profile, sample_gaussian_mixture
from .distill import DistillConfig, TrainConfig, model_logits, self_distill, train
from .errors import DataError, NumericalError
from .metrics import (
    MetricsConfig,
    bin_stats,
    confidence_by_class,
    metric_report,
    reliability_rows,
    uncertainty_bin_stats,
)
from .pipeline import PipelineSpec, format_table, run_pipeline
from .smooth import CDA_LS_GAMMA, SmoothingVector, cda_alpha, soft_labels

log = logging.getLogger("cdacal")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

TRACE_COLUMNS = ["epoch", "train_loss", "val_acc", "val_ece"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _gen_data(args):
    spec = SyntheticSpec(
        num_classes=args.classes,
        max_per_class=args.max_per_class,
        imbalance_ratio=args.ratio,
        feature_dim=args.dim,
        class_separation=args.sep,
        seed=args.seed,
        holdout_fraction=args.holdout_fraction,
        test_per_class=args.test_per_class,
    )
    dataset = sample_gaussian_mixture(spec)
    for path in io.save_dataset(dataset, args.out):
        log.info("wrote %s", path)


def _fit_ts(args):
    logits = io.load_logits(args.val_logits)
    cfg = TsFitConfig(args.t_min, args.t_max, args.steps, args.refine_rounds)
    fit = temperature_line_search(logits, cfg)
    doc = io.temperatures_doc(
        fit.t_opt, TemperatureVector.constant(fit.t_opt, logits.num_classes), 0.0, None,
        nll=fit.nll, fitted_on=str(Path(args.val_logits).resolve()),
    )
    io.dump_json(doc, args.out_temps)
    log.info("T_opt = %.6f (NLL %.6f)", fit.t_opt, fit.nll)


def _cda_temps(args):
    _, doc = io.load_temperatures(args.temps)
    if "t_opt" not in doc:
        raise DataError(f"{args.temps}: no 't_opt' value")
    profile = io.load_profile(args.profile)
    temps = cda_temperature(float(doc["t_opt"]), profile, CdaConfig(args.gamma))
    extra = {"fitted_on": doc["fitted_on"]} if "fitted_on" in doc else {}
    io.dump_json(io.temperatures_doc(doc["t_opt"], temps, args.gamma, profile, **extra), args.out)


def _load_eval_temps(temps_path, logits_path, allow_same):
    temps, doc = io.load_temperatures(temps_path)
    fitted_on = doc.get("fitted_on")
    if fitted_on and not allow_same and Path(fitted_on) == Path(logits_path).resolve():
        raise UsageError(
            f"{temps_path} was fitted on {logits_path}; evaluate on a different split "
            "or pass --allow-same-split"
        )
    return temps


def _apply_ts(args):
    logits = io.load_logits(args.logits)
    temps = _load_eval_temps(args.temps, args.logits, args.allow_same_split)
    io.save_probs(apply_temperature(logits, temps), args.out_probs)


def _smooth_labels(args):
    labels = io.read_labels(args.labels)
    if args.gamma is None:
        smoothing = SmoothingVector.constant(args.alpha, args.classes)
        gamma = 0.0
    else:
        profile = io.load_profile(args.profile) if args.profile else frequency_profile(labels, args.classes)
        smoothing = cda_alpha(args.alpha, profile, args.gamma)
        gamma = args.gamma
    targets = soft_labels(labels, smoothing, args.classes, renormalize=args.renormalize)
    io.save_matrix(
        args.out, targets.values, labels, kind="soft_labels", dtype="f64",
        extra={"row_sums_min": float(targets.row_sums.min()), "row_sums_max": float(targets.row_sums.max()),
               "renormalized": bool(args.renormalize), "smoothing": io.smoothing_doc(args.alpha, gamma, smoothing)},
    )
    if args.out_smoothing:
        io.dump_json(io.smoothing_doc(args.alpha, gamma, smoothing), args.out_smoothing)


def _metrics(args):
    if (args.probs is None) == (args.logits is None):
        raise UsageError("metrics: give exactly one of --probs or --logits")
    if args.temps and args.probs:
        raise UsageError("metrics: --temps only applies to --logits")
    cfg = MetricsConfig(args.bins, args.tace_threshold, args.tace_ranges)
    if args.probs:
        probs = io.load_probs(args.probs)
    else:
        logits = io.load_logits(args.logits)
        temps = _load_eval_temps(args.temps, args.logits, args.allow_same_split) if args.temps else None
        probs = apply_temperature(logits, temps if temps is not None else TemperatureVector.constant(1.0, logits.num_classes))
    io.dump_json(metric_report(probs, cfg), args.report)
    if args.reliability:
        io.write_rows_csv(reliability_rows(bin_stats(probs, cfg)), ["bin_lo", "bin_hi", "n", "acc", "conf", "gap"], args.reliability)
    if args.uncertainty_reliability:
        io.write_rows_csv(
            reliability_rows(uncertainty_bin_stats(probs, cfg)), ["bin_lo", "bin_hi", "n", "err", "uncert", "gap"],
            args.uncertainty_reliability,
        )
    if args.by_class:
        profile = io.load_profile(args.profile) if args.profile else frequency_profile(probs.labels, probs.num_classes)
        io.write_rows_csv(confidence_by_class(probs, profile), ["class", "count", "freq_normalized", "mean_confidence"], args.by_class)


def _train_config(args, loss=None) -> TrainConfig:
    doc = io.read_json(args.config) if args.config else {}
    if loss is not None:
        doc["loss_mode"] = loss
        if args.alpha is not None:
            doc["alpha"] = args.alpha
        if args.gamma is not None:
            doc["gamma"] = args.gamma
    try:
        return TrainConfig(**doc)
    except TypeError as exc:
        raise DataError(f"{args.config}: {exc}") from None


def _train(args):
    data = io.load_dataset(args.data)
    cfg = _train_config(args, args.loss)
    result = train(data.train(), cfg, val=data.val())
    io.save_model(result.model, args.out_model, {"config": asdict(cfg), "seed": cfg.seed})
    if args.trace:
        io.write_rows_csv(result.trace, TRACE_COLUMNS, args.trace)


def _export_logits(args):
    data = io.load_dataset(args.data)
    part = data.part({"train": 0, "val": 1, "test": 2}[args.split])
    if part is None:
        raise DataError(f"{args.data}: no {args.split} split")
    io.save_logits(model_logits(io.load_model(args.model), part), args.out, dtype=args.dtype)


def _distill(args):
    data = io.load_dataset(args.data)
    teacher = io.load_model(args.teacher)
    try:
        scalar = float(args.temps)
    except ValueError:
        temps = io.load_temperatures(args.temps)[0]
    else:
        temps = TemperatureVector.constant(scalar, data.num_classes)
    cfg = _train_config(args)
    result = self_distill(teacher, data.train(), DistillConfig(temps, args.fuse_lambda, cfg), val=data.val())
    io.save_model(result.model, args.out_model, {"config": asdict(cfg), "seed": cfg.seed, "fuse_lambda": args.fuse_lambda,
                                                 "temps": [float(v) for v in temps.t]})
    if args.trace:
        io.write_rows_csv(result.trace, TRACE_COLUMNS, args.trace)


def _pipeline(args):
    doc = io.read_json(args.spec)
    spec = PipelineSpec.from_dict(doc)
    out = args.out or doc.get("out_dir")
    if not out:
        raise UsageError("pipeline: no output directory (--out or out_dir in the spec file)")
    result = run_pipeline(spec, out)
    print(format_table(result["rows"]), file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cdacal", description="Class-distribution-aware calibration toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("gen-data", help="synthetic long-tailed dataset")
    s.add_argument("--classes", type=int, default=10)
    s.add_argument("--max-per-class", type=int, default=1000)
    s.add_argument("--ratio", type=float, default=100.0)
    s.add_argument("--dim", type=int, default=32)
    s.add_argument("--sep", type=float, default=3.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--holdout-fraction", type=float, default=0.2)
    s.add_argument("--test-per-class", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_gen_data)

    s = sub.add_parser("fit-ts", help="fit a scalar temperature by NLL line search")
    s.add_argument("--val-logits", required=True)
    s.add_argument("--out-temps", required=True)
    s.add_argument("--t-min", type=float, default=TsFitConfig.t_min)
    s.add_argument("--t-max", type=float, default=TsFitConfig.t_max)
    s.add_argument("--steps", type=int, default=TsFitConfig.coarse_steps)
    s.add_argument("--refine-rounds", type=int, default=TsFitConfig.refine_rounds)
    s.set_defaults(func=_fit_ts)

    s = sub.add_parser("cda-temps", help="class-distribution-aware temperature vector")
    s.add_argument("--temps", required=True)
    s.add_argument("--profile", required=True, help="JSON with a 'counts' list (e.g. a dataset header)")
    s.add_argument("--gamma", type=float, default=CdaConfig.gamma)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cda_temps)

    s = sub.add_parser("apply-ts", help="temperature-scaled probabilities")
    s.add_argument("--logits", required=True)
    s.add_argument("--temps", required=True)
    s.add_argument("--out-probs", required=True)
    s.add_argument("--allow-same-split", action="store_true", help="permit evaluating on the file T was fitted on")
    s.set_defaults(func=_apply_ts)

    s = sub.add_parser("smooth-labels", help="LS / CDA-LS soft labels")
    s.add_argument("--labels", required=True)
    s.add_argument("--classes", type=int, required=True)
    s.add_argument("--alpha", type=float, default=0.1)
    s.add_argument("--gamma", type=float, default=None, help=f"enables CDA-LS (typical {CDA_LS_GAMMA})")
    s.add_argument("--profile")
    s.add_argument("--renormalize", action="store_true")
    s.add_argument("--out", required=True)
    s.add_argument("--out-smoothing")
    s.set_defaults(func=_smooth_labels)

    s = sub.add_parser("metrics", help="calibration metric report")
    s.add_argument("--probs")
    s.add_argument("--logits")
    s.add_argument("--temps")
    s.add_argument("--allow-same-split", action="store_true", help="permit evaluating on the file T was fitted on")
    s.add_argument("--report", required=True)
    s.add_argument("--reliability")
    s.add_argument("--uncertainty-reliability")
    s.add_argument("--by-class")
    s.add_argument("--profile")
    s.add_argument("--bins", type=int, default=MetricsConfig.num_bins)
    s.add_argument("--tace-threshold", type=float, default=MetricsConfig.tace_threshold)
    s.add_argument("--tace-ranges", type=int, default=MetricsConfig.tace_ranges)
    s.set_defaults(func=_metrics)

    s = sub.add_parser("train", help="train the linear classifier")
    s.add_argument("--data", required=True)
    s.add_argument("--loss", choices=["ce", "ls", "cda-ls"], default="ce")
    s.add_argument("--alpha", type=float)
    s.add_argument("--gamma", type=float)
    s.add_argument("--config")
    s.add_argument("--out-model", required=True)
    s.add_argument("--trace")
    s.set_defaults(func=_train)

    s = sub.add_parser("export-logits", help="logits of a saved model on one split")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--split", choices=["train", "val", "test"], default="val")
    s.add_argument("--dtype", choices=["f32", "f64"], default="f64")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_export_logits)

    s = sub.add_parser("distill", help="self-distillation with a temperature vector")
    s.add_argument("--teacher", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--temps", required=True, help="temperatures JSON or a scalar")
    s.add_argument("--lambda", dest="fuse_lambda", type=float, default=0.5)
    s.add_argument("--config")
    s.add_argument("--out-model", required=True)
    s.add_argument("--trace")
    s.set_defaults(func=_distill)

    s = sub.add_parser("pipeline", help="baseline / TS / CDA-TS comparison end to end")
    s.add_argument("--spec", required=True)
    s.add_argument("--out")
    s.set_defaults(func=_pipeline)
    return p


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        if args.verbose:
            log.setLevel(logging.INFO)
        args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
