"""On-disk formats.

Matrices (logits, probabilities, soft labels) are a JSON header next to a
little-endian row-major binary payload and a newline-delimited label file;
logits may also be CSV with a ``label,logit_0,...,logit_{N-1}`` header.
Datasets are a directory with one header/payload/labels triple per split.
Model checkpoints are a JSON header plus a float64 blob.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .core import ClassFrequencyProfile, LogitSet, ProbSet, TemperatureVector
from .datagen import SPLIT_NAMES, Dataset
from .distill import LinearModel
from .errors import ParseError
from .metrics import SCHEMA_VERSION
from .smooth import SmoothingVector

DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}


def dump_json(obj, path) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n")


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ParseError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from None


def _sibling(header: Path, suffix: str) -> Path:
    return header.with_suffix(suffix)


def write_labels(labels, path) -> None:
    with open(path, "w") as fh:
        fh.writelines(f"{int(v)}\n" for v in labels)


def read_labels(path) -> np.ndarray:
    out = []
    try:
        lines = Path(path).read_text().splitlines()
    except FileNotFoundError:
        raise ParseError(f"{path}: no such file") from None
    for i, line in enumerate(lines):
        line = line.strip()
        if not line:
            continue
        try:
            out.append(int(line))
        except ValueError:
            raise ParseError(f"{path}: row {i}: label {line!r} is not an integer") from None
    return np.array(out, dtype=np.int64)


def save_matrix(path, values, labels=None, kind="logits", dtype="f64", extra=None, cols_key="n_classes") -> None:
    """Write `values` as header JSON + .bin payload (+ .labels when given)."""
    if dtype not in DTYPES:
        raise ParseError(f"unknown dtype {dtype!r}")
    header_path = Path(path)
    values = np.asarray(values)
    m, n = values.shape
    header = {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "m": m,
        cols_key: n,
        "dtype": dtype,
        "layout": "row-major",
        "payload": _sibling(header_path, ".bin").name,
    }
    if labels is not None:
        header["labels"] = _sibling(header_path, ".labels").name
        write_labels(labels, _sibling(header_path, ".labels"))
    if extra:
        header.update(extra)
    _sibling(header_path, ".bin").write_bytes(values.astype(DTYPES[dtype]).tobytes())
    dump_json(header, header_path)


def load_matrix(path, expect_kind=None, cols_key="n_classes", n_label_classes=None):
    """Read a header-described matrix; returns (values float64, labels or None, header).

    Labels are range-checked against `n_label_classes` (default: the column
    count).
    """
    header_path = Path(path)
    header = read_json(header_path)
    for key in ("m", cols_key, "dtype", "payload"):
        if key not in header:
            raise ParseError(f"{path}: header lacks {key!r}")
    if expect_kind and header.get("kind", expect_kind) != expect_kind:
        raise ParseError(f"{path}: expected a {expect_kind} file, header says {header['kind']!r}")
    if header.get("layout", "row-major") != "row-major":
        raise ParseError(f"{path}: unsupported layout {header['layout']!r}")
    if header["dtype"] not in DTYPES:
        raise ParseError(f"{path}: unknown dtype {header['dtype']!r}")
    m, n = int(header["m"]), int(header[cols_key])
    dt = DTYPES[header["dtype"]]
    payload = header_path.parent / header["payload"]
    try:
        raw = payload.read_bytes()
    except FileNotFoundError:
        raise ParseError(f"{payload}: no such file") from None
    expected = m * n * dt.itemsize
    if len(raw) != expected:
        raise ParseError(
            f"{payload}: size mismatch, expected {expected} bytes for {m}x{n} {header['dtype']}, got {len(raw)}"
        )
    values = np.frombuffer(raw, dtype=dt).reshape(m, n).astype(np.float64)
    bad = np.flatnonzero(~np.isfinite(values).all(axis=1))
    if bad.size:
        raise ParseError(f"{payload}: non-finite value at row {int(bad[0])}")
    labels = None
    if "labels" in header:
        labels = read_labels(header_path.parent / header["labels"])
        if labels.size != m:
            raise ParseError(f"{path}: {labels.size} labels for {m} rows")
        k = n if n_label_classes is None else n_label_classes
        out = np.flatnonzero((labels < 0) | (labels >= k))
        if out.size:
            i = int(out[0])
            raise ParseError(f"{path}: row {i}: label {labels[i]} outside [0, {k})")
    return values, labels, header


def save_logits_csv(logits: LogitSet, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label"] + [f"logit_{c}" for c in range(logits.num_classes)])
        for y, row in zip(logits.labels, logits.values):
            w.writerow([int(y)] + [repr(float(v)) for v in row])


def load_logits_csv(path) -> LogitSet:
    try:
        fh = open(path, newline="")
    except FileNotFoundError:
        raise ParseError(f"{path}: no such file") from None
    with fh:
        reader = csv.reader(fh)
        head = next(reader, None)
        if not head:
            raise ParseError(f"{path}: empty file")
        n = len(head) - 1
        if head[0].strip() != "label" or [h.strip() for h in head[1:]] != [f"logit_{c}" for c in range(n)]:
            raise ParseError(f"{path}: header must be label,logit_0,...,logit_{{N-1}}")
        labels, rows = [], []
        for i, rec in enumerate(reader):
            if not rec:
                continue
            if len(rec) != n + 1:
                raise ParseError(f"{path}: row {i}: expected {n + 1} fields, got {len(rec)}")
            try:
                y = int(rec[0])
                vals = [float(v) for v in rec[1:]]
            except ValueError as exc:
                raise ParseError(f"{path}: row {i}: {exc}") from None
            if not 0 <= y < n:
                raise ParseError(f"{path}: row {i}: label {y} outside [0, {n})")
            if not np.isfinite(vals).all():
                raise ParseError(f"{path}: row {i}: non-finite logit")
            labels.append(y)
            rows.append(vals)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return LogitSet(np.array(rows), np.array(labels), n)


def save_logits(logits: LogitSet, path, dtype="f64") -> None:
    if str(path).endswith(".csv"):
        save_logits_csv(logits, path)
    else:
        save_matrix(path, logits.values, logits.labels, kind="logits", dtype=dtype)


def load_logits(path, format=None) -> LogitSet:
    """Load a LogitSet from CSV or from a binary header; format defaults by extension."""
    fmt = format or ("csv" if str(path).endswith(".csv") else "binary")
    if fmt == "csv":
        return load_logits_csv(path)
    values, labels, header = load_matrix(path, expect_kind="logits")
    if labels is None:
        raise ParseError(f"{path}: logit file has no labels")
    if values.shape[0] == 0:
        raise ParseError(f"{path}: no rows")
    return LogitSet(values, labels, values.shape[1])


def save_probs(probs: ProbSet, path) -> None:
    save_matrix(path, probs.values, probs.labels, kind="probs", dtype="f64")


def load_probs(path) -> ProbSet:
    values, labels, _ = load_matrix(path, expect_kind="probs")
    if labels is None:
        raise ParseError(f"{path}: probability file has no labels")
    if values.shape[0] == 0:
        raise ParseError(f"{path}: no rows")
    return ProbSet(values, labels)


def temperatures_doc(t_opt, temps: TemperatureVector, gamma=0.0, profile=None, **extra) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "t_opt": float(t_opt),
        "gamma": float(gamma),
        "temps": [float(v) for v in temps.t],
        "source_profile": None if profile is None else [int(c) for c in profile.counts],
    }
    doc.update(extra)
    return doc


def load_temperatures(path) -> tuple[TemperatureVector, dict]:
    doc = read_json(path)
    if "temps" not in doc:
        raise ParseError(f"{path}: no 'temps' array")
    return TemperatureVector(doc["temps"]), doc


def smoothing_doc(alpha, gamma, smoothing: SmoothingVector) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "alpha": float(alpha),
        "gamma": float(gamma),
        "alphas": [float(v) for v in smoothing.alpha],
    }


def load_profile(path) -> ClassFrequencyProfile:
    """Class counts from any JSON carrying a ``counts`` (or ``source_profile``) list."""
    doc = read_json(path)
    counts = doc.get("counts", doc.get("source_profile"))
    if counts is None:
        raise ParseError(f"{path}: no 'counts' list")
    return ClassFrequencyProfile(np.asarray(counts))


def save_dataset(dataset: Dataset, out_dir) -> list[Path]:
    """One header/payload/labels triple per non-empty split."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for tag, name in SPLIT_NAMES.items():
        part = dataset.part(tag)
        if part is None:
            continue
        header = out / f"{name}.json"
        save_matrix(header, part.features, part.labels, kind="features", dtype="f32", cols_key="d", extra={
            "n_classes": dataset.num_classes,
            "seed": dataset.seed,
            "counts": [int(c) for c in part.profile.counts],
            "split": name,
        })
        written.append(header)
    return written


def load_dataset(path) -> Dataset:
    """Load a dataset directory (all splits) or a single split header."""
    path = Path(path)
    headers = (
        [(tag, path / f"{name}.json") for tag, name in SPLIT_NAMES.items() if (path / f"{name}.json").exists()]
        if path.is_dir()
        else [(0, path)]
    )
    if not headers:
        raise ParseError(f"{path}: no split headers found")
    feats, labels, split = [], [], []
    n_classes = seed = None
    for tag, header_path in headers:
        header = read_json(header_path)
        if "n_classes" not in header:
            raise ParseError(f"{header_path}: header lacks 'n_classes'")
        k = int(header["n_classes"])
        x, y, header = load_matrix(header_path, expect_kind="features", cols_key="d", n_label_classes=k)
        if y is None:
            raise ParseError(f"{header_path}: dataset split has no labels")
        if n_classes is None:
            n_classes, seed = k, int(header.get("seed", 0))
        elif k != n_classes:
            raise ParseError(f"{header_path}: n_classes {k} differs from other splits ({n_classes})")
        if "counts" in header and np.bincount(y, minlength=k).tolist() != list(header["counts"]):
            raise ParseError(f"{header_path}: stored counts disagree with the labels")
        feats.append(x)
        labels.append(y)
        split.append(np.full(y.size, tag))
    return Dataset(np.vstack(feats), np.concatenate(labels), n_classes, split=np.concatenate(split), seed=seed)


def save_model(model: LinearModel, path, meta=None) -> None:
    header_path = Path(path)
    params = model.params()
    header = {
        "schema_version": SCHEMA_VERSION,
        "kind": "linear_model",
        "num_classes": model.num_classes,
        "input_dim": model.input_dim,
        "hidden": model.hidden_width,
        "dtype": "f64",
        "params": [{"name": k, "shape": list(v.shape)} for k, v in params.items()],
        "payload": _sibling(header_path, ".bin").name,
    }
    header.update(meta or {})
    blob = b"".join(np.ascontiguousarray(v, dtype="<f8").tobytes() for v in params.values())
    _sibling(header_path, ".bin").write_bytes(blob)
    dump_json(header, header_path)


def load_model(path) -> LinearModel:
    header_path = Path(path)
    header = read_json(header_path)
    if header.get("kind") != "linear_model":
        raise ParseError(f"{path}: not a model checkpoint")
    raw = (header_path.parent / header["payload"]).read_bytes()
    sizes = [int(np.prod(p["shape"])) for p in header["params"]]
    if len(raw) != 8 * sum(sizes):
        raise ParseError(f"{path}: size mismatch, expected {8 * sum(sizes)} bytes, got {len(raw)}")
    flat = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    params, offset = {}, 0
    for spec, size in zip(header["params"], sizes):
        params[spec["name"]] = flat[offset:offset + size].reshape(spec["shape"]).copy()
        offset += size
    return LinearModel(**params)


def write_rows_csv(rows, columns, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow(["" if row[c] is None else _fmt(row[c]) for c in columns])


def _fmt(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return v


def config_dict(cfg) -> dict:
    return asdict(cfg)


def ensure_parent(path) -> None:
    parent = os.path.dirname(os.fspath(path))
    if parent:
        os.makedirs(parent, exist_ok=True)
