"""Versioned JSON schemas for every document the toolkit writes."""

import json
from importlib import resources

NAMES = ("metrics_report", "temperatures", "smoothing", "comparison", "matrix_header", "model_header")


def load_schema(name: str) -> dict:
    return json.loads(resources.files(__name__).joinpath(f"{name}.schema.json").read_text())
