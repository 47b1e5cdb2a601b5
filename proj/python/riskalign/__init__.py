"""Default prediction, Shapley attribution and expert alignment on company panels."""

import json
from pathlib import Path

from . import _core
from ._core import (
    Model,
    RiskalignError,
    assign_grade,
    fit as _fit,
    format_fraction,
    format_percent,
    kendall_tau_b,
    roc_auc,
    shapley_values,
    smote,
    spearman,
    survey_ranking,
)

__all__ = [
    "Model",
    "RiskalignError",
    "assign_grade",
    "evaluate",
    "fit",
    "format_fraction",
    "format_percent",
    "format_report",
    "kendall_tau_b",
    "roc_auc",
    "run",
    "shapley_values",
    "smote",
    "spearman",
    "survey_ranking",
]


def fit(x, y, kind, params=None, seed=0, feature_names=()):
    return _fit(x, y, kind, json.dumps(params or {}), seed, list(feature_names))


def evaluate(labels, probabilities, threshold=0.5):
    return json.loads(_core.evaluate_json(labels, probabilities, threshold))


def run(config, out_dir):
    """Run the full pipeline. `config` is a dict or a path to a JSON file."""
    if isinstance(config, (str, Path)):
        path = Path(config)
        text, base = path.read_text(), path.parent
    else:
        text, base = json.dumps(config), Path.cwd()
    return json.loads(_core.run_json(text, str(base), str(out_dir)))


def format_report(bundle):
    return _core.format_report_json(json.dumps(bundle))
