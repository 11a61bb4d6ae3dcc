"""Python access to the stereoind core (extraction, scoring, metrics)."""

import json

from . import _core
from ._core import (
    ConfigError,
    DataError,
    EncodingError,
    FitError,
    StereoindError,
    ValidationError,
    cohens_kappa,
    config_hash,
    level_names,
    mae,
    prompt_text,
)

__all__ = [
    "ConfigError",
    "DataError",
    "EncodingError",
    "FitError",
    "StereoindError",
    "ValidationError",
    "cohens_kappa",
    "config_hash",
    "encode",
    "fit_model",
    "fit_ols",
    "level_names",
    "mae",
    "multiclass_eval",
    "process_completion",
    "prompt_messages",
    "prompt_text",
    "run_extract",
    "schema",
    "score",
    "validate_record",
]


def schema():
    return json.loads(_core.schema_json())


def prompt_messages(shots=9, attributes=("race", "gender"), sentence=""):
    return json.loads(_core.prompt_messages(shots, list(attributes), sentence))


def process_completion(raw):
    """Extract, repair, parse and gate one raw completion."""
    return json.loads(_core.process_completion(raw))


def validate_record(record):
    return _core.validate_record(json.dumps(record))


def encode(record, include_signal_word=False):
    return _core.encode(json.dumps(record), include_signal_word)


def fit_ols(x, y):
    """Returns (intercept, coefficients, rank)."""
    return _core.fit_ols(x, y)


def fit_model(records, targets, folds=5, test_fraction=0.2, seed=42, include_signal_word=False):
    doc = _core.fit_model(
        [json.dumps(r) for r in records], list(targets), folds, test_fraction, seed, include_signal_word
    )
    return json.loads(doc)


def score(record, model):
    """Returns (score, linear, clamped)."""
    return _core.score(json.dumps(record), json.dumps(model))


def multiclass_eval(pred, gold):
    return json.loads(_core.multiclass_eval(list(pred), list(gold)))


def run_extract(config):
    """Runs the extract command from a config dict; returns (sentences, clean, failures, run_id)."""
    return _core.run_extract(json.dumps(config))
