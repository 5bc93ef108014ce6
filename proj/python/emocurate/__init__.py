"""Python bindings for the emocurate pipeline core."""

import json as _json

from . import _emocurate
from ._emocurate import (
    Error,
    accuracy,
    categories,
    compute_snr,
    dominant_emotion,
    export_dataset,
    fleiss_kappa,
    perplexity_calibration,
    tsne_project,
    vad_segment,
    validate_dataset,
    write_standard_corpus,
)

__all__ = [
    "Error",
    "accuracy",
    "categories",
    "compute_snr",
    "dominant_emotion",
    "export_dataset",
    "fleiss_kappa",
    "perplexity_calibration",
    "read_records",
    "resume_pipeline",
    "run_pipeline",
    "tsne_project",
    "vad_segment",
    "validate_dataset",
    "write_standard_corpus",
]


def run_pipeline(inputs, out_dir, config=""):
    """Run the pipeline; `config` is key/value text. Returns the ledger as a dict."""
    return _json.loads(_emocurate.run_pipeline([str(p) for p in inputs], config, str(out_dir)))


def resume_pipeline(checkpoint_dir):
    return _json.loads(_emocurate.resume_pipeline(str(checkpoint_dir)))


def read_records(run_dir):
    return [_json.loads(line) for line in _emocurate.read_records(str(run_dir))]
