"""Probability calibration, label-free calibration scores and active-learning simulations."""

import json
import os

from ._core import *  # noqa: F401,F403
from ._core import CalibalError, _load_config_document, _report, _run_al_suite, _run_calibration_suite


def _config_text(config):
    if config is None:
        return ""
    if isinstance(config, (str, os.PathLike)):
        # JSON or TOML file, chosen by extension.
        return _load_config_document(os.fspath(config))
    return json.dumps(config)


def run_calibration_suite(config=None, write=False):
    """Run the calibration comparison for a config dict or file; optionally write CSVs to config['out']."""
    return _run_calibration_suite(_config_text(config), write)


def run_al_suite(config=None, write=False):
    """Run the active-learning experiment grid for a config dict or file."""
    return _run_al_suite(_config_text(config), write)


def report(directory):
    """Re-aggregate suite outputs in `directory`. Returns (error_rows, printed_tables)."""
    return _report(directory)
