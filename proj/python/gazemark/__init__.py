"""Gaze-trail and region-mark cue compositing with a VQA evaluation harness.

The heavy lifting lives in the compiled ``_core`` extension; this wrapper
keeps the surface pythonic: reports and grid axes are plain dicts, and
keyword arguments mirror the command-line flags (``lambda_`` stands in for
the reserved word ``lambda``).
"""

import json as _json

from ._core import (
    ConfigError,
    ContractError,
    EnvironmentFault,
    FormatError,
    IoError,
    NetworkError,
    __version__,
    build_prompt,
    convert_report,
    make_fixtures,
    normalize_answer_text,
    parse_answer,
    render_cues,
    sample_plan,
    selection_probabilities,
    validate_suite,
)
from ._core import expand_preset_json as _expand_preset_json
from ._core import run_eval_json as _run_eval_json
from ._core import run_grid_json as _run_grid_json

__all__ = [
    "ConfigError",
    "ContractError",
    "EnvironmentFault",
    "FormatError",
    "IoError",
    "NetworkError",
    "__version__",
    "build_prompt",
    "convert_report",
    "expand_preset",
    "make_fixtures",
    "normalize_answer_text",
    "parse_answer",
    "render_cues",
    "report_to_csv",
    "report_to_markdown",
    "run_eval",
    "run_grid",
    "sample_plan",
    "selection_probabilities",
    "validate_suite",
]

_BACKEND_KEYS = {
    "endpoint",
    "model",
    "api_key_env",
    "temperature",
    "timeout",
    "retries",
    "rpm",
    "fps",
    "encoder",
    "fixed_response",
    "script",
}

_GRID_KEYS = {"preset", "strategies", "lambdas", "sample_sizes", "fps_values"}


def _pack_config(options, allow_grid=False):
    """Nest flat CLI-style keyword arguments into the wire configuration."""
    config = {}
    backend = {}
    for key, value in options.items():
        if value is None:
            continue
        if key == "backend":
            backend["kind"] = value
        elif key in _BACKEND_KEYS:
            backend[key] = value
        elif key == "lambda_":
            config["lambda"] = value
        elif key in _GRID_KEYS:
            if not allow_grid:
                raise TypeError(f"unexpected keyword argument {key!r}")
            config[key] = value
        else:
            config[key] = value
    if backend:
        config["backend"] = backend
    return config


def run_eval(suite_dir, **options):
    """Evaluate one strategy/sampling cell; returns the report as a dict.

    Keywords mirror the command line: ``strategy``, ``backend``, ``seed``,
    ``lambda_``, ``n``, ``concurrency``, ``cache_dir``, ``endpoint``,
    ``model``, ``api_key_env``, ``temperature``, ``fps``, ...
    """
    config = _pack_config(options)
    return _json.loads(_run_eval_json(str(suite_dir), _json.dumps(config)))


def run_grid(suite_dir, **options):
    """Run an ablation grid (``preset=...`` or explicit axes) to a dict."""
    config = _pack_config(options, allow_grid=True)
    return _json.loads(_run_grid_json(str(suite_dir), _json.dumps(config)))


def expand_preset(preset, video_backend=False):
    """Expand a named grid (table1..table4) into its axes as a dict."""
    return _json.loads(_expand_preset_json(preset, video_backend))


def report_to_csv(report):
    """Convert a report (dict or JSON text) to CSV."""
    if not isinstance(report, str):
        report = _json.dumps(report)
    return convert_report(report, "csv")


def report_to_markdown(report):
    """Convert a report (dict or JSON text) to a markdown table."""
    if not isinstance(report, str):
        report = _json.dumps(report)
    return convert_report(report, "markdown")
