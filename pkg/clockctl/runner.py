"""Config loading, run artifacts and verdicts.

A run directory holds ``manifest.json`` (written before time stepping),
``timeseries.csv``, ``verdict.json`` and optionally ``plot_timeseries.py``.
Sweep runs add one sub-directory per coupling value.
"""

import csv
import json
import logging
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
from django.core.exceptions import ValidationError
from django.template.loader import render_to_string

from . import bounds
from .forms import DEFAULTS, ExperimentConfigForm
from .model import ModelConfig
from .scenarios import TimeSeriesRecord, get_scenario
from .statelib import PureState

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_VIOLATION = 1
EXIT_INCONCLUSIVE = 2
EXIT_ERROR = 3

STATUS = {
    EXIT_PASS: "pass",
    EXIT_VIOLATION: "violation",
    EXIT_INCONCLUSIVE: "inconclusive",
}

MANIFEST_NAME = "manifest.json"
TIMESERIES_NAME = "timeseries.csv"
VERDICT_NAME = "verdict.json"
PLOT_NAME = "plot_timeseries.py"

# Per-check tolerances used when a CSV is verified without its manifest.
CSV_TOLERANCES = {
    **dict.fromkeys(bounds.CHECKS, bounds.DEFAULT_TOLERANCE),
    "mandelstam_tamm": bounds.MANDELSTAM_TAMM_TOLERANCE,
    "support": 0.0,
    "pure_to_mixed": 0.0,
}
PROPAGATION_SENSITIVE = ("fidelity", "corollary", "trace", "weak_trace", "vector")


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Validated configuration of one run."""

    scenario: str
    model: ModelConfig
    initial_state: PureState
    t_start: float
    t_max: float
    dt: float
    sample_count: int
    seed: int
    random_vectors: int
    tolerance: float
    mt_tolerance: float
    support_epsilon: float
    full_deviation_threshold: float
    sweep_integrals: tuple
    truncation_divisors: tuple
    output_dir: str
    emit_plot: bool
    echo: dict

    @classmethod
    def from_form(cls, form):
        data = form.cleaned_data
        values = {item.name: data[item.name] for item in fields(cls) if item.name != "echo"}
        return cls(**values, echo=dict(form.data))


def format_error(exc):
    """One line per message, prefixed with the config key where known."""
    if hasattr(exc, "error_dict"):
        return "; ".join(
            message if key == "__all__" else f"{key}: {message}"
            for key, messages in exc.message_dict.items()
            for message in messages
        )
    return "; ".join(exc.messages)


def _read_config_file(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(
            "Cannot read config %(path)s: %(reason)s",
            code="unreadable",
            params={"path": str(path), "reason": exc.strerror or exc},
        ) from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(
            "%(path)s line %(line)s column %(column)s: %(reason)s",
            code="parse",
            params={"path": str(path), "line": exc.lineno, "column": exc.colno, "reason": exc.msg},
        ) from exc
    if not isinstance(raw, dict):
        raise ValidationError(
            "%(path)s must hold a JSON object.", code="parse", params={"path": str(path)}
        )
    return raw


def _reject_unknown(keys, source):
    unknown = sorted(set(keys) - set(DEFAULTS))
    if unknown:
        raise ValidationError(
            "Unknown configuration key(s) %(keys)s in %(source)s.",
            code="unknown_key",
            params={"keys": ", ".join(unknown), "source": source},
        )


def load_config(path=None, overrides=None):
    """Resolve defaults < scenario preset < file < overrides and validate."""
    raw = _read_config_file(path) if path else {}
    _reject_unknown(raw, path)
    overrides = {key: value for key, value in (overrides or {}).items() if value is not None}
    _reject_unknown(overrides, "command-line overrides")

    name = str(overrides.get("scenario", raw.get("scenario", DEFAULTS["scenario"])))
    preset = get_scenario(name).preset
    data = {**DEFAULTS, **preset, **raw, **overrides}

    form = ExperimentConfigForm(data=data)
    if not form.is_valid():
        logger.info("Config rejected: %s", form.errors.as_json())
        raise ValidationError(form.errors.as_data())
    experiment = ExperimentConfig.from_form(form)
    logger.info(
        "Config resolved: scenario %s, n=%s, dt=%s, t_max=%s, ΔH_c=%.6g",
        name, experiment.model.grid.n, experiment.dt, experiment.t_max, experiment.model.delta_hc,
    )
    return experiment


def _jsonable(value):
    """Plain JSON types; non-finite floats become null."""
    if isinstance(value, dict):
        return {str(key): _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if np.isfinite(value) else None
    return value


def _write_json(document, path):
    path = Path(path)
    path.write_text(
        json.dumps(_jsonable(document), indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    return path


def write_manifest(manifest, directory, label=None):
    """Write manifest.json, under the sweep member directory ``label`` if given."""
    directory = Path(directory)
    if label is not None:
        directory = directory / label
    directory.mkdir(parents=True, exist_ok=True)
    path = _write_json(manifest, directory / MANIFEST_NAME)
    logger.info("Manifest written to %s", path)
    return path


def _csv_value(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    return repr(float(value))


def write_timeseries(records, path):
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(TimeSeriesRecord.columns())
        for record in records:
            writer.writerow([_csv_value(value) for value in record.row()])
    return path


def emit_plot_script(outcome, directory):
    """Matplotlib script over the CSV, rendered from a template."""
    manifest = outcome.manifest
    script = render_to_string(
        "clockctl/plot_timeseries.py.txt",
        {
            "scenario": outcome.scenario,
            "csv_name": TIMESERIES_NAME,
            "delta_hc": repr(float(manifest["delta_hc"])),
            "hbar": repr(float(manifest["config"].get("hbar", 1.0))),
            "window_end": repr(manifest["window_end"]),
        },
    )
    path = Path(directory) / PLOT_NAME
    path.write_text(script, encoding="utf-8")
    return path


def write_outputs(outcome, directory, verdict=None, emit_plot=False):
    """Write the run artifacts; returns the written paths."""
    if not outcome.records and not outcome.members:
        raise ValidationError("Refusing to write a run without records.", code="no_records")
    verdict = build_verdict(outcome) if verdict is None else verdict
    directory = Path(directory)
    written = []
    try:
        directory.mkdir(parents=True, exist_ok=True)
        for label, member in outcome.members:
            written += write_outputs(
                member, directory / label, verdict["members"][label], emit_plot
            )
        if outcome.records:
            written.append(write_timeseries(outcome.records, directory / TIMESERIES_NAME))
            if emit_plot:
                written.append(emit_plot_script(outcome, directory))
        written.append(write_manifest(outcome.manifest, directory))
        written.append(_write_json(verdict, directory / VERDICT_NAME))
    except OSError as exc:
        raise ValidationError(
            "Cannot write outputs to %(path)s: %(reason)s",
            code="unwritable",
            params={"path": str(directory), "reason": exc.strerror or exc},
        ) from exc
    logger.info("Wrote %s files under %s", len(written), directory)
    return written


def _check_entry(margins, tolerance):
    applicable = [margin for margin in margins if margin is not None]
    violations = sum(margin < -tolerance for margin in applicable)
    return {
        "worst_margin": min(applicable) if applicable else None,
        "tolerance": tolerance,
        "strict": False,
        "applicable_samples": len(applicable),
        "violations": violations,
        "passed": None if not applicable else violations == 0,
    }


def _claim_entry(claim):
    return {
        "worst_margin": claim.margin,
        "tolerance": claim.tolerance,
        "strict": claim.strict,
        "applicable_samples": int(claim.applicable),
        "violations": int(claim.passed is False),
        "passed": claim.passed,
        "detail": claim.detail,
    }


def _report_tolerance(reports, name):
    for report in reports:
        if name in report.tolerances:
            return report.tolerances[name]
    return CSV_TOLERANCES[name]


def _finish(verdict, tolerances):
    exit_code, failures = verify(verdict, tolerances)
    verdict["exit_code"] = exit_code
    verdict["status"] = STATUS[exit_code]
    verdict["failures"] = failures
    return verdict


def build_verdict(outcome, tolerances=None):
    """Worst margin and pass flag per check and per claim."""
    tolerances = tolerances or {}
    checks = {
        name: _check_entry(
            [report.margins.get(name) for report in outcome.reports],
            tolerances.get(name, _report_tolerance(outcome.reports, name)),
        )
        for name in bounds.CHECKS
    }
    verdict = {
        "scenario": outcome.scenario,
        "checks": checks,
        "claims": {claim.name: _claim_entry(claim) for claim in outcome.claims},
        "notes": list(outcome.notes),
        "members": {
            label: build_verdict(member, tolerances) for label, member in outcome.members
        },
    }
    return _finish(verdict, tolerances)


def _sibling_propagation_error(path):
    manifest_path = path.with_name(MANIFEST_NAME)
    if not manifest_path.exists():
        return 0.0
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError:
        logger.warning("Ignoring unreadable manifest %s", manifest_path)
        return 0.0
    return float(manifest.get("propagation_error") or 0.0)


def verdict_from_csv(path, tolerances=None):
    """Verdict over the margin columns of a time-series CSV.

    The propagation error in a sibling manifest widens the tolerances of
    the checks that carry it.
    """
    path = Path(path)
    base = dict(CSV_TOLERANCES)
    error = _sibling_propagation_error(path)
    for name in PROPAGATION_SENSITIVE:
        base[name] += error
    base.update(tolerances or {})

    columns = {name: [] for name in bounds.CHECKS}
    try:
        with path.open(newline="", encoding="utf-8") as handle:
            reader = csv.DictReader(handle)
            missing = [
                f"margin_{name}"
                for name in bounds.CHECKS
                if f"margin_{name}" not in (reader.fieldnames or [])
            ]
            if missing:
                raise ValidationError(
                    "%(path)s lacks the column(s) %(columns)s.",
                    code="parse",
                    params={"path": str(path), "columns": ", ".join(missing)},
                )
            for row in reader:
                for name in bounds.CHECKS:
                    value = row[f"margin_{name}"]
                    columns[name].append(float(value) if value else None)
    except ValueError as exc:
        raise ValidationError(
            "%(path)s line %(line)s: %(reason)s",
            code="parse",
            params={"path": str(path), "line": reader.line_num, "reason": exc},
        ) from exc

    verdict = {
        "scenario": None,
        "checks": {name: _check_entry(columns[name], base[name]) for name in bounds.CHECKS},
        "claims": {},
        "notes": [],
        "members": {},
    }
    return _finish(verdict, tolerances)


def load_verdict(path, tolerances=None):
    """Verdict from a verdict JSON document or a time-series CSV."""
    path = Path(path)
    if path.suffix == ".csv":
        return verdict_from_csv(path, tolerances)
    try:
        verdict = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(
            "%(path)s line %(line)s column %(column)s: %(reason)s",
            code="parse",
            params={"path": str(path), "line": exc.lineno, "column": exc.colno, "reason": exc.msg},
        ) from exc
    if not isinstance(verdict, dict) or "checks" not in verdict:
        raise ValidationError(
            "%(path)s is not a verdict document.", code="parse", params={"path": str(path)}
        )
    return verdict


def _collect(verdict, tolerances, prefix=""):
    failures, applicable = [], 0
    for group in ("checks", "claims"):
        for name, entry in verdict.get(group, {}).items():
            margin = entry.get("worst_margin")
            if margin is None:
                continue
            if group == "checks":
                applicable += 1
            tolerance = tolerances.get(name, entry.get("tolerance", 0.0))
            passed = margin > 0.0 if entry.get("strict") else margin >= -tolerance
            if not passed:
                failures.append(
                    f"{prefix}{name}: worst margin {margin:.3e} (tolerance {tolerance:.1e})"
                )
    for label, member in verdict.get("members", {}).items():
        member_failures, member_applicable = _collect(member, tolerances, f"{prefix}{label}/")
        failures += member_failures
        applicable += member_applicable
    return failures, applicable


def verify(verdict, tolerances=None):
    """Exit status for a verdict: 0 pass, 1 violation, 2 no per-sample check applicable.

    Claims can fail a verdict but do not make it conclusive on their own.

    Returns (exit status, failure descriptions).
    """
    failures, applicable = _collect(verdict, tolerances or {})
    if failures:
        return EXIT_VIOLATION, failures
    if applicable == 0:
        return EXIT_INCONCLUSIVE, []
    return EXIT_PASS, []
