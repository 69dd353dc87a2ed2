"""Options and error handling shared by the run and sweep commands."""

from contextlib import contextmanager
from functools import partial
from pathlib import Path

from django.conf import settings
from django.core.exceptions import ValidationError
from django.core.management.base import CommandError

from clockctl.runner import (
    EXIT_ERROR,
    EXIT_PASS,
    build_verdict,
    format_error,
    load_config,
    write_manifest,
    write_outputs,
)
from clockctl.scenarios import run_scenario


def add_run_arguments(parser):
    parser.add_argument("--config", help="JSON experiment config file")
    parser.add_argument("--out", help="Output directory for this run")
    parser.add_argument("--dt", type=float, help="Time step")
    parser.add_argument("--n", type=int, help="Grid points (power of two)")
    parser.add_argument("--t-max", type=float, dest="t_max", help="Last sampled time")
    parser.add_argument("--seed", type=int, help="Seed of the random vector family")
    parser.add_argument(
        "--emit-plot",
        action="store_true",
        dest="emit_plot",
        help="Also write a matplotlib script over the CSV",
    )


def overrides_from(options):
    overrides = {key: options.get(key) for key in ("dt", "n", "t_max", "seed")}
    if options.get("emit_plot"):
        overrides["emit_plot"] = True
    return overrides


@contextmanager
def operational_errors():
    """Turn validation and I/O failures into exit status 3."""
    try:
        yield
    except ValidationError as exc:
        raise CommandError(format_error(exc), returncode=EXIT_ERROR) from exc
    except OSError as exc:
        raise CommandError(str(exc), returncode=EXIT_ERROR) from exc


def output_directory(experiment, out):
    if out:
        return Path(out)
    if experiment.output_dir:
        return Path(experiment.output_dir)
    return Path(settings.CLOCKCTL_OUTPUT_DIR) / experiment.scenario


def execute_run(command, options, overrides):
    """Load, run, write and report; raises CommandError unless the run passes."""
    with operational_errors():
        experiment = load_config(options.get("config"), overrides)
        directory = output_directory(experiment, options.get("out"))
        command.stdout.write(f"Running {experiment.scenario} into {directory}...")
        outcome = run_scenario(
            experiment.scenario,
            experiment,
            manifest_sink=partial(write_manifest, directory=directory),
        )
        verdict = build_verdict(outcome)
        written = write_outputs(outcome, directory, verdict, emit_plot=experiment.emit_plot)

    for path in written:
        command.stdout.write(f"  wrote {path}")
    for note in verdict["notes"]:
        command.stdout.write(f"  note: {note}")
    report_verdict(command, verdict)


def report_verdict(command, verdict):
    exit_code = verdict["exit_code"]
    if exit_code == EXIT_PASS:
        command.stdout.write(command.style.SUCCESS("Verdict: pass"))
        return
    for failure in verdict["failures"]:
        command.stderr.write(f"  failed: {failure}")
    raise CommandError(f"Verdict: {verdict['status']}", returncode=exit_code)
