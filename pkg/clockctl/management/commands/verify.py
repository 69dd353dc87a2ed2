from django.core.management.base import BaseCommand, CommandError

from clockctl.bounds import CHECKS
from clockctl.runner import EXIT_ERROR, STATUS, load_verdict, verify

from ._common import operational_errors, report_verdict


def _tolerance(text):
    name, _, value = text.partition("=")
    return name, float(value)


class Command(BaseCommand):
    help = "Checks a verdict JSON or time-series CSV and sets the exit status"

    def add_arguments(self, parser):
        parser.add_argument("path", help="verdict.json or timeseries.csv")
        parser.add_argument(
            "--tolerance",
            action="append",
            default=[],
            metavar="CHECK=VALUE",
            help=f"Override a tolerance; checks: {', '.join(CHECKS)}",
        )

    def handle(self, *args, **options):
        try:
            tolerances = dict(_tolerance(item) for item in options["tolerance"])
        except ValueError as exc:
            raise CommandError(f"Bad --tolerance value: {exc}", returncode=EXIT_ERROR) from exc

        with operational_errors():
            verdict = load_verdict(options["path"], tolerances)

        exit_code, failures = verify(verdict, tolerances)
        verdict.update(exit_code=exit_code, status=STATUS[exit_code], failures=failures)
        for name, entry in verdict["checks"].items():
            self.stdout.write(
                f"  {name}: worst margin {entry.get('worst_margin')}, "
                f"{entry.get('applicable_samples', 0)} applicable"
            )
        report_verdict(self, verdict)
