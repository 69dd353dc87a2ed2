from django.core.management.base import BaseCommand

from clockctl.scenarios import SCENARIO_NAMES

from ._common import add_run_arguments, execute_run, overrides_from


class Command(BaseCommand):
    help = "Runs one scenario and writes its time series, verdict and manifest"

    def add_arguments(self, parser):
        parser.add_argument("scenario", choices=SCENARIO_NAMES)
        add_run_arguments(parser)

    def handle(self, *args, **options):
        overrides = overrides_from(options)
        overrides["scenario"] = options["scenario"]
        execute_run(self, options, overrides)
