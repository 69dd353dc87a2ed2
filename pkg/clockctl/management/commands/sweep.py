from django.core.management.base import BaseCommand

from ._common import add_run_arguments, execute_run, overrides_from


class Command(BaseCommand):
    help = "Runs the bound checks across a list of coupling integrals"

    def add_arguments(self, parser):
        add_run_arguments(parser)
        parser.add_argument(
            "--integrals",
            nargs="+",
            type=float,
            help="∫g values in units of ħ (default 0.1 0.5 1.0 π/2 π)",
        )

    def handle(self, *args, **options):
        overrides = overrides_from(options)
        overrides["scenario"] = "bound-sweep"
        if options.get("integrals"):
            overrides["sweep_integrals"] = options["integrals"]
        execute_run(self, options, overrides)
