from django.core.management.base import BaseCommand

from clockctl.scenarios import SCENARIOS


class Command(BaseCommand):
    help = "Lists the available scenarios"

    def handle(self, *args, **kwargs):
        for name, scenario in SCENARIOS.items():
            self.stdout.write(self.style.SUCCESS(name) + f"  {scenario.summary}")
