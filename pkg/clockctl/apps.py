from django.apps import AppConfig


class ClockctlConfig(AppConfig):
    name = 'clockctl'
    verbose_name = 'Quantum clock control'
