"""
Django settings for the qclock project.

The project has no web surface: it is driven through management commands
(`python manage.py run <scenario>`), so URL routing, sessions and the
database layer are left out.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/4.2/ref/settings/
"""

from pathlib import Path
from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# Required by django.core even without request handling.
SECRET_KEY = config(
    "SECRET_KEY",
    default="django-insecure-qclock-local-simulation-key-not-for-deployment",
)

DEBUG = config("DEBUG", default=False, cast=bool)

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    # Local apps
    "clockctl",
]

TEMPLATES = [
    {
        "BACKEND": "django.template.backends.django.DjangoTemplates",
        "DIRS": [],
        "APP_DIRS": True,
        "OPTIONS": {
            "context_processors": [],
        },
    },
]


# No persistence: runs are written as CSV/JSON files.
DATABASES = {}


# Logging

LOG_LEVEL = config("LOG_LEVEL", default="INFO")

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "simple": {
            "format": "{asctime} {levelname} {name}: {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "simple",
        },
    },
    "loggers": {
        "clockctl": {
            "handlers": ["console"],
            "level": LOG_LEVEL,
            "propagate": False,
        },
    },
}


# Simulation settings

# Directory that receives run outputs when --out is not given
CLOCKCTL_OUTPUT_DIR = config("CLOCKCTL_OUTPUT_DIR", default=str(BASE_DIR / "runs"))

# Concurrent trajectories in the bound-sweep scenario
CLOCKCTL_SWEEP_WORKERS = config("CLOCKCTL_SWEEP_WORKERS", default=4, cast=int)

# Threads used by scipy.fft inside a single trajectory
CLOCKCTL_FFT_WORKERS = config("CLOCKCTL_FFT_WORKERS", default=1, cast=int)
