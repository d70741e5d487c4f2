"""
Django settings for the manifold_lab project.

The project has no web surface: Django provides the settings layer, the
management-command CLI, form validation for experiment configs, template
rendering for text reports and the test runner. Process-level knobs come from
the environment (or a ``.env`` file) through python-decouple.
"""

from pathlib import Path

from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# No sessions or signed cookies are issued; the key only satisfies Django's
# startup checks.
SECRET_KEY = config("SECRET_KEY", default="manifold-lab-local-key")
DEBUG = config("DEBUG", default=False, cast=bool)

ALLOWED_HOSTS = []

# Application definition

INSTALLED_APPS = [
    "geometry",
    "sampling",
    "deconv",
    "slabfit",
    "lecam",
    "harness",
]

TEMPLATES = [
    {
        "BACKEND": "django.template.backends.django.DjangoTemplates",
        "DIRS": [BASE_DIR / "templates"],
        "APP_DIRS": True,
        "OPTIONS": {"autoescape": False},
    },
]

# Experiments persist flat files only.
DATABASES = {}

USE_TZ = True
TIME_ZONE = "UTC"

# ============================================================================
# LAB CONFIGURATION
# ============================================================================

LAB_LOG_LEVEL = config("LAB_LOG_LEVEL", default="INFO")
LAB_THREADS = config("LAB_THREADS", default=1, cast=int)
LAB_OUTPUT_DIR = config("LAB_OUTPUT_DIR", default="out")
LAB_SEED = config("LAB_SEED", default=20240601, cast=int)

# Defaults the harness fills in when an experiment config omits a key.
LAB_DEFAULTS = {
    "model.preset": "circle",
    "model.radius": 1.0,
    "model.noise": "noiseless",
    "model.pi": 1.0,
    "model.box_padding": 0.5,
    "model.kappa": 0.4,
    "model.gamma": 0.05,
    "estimator.name": "pointcloud",
    "slab.K": 8.0,
    "slab.b1": 1.0,
    "slab.b2": 1.0,
    "slab.offsets": 8,
    "deconv.k": 0,  # 0 means ceil(d / (2 delta))
    "deconv.L": 4.0,
    "deconv.delta": 0.25,
    "deconv.grid_factor": 0.25,
    "deconv.radius": 4.0,
    "loss.resolution": 1e-3,
    "experiment.n": "500,2000,8000",
    "experiment.replications": 1,
    "experiment.seed": LAB_SEED,
    "experiment.threads": LAB_THREADS,
    "output.dir": LAB_OUTPUT_DIR,
}

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "lab": {"format": "{levelname} {name}: {message}", "style": "{"},
    },
    "handlers": {
        "console": {"class": "logging.StreamHandler", "formatter": "lab"},
    },
    "loggers": {
        app: {"handlers": ["console"], "level": LAB_LOG_LEVEL, "propagate": False}
        for app in INSTALLED_APPS
    },
}
