"""
Base settings for the VGM²P experiment project.
"""
import os
from pathlib import Path

import environ

# ========================
# PATH CONFIGURATION
# ========================
BASE_DIR = Path(__file__).resolve().parent.parent.parent
APPS_DIR = BASE_DIR / "apps"

env = environ.Env(
    DJANGO_DEBUG=(bool, False),
)
environ.Env.read_env(os.path.join(BASE_DIR, ".env"))

# ========================
# CORE SETTINGS
# ========================
SECRET_KEY = env("DJANGO_SECRET_KEY", default="vgm2p-desk-only-not-secret")
DEBUG = env("DJANGO_DEBUG")
ALLOWED_HOSTS: list[str] = []

# ========================
# APPLICATION DEFINITION
# ========================
DJANGO_APPS = [
    "django.contrib.auth",
    "django.contrib.contenttypes",
]

THIRD_PARTY_APPS = [
    "rest_framework",
]

LOCAL_APPS = [
    "apps.core",
    "apps.autodiff",
    "apps.flows",
    "apps.values",
    "apps.environments",
    "apps.oracle",
    "apps.trainer",
    "apps.cli",
]

INSTALLED_APPS = DJANGO_APPS + THIRD_PARTY_APPS + LOCAL_APPS

# ========================
# DATABASE (run registry)
# ========================
DATABASES = {
    "default": env.db("DATABASE_URL", default=f"sqlite:///{BASE_DIR / 'runs' / 'registry.sqlite3'}"),
}

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

# ========================
# DJANGO REST FRAMEWORK
# ========================
# Only serializers and the JSON renderer/parser are used (config
# validation and structured text); there is no HTTP surface.
REST_FRAMEWORK = {
    "DEFAULT_RENDERER_CLASSES": [
        "rest_framework.renderers.JSONRenderer",
    ],
    "DEFAULT_PARSER_CLASSES": [
        "rest_framework.parsers.JSONParser",
    ],
    "COERCE_DECIMAL_TO_STRING": False,
}

# ========================
# INTERNATIONALIZATION
# ========================
LANGUAGE_CODE = "en-us"
TIME_ZONE = "UTC"
USE_I18N = False
USE_TZ = True

# ========================
# VGM²P DEFAULTS
# ========================
# Every entry is overridable with a VGM2P_<NAME> environment variable.
VGM2P = {
    "GAMMA": env.float("VGM2P_GAMMA", default=0.995),
    "LR": env.float("VGM2P_LR", default=3e-4),
    "BATCH_SIZE": env.int("VGM2P_BATCH_SIZE", default=64),
    "OMEGA": env.float("VGM2P_OMEGA", default=5.0),
    "TAU": env.float("VGM2P_TAU", default=0.005),
    "GRADIENT_STEPS": env.int("VGM2P_GRADIENT_STEPS", default=20_000),
    "HIDDEN_DIMS": [int(h) for h in env.list("VGM2P_HIDDEN_DIMS", default=["64", "64"])],
    "ACTIVATION": env("VGM2P_ACTIVATION", default="tanh"),
    "R_EQUALS_K_FRACTION": env.float("VGM2P_R_EQUALS_K_FRACTION", default=0.25),
    "EVAL_EVERY": env.int("VGM2P_EVAL_EVERY", default=500),
    "EVAL_EPISODES": env.int("VGM2P_EVAL_EPISODES", default=10),
    "FM_SAMPLING_STEPS": env.int("VGM2P_FM_SAMPLING_STEPS", default=10),
    "ENUMERATION_CAP": env.int("VGM2P_ENUMERATION_CAP", default=10**6),
    "OUTPUT_ROOT": env("VGM2P_OUTPUT_ROOT", default=str(BASE_DIR / "runs")),
}

# ========================
# CELERY
# ========================
# Sweeps run eagerly (in-process) unless a broker is configured.
CELERY_BROKER_URL = env("CELERY_BROKER_URL", default="redis://localhost:6379/0")
CELERY_RESULT_BACKEND = env("CELERY_RESULT_BACKEND", default="redis://localhost:6379/1")
CELERY_TASK_ALWAYS_EAGER = env.bool("CELERY_TASK_ALWAYS_EAGER", default=True)
CELERY_TASK_EAGER_PROPAGATES = True
CELERY_ACCEPT_CONTENT = ["json"]
CELERY_TASK_SERIALIZER = "json"
CELERY_RESULT_SERIALIZER = "json"
CELERY_TIMEZONE = TIME_ZONE
CELERY_TASK_TRACK_STARTED = True
CELERY_TASK_TIME_LIMIT = 60 * 60  # 1 hour per sweep cell
CELERY_TASK_SOFT_TIME_LIMIT = 55 * 60
CELERY_WORKER_MAX_TASKS_PER_CHILD = 50
CELERY_BROKER_CONNECTION_RETRY_ON_STARTUP = True

CELERY_TASK_ROUTES = {
    "apps.trainer.tasks.*": {"queue": "sweeps"},
}

# ========================
# LOGGING
# ========================
LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "{levelname} {asctime} {module} {process:d} {thread:d} {message}",
            "style": "{",
        },
        "simple": {
            "format": "{levelname} {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "level": "INFO",
            "class": "logging.StreamHandler",
            "formatter": "simple",
        },
        "file": {
            "level": "WARNING",
            "class": "logging.FileHandler",
            "filename": BASE_DIR / "logs" / "vgm2p.log",
            "formatter": "verbose",
            "delay": True,
        },
    },
    "root": {
        "handlers": ["console"],
        "level": "WARNING",
    },
    "loggers": {
        "django": {
            "handlers": ["console", "file"],
            "level": "WARNING",
            "propagate": False,
        },
        "apps": {
            "handlers": ["console", "file"],
            "level": "DEBUG",
            "propagate": False,
        },
    },
}
