"""
Test settings for the VGM²P experiment project.
"""
from .base import *  # noqa: F401, F403

# ========================
# IN-MEMORY DATABASE
# ========================
DATABASES = {
    "default": {
        "ENGINE": "django.db.backends.sqlite3",
        "NAME": ":memory:",
    }
}

# ========================
# CELERY (synchronous in tests)
# ========================
CELERY_TASK_ALWAYS_EAGER = True
CELERY_TASK_EAGER_PROPAGATES = True
CELERY_BROKER_URL = "memory://"
CELERY_RESULT_BACKEND = "cache+memory://"

# ========================
# DESK-SIZED DEFAULTS
# ========================
VGM2P = {  # noqa: F405
    **VGM2P,  # noqa: F405
    "GRADIENT_STEPS": 20,
    "HIDDEN_DIMS": [16, 16],
    "BATCH_SIZE": 16,
    "EVAL_EVERY": 10,
    "EVAL_EPISODES": 2,
    "FM_SAMPLING_STEPS": 4,
    "OUTPUT_ROOT": "/tmp/vgm2p-test-runs",
}

# ========================
# LOGGING (console only)
# ========================
LOGGING["loggers"]["apps"]["handlers"] = ["console"]  # noqa: F405
LOGGING["loggers"]["django"]["handlers"] = ["console"]  # noqa: F405
