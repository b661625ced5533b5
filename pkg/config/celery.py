"""
Celery application for the VGM²P sweeps.

Start a worker for the ablation sweeps::

    celery -A config worker -l info -Q sweeps

Without a worker (``CELERY_TASK_ALWAYS_EAGER=True``, the default) the
sweeps run in-process.
"""

import os

from celery import Celery

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "config.settings.dev")

app = Celery("vgm2p")
app.config_from_object("django.conf:settings", namespace="CELERY")
app.autodiscover_tasks()
