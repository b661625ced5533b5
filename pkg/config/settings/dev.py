"""
Development settings for the VGM²P experiment project.
"""
from .base import *  # noqa: F401, F403

# ========================
# DEBUG
# ========================
DEBUG = True

# ========================
# LOGGING (verbose in dev)
# ========================
LOGGING["handlers"]["console"]["level"] = "DEBUG"  # noqa: F405
