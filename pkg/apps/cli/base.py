"""
Shared command plumbing.

``ExperimentCommand.handle`` resolves the run config, records an
``ExperimentRun``, calls ``execute_run`` and maps failures onto exit
codes: 0 success, 1 failed check, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import logging
from dataclasses import dataclass, field
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError
from rest_framework import serializers

from apps.core.exceptions import VGM2PError

from .run_service import error_detail, finish_run, resolve_run_config, start_run, write_manifest

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE = 0, 1, 2


@dataclass
class RunOutcome:
    outputs: dict[str, Path] = field(default_factory=dict)
    inputs: dict[str, Path] = field(default_factory=dict)
    timed: tuple[str, ...] = ()
    passed: bool = True
    summary: str = ""


def int_list(raw: str) -> list[int]:
    try:
        return [int(part) for part in raw.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {raw!r}") from exc


def float_list(raw: str) -> list[float]:
    try:
        return [float(part) for part in raw.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {raw!r}") from exc


class ExperimentCommand(BaseCommand):
    command_name = ""
    requires_system_checks: list[str] = []

    def build_run_config(self, options) -> dict:
        raise NotImplementedError

    def execute_run(self, run_config: dict) -> RunOutcome:
        raise NotImplementedError

    def handle(self, *args, **options):
        try:
            run_config = resolve_run_config(self.build_run_config(options))
        except (VGM2PError, serializers.ValidationError) as exc:
            raise CommandError(error_detail(exc), returncode=EXIT_USAGE) from exc

        output_dir = Path(run_config["output_dir"])
        output_dir.mkdir(parents=True, exist_ok=True)
        run = start_run(self.command_name, run_config)
        try:
            outcome = self.execute_run(run_config)
        except (VGM2PError, serializers.ValidationError) as exc:
            finish_run(run, exit_code=EXIT_USAGE)
            raise CommandError(error_detail(exc), returncode=EXIT_USAGE) from exc
        except Exception:
            finish_run(run, exit_code=EXIT_USAGE)
            logger.exception("Command %s crashed", self.command_name)
            raise

        manifest_hash = write_manifest(
            output_dir, run_config, inputs=outcome.inputs, outputs=outcome.outputs, timed=outcome.timed
        )
        exit_code = EXIT_OK if outcome.passed else EXIT_CHECK_FAILED
        finish_run(run, exit_code=exit_code, manifest_hash=manifest_hash)
        if not outcome.passed:
            raise CommandError(outcome.summary or f"{self.command_name}: check failed", returncode=EXIT_CHECK_FAILED)
        self.stdout.write(self.style.SUCCESS(outcome.summary or f"{self.command_name}: done ({output_dir})"))
