"""
Run Service Layer
=================
Resolved run configs, output directories, manifests and the
``ExperimentRun`` registry shared by every artifact-producing command.

Manifest layout (``manifest.json`` beside the outputs)::

    {
        "command": "train",
        "config": {...resolved RunConfig...},
        "config_hash": "1f2e...",
        "inputs": {"dataset": "<sha256>", ...},
        "outputs": {"losses.csv": "<sha256>", ...}
    }

Outputs that carry wall-clock timings are listed without a hash so two
runs of the same config produce identical manifests.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any

from django.conf import settings
from django.db import models
from django.utils import timezone
from rest_framework import serializers

from apps.core.exceptions import ArgumentError, VGM2PError
from apps.core.models import ExperimentRun, RunStatus
from apps.core.renderers import config_hash, parse_document, render_document, sha256_file, write_document
from apps.trainer.config import TrainConfig

logger = logging.getLogger(__name__)

CONFIG_NAME = "config.json"
MANIFEST_NAME = "manifest.json"


class RunCommand(models.TextChoices):
    GEN_DATA = "gen-data", "Generate an offline dataset"
    TRAIN = "train", "Train a policy"
    EVAL = "eval", "Evaluate a checkpoint"
    VERIFY = "verify", "Run the oracle checks"
    BENCH = "bench", "Time the samplers"
    EXPORT_PLOTS = "export-plots", "Export plot data"


class RunConfigSerializer(serializers.Serializer):
    command = serializers.ChoiceField(choices=RunCommand.choices)
    env_name = serializers.CharField(allow_blank=True, default="")
    output_dir = serializers.CharField()
    inputs = serializers.DictField(child=serializers.CharField(), default=dict)
    params = serializers.DictField(default=dict)
    train = serializers.DictField(required=False, allow_null=True, default=None)

    def validate_train(self, value):
        if value is None:
            return None
        try:
            return TrainConfig.from_dict(value).as_dict()
        except ArgumentError as exc:
            raise serializers.ValidationError(exc.detail)


def resolve_run_config(data: dict) -> dict:
    """Validated, JSON-ready run config; raises DRF ``ValidationError``."""
    serializer = RunConfigSerializer(data=data)
    serializer.is_valid(raise_exception=True)
    resolved = dict(serializer.validated_data)
    resolved["command"] = str(resolved["command"])
    return resolved


def load_run_config(path: str | Path) -> dict:
    return resolve_run_config(parse_document(Path(path).read_bytes()))


def output_dir_for(command: str, key: dict, out: str | None = None) -> Path:
    """``--out`` if given, else ``<OUTPUT_ROOT>/<command>-<hash of key>``."""
    if out:
        return Path(out)
    root = Path(settings.VGM2P["OUTPUT_ROOT"])
    return root / f"{command}-{config_hash(key)}"


def write_manifest(
    output_dir: Path,
    run_config: dict,
    *,
    inputs: dict[str, str | Path] | None = None,
    outputs: dict[str, Path] | None = None,
    timed: tuple[str, ...] = (),
) -> str:
    """Write ``config.json`` and ``manifest.json``; returns the manifest sha256."""
    write_document(output_dir / CONFIG_NAME, run_config)
    manifest: dict[str, Any] = {
        "command": run_config["command"],
        "config": run_config,
        "config_hash": config_hash(run_config),
        "inputs": {name: sha256_file(path) for name, path in sorted((inputs or {}).items())},
        "outputs": {
            name: (None if name in timed else sha256_file(path))
            for name, path in sorted((outputs or {}).items())
        },
    }
    return write_document(output_dir / MANIFEST_NAME, manifest)


# ═══════════════════════════════════════════════════════════════════
# RUN REGISTRY
# ═══════════════════════════════════════════════════════════════════


def start_run(command: str, run_config: dict) -> ExperimentRun:
    return ExperimentRun.objects.create(
        command=command,
        config=run_config,
        output_dir=run_config.get("output_dir", ""),
        status=RunStatus.RUNNING,
    )


def finish_run(run: ExperimentRun, *, exit_code: int, manifest_hash: str = "") -> ExperimentRun:
    if exit_code == 0:
        run.status = RunStatus.SUCCEEDED
    elif exit_code == 1:
        run.status = RunStatus.CHECK_FAILED
    else:
        run.status = RunStatus.ERRORED
    run.exit_code = exit_code
    run.manifest_hash = manifest_hash
    run.finished_at = timezone.now()
    run.save(update_fields=["status", "exit_code", "manifest_hash", "finished_at", "updated_at"])
    logger.info("Run %s finished: %s (exit %d)", run.pk, run.status, exit_code)
    return run


def error_detail(exc: Exception) -> str:
    if isinstance(exc, VGM2PError):
        return f"{exc.code}: {exc.detail}"
    if isinstance(exc, serializers.ValidationError):
        return render_document(exc.detail).decode("utf-8").strip()
    return str(exc)


def existing_input(path: str | Path, what: str) -> str:
    """Absolute path of an input file; ArgumentError when it is missing."""
    resolved = Path(path).resolve()
    if not resolved.is_file():
        raise ArgumentError(f"{what} {resolved} does not exist")
    return str(resolved)
