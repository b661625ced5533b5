import uuid

from django.db import models


class TimeStampedModel(models.Model):
    """Abstract base model with created/updated timestamps."""

    created_at = models.DateTimeField(auto_now_add=True, db_index=True)
    updated_at = models.DateTimeField(auto_now=True)

    class Meta:
        abstract = True
        ordering = ["-created_at"]


class UUIDModel(models.Model):
    """Abstract base model with UUID primary key."""

    id = models.UUIDField(primary_key=True, default=uuid.uuid4, editable=False)

    class Meta:
        abstract = True


class BaseModel(UUIDModel, TimeStampedModel):
    """Abstract base model combining UUID + timestamps."""

    class Meta(UUIDModel.Meta, TimeStampedModel.Meta):
        abstract = True


class RunStatus(models.TextChoices):
    RUNNING = "running", "Running"
    SUCCEEDED = "succeeded", "Succeeded"
    CHECK_FAILED = "check_failed", "Check failed"
    ERRORED = "errored", "Errored"


class ExperimentRun(BaseModel):
    """One invocation of an artifact-producing command."""

    command = models.CharField("command", max_length=32, db_index=True)
    config = models.JSONField("resolved config", default=dict)
    output_dir = models.CharField("output directory", max_length=512, blank=True)
    manifest_hash = models.CharField("manifest sha256", max_length=64, blank=True)
    status = models.CharField(
        "status",
        max_length=20,
        choices=RunStatus.choices,
        default=RunStatus.RUNNING,
    )
    exit_code = models.PositiveSmallIntegerField("exit code", null=True, blank=True)
    finished_at = models.DateTimeField("finished at", null=True, blank=True)

    class Meta(BaseModel.Meta):
        verbose_name = "experiment run"
        verbose_name_plural = "experiment runs"

    def __str__(self):
        return f"{self.command} [{self.get_status_display()}]"
