import uuid

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="ExperimentRun",
            fields=[
                ("id", models.UUIDField(default=uuid.uuid4, editable=False, primary_key=True, serialize=False)),
                ("created_at", models.DateTimeField(auto_now_add=True, db_index=True)),
                ("updated_at", models.DateTimeField(auto_now=True)),
                ("command", models.CharField(db_index=True, max_length=32, verbose_name="command")),
                ("config", models.JSONField(default=dict, verbose_name="resolved config")),
                ("output_dir", models.CharField(blank=True, max_length=512, verbose_name="output directory")),
                ("manifest_hash", models.CharField(blank=True, max_length=64, verbose_name="manifest sha256")),
                (
                    "status",
                    models.CharField(
                        choices=[
                            ("running", "Running"),
                            ("succeeded", "Succeeded"),
                            ("check_failed", "Check failed"),
                            ("errored", "Errored"),
                        ],
                        default="running",
                        max_length=20,
                        verbose_name="status",
                    ),
                ),
                ("exit_code", models.PositiveSmallIntegerField(blank=True, null=True, verbose_name="exit code")),
                ("finished_at", models.DateTimeField(blank=True, null=True, verbose_name="finished at")),
            ],
            options={
                "verbose_name": "experiment run",
                "verbose_name_plural": "experiment runs",
                "ordering": ["-created_at"],
                "abstract": False,
            },
        ),
    ]
