# Generated by Django 4.2.7

from django.db import migrations, models
import django.db.models.deletion
import uuid


class Migration(migrations.Migration):
    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="ExperimentRun",
            fields=[
                (
                    "id",
                    models.UUIDField(
                        default=uuid.uuid4,
                        editable=False,
                        primary_key=True,
                        serialize=False,
                    ),
                ),
                ("config_path", models.CharField(blank=True, max_length=500)),
                ("output_root", models.CharField(max_length=500)),
                (
                    "status",
                    models.CharField(
                        choices=[
                            ("IN_PROGRESS", "In Progress"),
                            ("COMPLETED", "Completed"),
                            ("FAILED", "Failed"),
                        ],
                        default="IN_PROGRESS",
                        max_length=50,
                    ),
                ),
                ("analyzed", models.BooleanField(default=False)),
                ("total_records", models.IntegerField(default=0)),
                ("ok_records", models.IntegerField(default=0)),
                ("extraction_failed_records", models.IntegerField(default=0)),
                ("provider_error_records", models.IntegerField(default=0)),
                ("error_message", models.TextField(blank=True, null=True)),
                ("processing_duration", models.IntegerField(blank=True, null=True)),
                ("started_at", models.DateTimeField(auto_now_add=True)),
                ("completed_at", models.DateTimeField(blank=True, null=True)),
            ],
            options={
                "db_table": "experiment_run",
                "ordering": ["-started_at"],
            },
        ),
        migrations.CreateModel(
            name="ExperimentRecordEntry",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                ("scenario_id", models.CharField(max_length=200)),
                (
                    "strategy",
                    models.CharField(
                        choices=[
                            ("baseline", "One-shot baseline"),
                            ("cot", "Chain-of-thought"),
                            ("cot_verifier", "Chain-of-thought with verifier"),
                        ],
                        max_length=20,
                    ),
                ),
                ("provider_id", models.CharField(max_length=100)),
                (
                    "outcome",
                    models.CharField(
                        choices=[
                            ("ok", "Ok"),
                            ("extraction_failed", "Extraction failed"),
                            ("provider_error", "Provider error"),
                        ],
                        max_length=30,
                    ),
                ),
                ("record_dir", models.CharField(max_length=500)),
                ("template_version", models.CharField(max_length=20)),
                ("retries", models.IntegerField(default=0)),
                ("level", models.CharField(blank=True, max_length=2, null=True)),
                ("overall_f1", models.FloatField(blank=True, null=True)),
                ("created_at", models.DateTimeField(auto_now_add=True)),
                (
                    "run",
                    models.ForeignKey(
                        on_delete=django.db.models.deletion.CASCADE,
                        related_name="records",
                        to="harness.experimentrun",
                    ),
                ),
            ],
            options={
                "db_table": "experiment_record",
                "ordering": ["scenario_id", "strategy", "provider_id"],
                "indexes": [
                    models.Index(fields=["run", "outcome"], name="idx_record_run_outcome"),
                ],
            },
        ),
    ]
