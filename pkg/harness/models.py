"""
Harness Models - experiment run history
Artifacts live on disk under the run tree; these tables index them.
"""
import uuid

from django.db import models

from harness.domain import Outcome, PromptStrategy


class ExperimentRun(models.Model):
    """One invocation of run_experiment"""

    class Status(models.TextChoices):
        IN_PROGRESS = 'IN_PROGRESS', 'In Progress'
        COMPLETED = 'COMPLETED', 'Completed'
        FAILED = 'FAILED', 'Failed'

    id = models.UUIDField(primary_key=True, default=uuid.uuid4, editable=False)
    config_path = models.CharField(max_length=500, blank=True)
    output_root = models.CharField(max_length=500)

    status = models.CharField(max_length=50, choices=Status.choices, default=Status.IN_PROGRESS)
    analyzed = models.BooleanField(default=False)
    total_records = models.IntegerField(default=0)
    ok_records = models.IntegerField(default=0)
    extraction_failed_records = models.IntegerField(default=0)
    provider_error_records = models.IntegerField(default=0)

    error_message = models.TextField(blank=True, null=True)
    processing_duration = models.IntegerField(null=True, blank=True)

    started_at = models.DateTimeField(auto_now_add=True)
    completed_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        db_table = 'experiment_run'
        ordering = ['-started_at']

    def __str__(self):
        return f"Run {self.id} ({self.status}, {self.total_records} records)"


class ExperimentRecordEntry(models.Model):
    """One scenario x strategy x provider cell of a run"""

    run = models.ForeignKey(ExperimentRun, on_delete=models.CASCADE, related_name='records')
    scenario_id = models.CharField(max_length=200)
    strategy = models.CharField(max_length=20, choices=PromptStrategy.choices)
    provider_id = models.CharField(max_length=100)
    outcome = models.CharField(max_length=30, choices=Outcome.choices)

    record_dir = models.CharField(max_length=500)
    template_version = models.CharField(max_length=20)
    retries = models.IntegerField(default=0)
    level = models.CharField(max_length=2, blank=True, null=True)
    overall_f1 = models.FloatField(null=True, blank=True)

    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        db_table = 'experiment_record'
        ordering = ['scenario_id', 'strategy', 'provider_id']
        indexes = [
            models.Index(fields=['run', 'outcome'], name='idx_record_run_outcome'),
        ]

    def __str__(self):
        return f"{self.scenario_id}/{self.strategy}/{self.provider_id}: {self.outcome}"
