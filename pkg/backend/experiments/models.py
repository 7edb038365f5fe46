from django.db import models

from baselines.schemes import SchemeId


class Sweep(models.Model):
    """One invocation of the sweep command"""

    STATUS_CHOICES = (
        ('RUNNING', 'Running'),
        ('DONE', 'Done'),
        ('FAILED', 'Failed'),
    )

    parameter = models.CharField(max_length=50)
    values = models.JSONField(default=list)
    schemes = models.JSONField(default=list)
    seeds = models.PositiveIntegerField(default=1)
    scenario_hash = models.CharField(max_length=32)
    out_dir = models.CharField(max_length=500)
    tool_version = models.CharField(max_length=20)
    status = models.CharField(max_length=20, choices=STATUS_CHOICES, default='RUNNING')
    created_at = models.DateTimeField(auto_now_add=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        db_table = 'sweeps'
        ordering = ['-created_at']

    def __str__(self):
        return f"Sweep over {self.parameter} ({self.get_status_display()})"


class ExperimentRun(models.Model):
    """One pipeline run, standalone or as a sweep point"""

    STATUS_CHOICES = (
        ('converged', 'Converged'),
        ('max_iter', 'Iteration limit'),
        ('infeasible', 'Infeasible'),
        ('error', 'Error'),
    )

    sweep = models.ForeignKey(Sweep, on_delete=models.CASCADE, null=True, blank=True, related_name='runs')
    scenario_hash = models.CharField(max_length=32)
    scheme = models.CharField(max_length=10, choices=SchemeId.choices, default=SchemeId.CORSMA)
    seed = models.IntegerField(default=0)
    parameter = models.CharField(max_length=50, blank=True)
    value = models.FloatField(null=True, blank=True)
    status = models.CharField(max_length=20, choices=STATUS_CHOICES)

    # Final metrics
    wsr = models.FloatField(null=True, blank=True, help_text='Weighted sum rate, b/s')
    common_ratio = models.FloatField(null=True, blank=True, help_text='Weighted common rate over WSR')
    sensing_snr = models.FloatField(null=True, blank=True)
    iterations = models.IntegerField(default=0)
    runtime = models.FloatField(default=0.0, help_text='Wall-clock seconds')

    options = models.JSONField(default=dict)
    result_path = models.CharField(max_length=500, blank=True)
    error = models.TextField(blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        db_table = 'experiment_runs'
        ordering = ['created_at']
        indexes = [
            models.Index(fields=['scheme', 'parameter'], name='experiment__scheme_7c1f0a_idx'),
        ]

    def __str__(self):
        return f"{self.scheme} seed={self.seed} ({self.status})"
