from django.db import models


class ExperimentRun(models.Model):
    """One invocation of a management command against a configuration"""
    COMMAND_CHOICES = [
        ('green', 'Green function'),
        ('functionals', 'Reduced functionals'),
        ('ansatz', 'Ansatz'),
        ('solve', 'Solve'),
        ('classify', 'Classify'),
        ('reduce_sweep', 'Reduced sweep'),
    ]

    BRANCH_CHOICES = [
        ('bubbling', 'Bubbling'),
        ('maximal', 'Maximal'),
    ]

    STATUS_CHOICES = [
        ('RUNNING', 'Running'),
        ('COMPLETED', 'Completed'),
        ('FAILED', 'Failed'),
    ]

    command = models.CharField(max_length=20, choices=COMMAND_CHOICES)
    config_hash = models.CharField(max_length=64, db_index=True)
    config_text = models.TextField()
    branch = models.CharField(max_length=10, choices=BRANCH_CHOICES, blank=True)
    output_dir = models.CharField(max_length=500)
    status = models.CharField(max_length=10, choices=STATUS_CHOICES, default='RUNNING')
    exit_code = models.IntegerField(null=True, blank=True)
    label = models.CharField(max_length=20, blank=True)
    message = models.TextField(blank=True)

    created_at = models.DateTimeField(auto_now_add=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        db_table = 'experiment_runs'
        ordering = ['-created_at']
        verbose_name = 'Experiment Run'
        verbose_name_plural = 'Experiment Runs'

    def __str__(self):
        return f"{self.get_command_display()} - {self.config_hash[:12]} - {self.get_status_display()}"


class SolveRecord(models.Model):
    """A single eps of a run with the diagnostics of its report"""
    run = models.ForeignKey(
        ExperimentRun,
        on_delete=models.CASCADE,
        related_name='solves'
    )

    eps = models.FloatField()
    mu = models.FloatField(null=True, blank=True)
    converged = models.BooleanField(default=False)
    iterations = models.IntegerField(default=0)
    residual = models.FloatField(null=True, blank=True)
    flux_defect = models.FloatField(null=True, blank=True)
    sup_v = models.FloatField(null=True, blank=True)
    mean_u = models.FloatField(null=True, blank=True)
    branch_label = models.CharField(max_length=20, blank=True)
    field_path = models.CharField(max_length=500, blank=True)

    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        db_table = 'solve_records'
        ordering = ['run', '-eps']
        verbose_name = 'Solve Record'
        verbose_name_plural = 'Solve Records'

    def __str__(self):
        return f"eps={self.eps:g} - {self.branch_label or 'unlabelled'}"
