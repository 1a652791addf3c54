from django.db import models


class BenchmarkRun(models.Model):
    """One invocation of the phiclosure command and the files it wrote"""
    STATUS_CHOICES = [
        ('pending', 'Pending'),
        ('running', 'Running'),
        ('completed', 'Completed'),
        ('failed', 'Failed'),
    ]

    command = models.CharField(max_length=40)
    label = models.CharField(max_length=120, blank=True, default='')
    config = models.JSONField(default=dict, help_text="Validated run configuration")
    status = models.CharField(max_length=20, choices=STATUS_CHOICES, default='pending')
    error_message = models.TextField(blank=True, null=True)
    error_details = models.JSONField(default=dict, help_text="Detailed error information for debugging")
    outputs = models.JSONField(default=list, help_text="Paths of the files written by the run")
    created_at = models.DateTimeField(auto_now_add=True)
    updated_at = models.DateTimeField(auto_now=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        name = f"{self.command} {self.label}".strip()
        return f"{name} - {self.get_status_display()}"

    @property
    def is_complete(self):
        return self.status == 'completed'

    def mark_running(self):
        self.status = 'running'
        self.save(update_fields=['status', 'updated_at'])

    def mark_completed(self, outputs, label=None):
        self.status = 'completed'
        self.outputs = [str(path) for path in outputs]
        if label:
            self.label = label
        self.save()

    def set_error(self, error_message, error_details=None):
        """Set error information for the run"""
        self.status = 'failed'
        self.error_message = error_message
        if error_details:
            self.error_details = error_details
        self.save()
