from django.apps import AppConfig


class ClosuresConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "closures"
    verbose_name = "Moment closures"
