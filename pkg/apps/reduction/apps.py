from django.apps import AppConfig


class ReductionConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "apps.reduction"
    verbose_name = "Finite-dimensional reduction"
