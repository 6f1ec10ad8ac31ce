from django.apps import AppConfig


class GreenConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "apps.green"
    verbose_name = "Periodic Green function"
