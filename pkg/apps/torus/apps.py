from django.apps import AppConfig


class TorusConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "apps.torus"
    verbose_name = "Spectral torus"
