from django.apps import AppConfig


class HiggsConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "apps.higgs"
    verbose_name = "Higgs substitution"
