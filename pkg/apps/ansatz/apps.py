from django.apps import AppConfig


class AnsatzConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "apps.ansatz"
    verbose_name = "Bubble ansatz"
