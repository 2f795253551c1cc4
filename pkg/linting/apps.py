from django.apps import AppConfig


class LintingConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "linting"
    verbose_name = "Lint engine"
