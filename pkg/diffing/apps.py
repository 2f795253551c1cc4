from django.apps import AppConfig


class DiffingConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "diffing"
    verbose_name = "Model diff"
