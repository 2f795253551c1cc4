from django.apps import AppConfig


class ErmodelConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "ermodel"
    verbose_name = "ER model core"
