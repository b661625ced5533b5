from django.apps import AppConfig


class ValuesConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "apps.values"
    verbose_name = "Value decomposition"
