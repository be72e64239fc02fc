from django.apps import AppConfig


class VemConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'vem'
    verbose_name = 'Virtual element operators'
