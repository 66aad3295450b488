from django.apps import AppConfig


class WolffConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.wolff'
    verbose_name = 'Wolff potentials'
