from django.apps import AppConfig


class CurvatureConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.curvature'
    verbose_name = 'Permutation curvature'
