from django.apps import AppConfig


class IsospectralConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'isospectral'
    verbose_name = 'Isospectral Hydrogen-like Potentials'
