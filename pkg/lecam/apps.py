from django.apps import AppConfig


class LecamConfig(AppConfig):
    name = "lecam"
    verbose_name = "Two-point lower bounds"
