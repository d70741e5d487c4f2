from django.apps import AppConfig


class DeconvConfig(AppConfig):
    name = "deconv"
    verbose_name = "Singular deconvolution estimator"
