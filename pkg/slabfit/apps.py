from django.apps import AppConfig


class SlabfitConfig(AppConfig):
    name = "slabfit"
    verbose_name = "Slab-score manifold fit"
