import os

import django

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "manifold_lab.settings")
django.setup()
