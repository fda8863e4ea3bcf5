"""pytest wiring: configure the Django settings the test suite expects."""
import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'config.settings')
django.setup()
