import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'tmc_bench.settings')
django.setup()
