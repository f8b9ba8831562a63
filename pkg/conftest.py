import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'Utilcast.settings')
django.setup()
