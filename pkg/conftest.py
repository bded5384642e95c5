import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'channelflow.settings')
django.setup()
