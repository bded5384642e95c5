from django.conf import settings
from django.core.management.base import BaseCommand

from ...config import dump_yaml


class Command(BaseCommand):
    help = "Print the built-in run configuration as YAML"

    def handle(self, *args, **options):
        self.stdout.write(dump_yaml(settings.MIXEDFLOW_DEFAULTS), ending='')
