from django.apps import AppConfig


class MixedflowConfig(AppConfig):
    name = 'mixedflow'
    verbose_name = 'Navier-Stokes with mixed boundary conditions'
