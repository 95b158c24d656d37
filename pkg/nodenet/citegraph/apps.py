from django.apps import AppConfig

class CitegraphConfig(AppConfig):
    name = 'citegraph'
    verbose_name = 'Citation Graphs'
