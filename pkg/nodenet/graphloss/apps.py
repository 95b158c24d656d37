from django.apps import AppConfig

class GraphlossConfig(AppConfig):
    name = 'graphloss'
    verbose_name = 'Graph Regularization'
