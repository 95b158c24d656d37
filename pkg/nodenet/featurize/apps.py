from django.apps import AppConfig

class FeaturizeConfig(AppConfig):
    name = 'featurize'
    verbose_name = 'Feature Transforms'
