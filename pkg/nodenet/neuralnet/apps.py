from django.apps import AppConfig

class NeuralnetConfig(AppConfig):
    name = 'neuralnet'
    verbose_name = 'Neural Network'
