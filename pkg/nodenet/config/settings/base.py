"""
Base settings for NodeNet.

Django is used for configuration, logging and management commands only;
there are no models, database or HTTP surface. Override any value in an
untracked ``local.py`` next to this file.
"""
from pathlib import Path
import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent.parent

# Management commands never sign anything; Django still requires a key.
SECRET_KEY = 'nodenet-commands-only'

DEBUG = False

# Application definition
INSTALLED_APPS = [
    'core.apps.CoreConfig',
    'citegraph.apps.CitegraphConfig',
    'featurize.apps.FeaturizeConfig',
    'neuralnet.apps.NeuralnetConfig',
    'graphloss.apps.GraphlossConfig',
    'trainer.apps.TrainerConfig',
    'experiments.apps.ExperimentsConfig',
]

DATABASES = {}

USE_TZ = True
TIME_ZONE = 'UTC'

# Where train/eval/stats write their artifacts; overrides run.output_dir.
# The only value NodeNet reads from the environment.
NODENET_OUTPUT_DIR = os.getenv('NODENET_OUTPUT_DIR') or None

NODENET_APPS = ['core', 'citegraph', 'featurize', 'neuralnet', 'graphloss', 'trainer', 'experiments']

# Level of the app loggers and an optional rotating log file; set in local.py
NODENET_LOG_LEVEL = 'INFO'
NODENET_LOG_FILE = None

# Logging
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'django': {
            'handlers': ['console'],
            'level': 'INFO',
            'propagate': True,
        },
        **{
            app: {
                'handlers': ['console'],
                'level': NODENET_LOG_LEVEL,
                'propagate': False,
            }
            for app in NODENET_APPS
        },
    },
}


def finalize_logging(logging_config, level, log_file=None):
    """Apply the app log level and attach the rotating file handler when a path is set."""
    for app in NODENET_APPS:
        logging_config['loggers'][app]['level'] = level
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        logging_config['handlers']['file'] = {
            'level': 'INFO',
            'class': 'logging.handlers.RotatingFileHandler',
            'filename': str(log_file),
            'maxBytes': 5 * 1024 * 1024,
            'backupCount': 3,
            'formatter': 'verbose',
        }
        for logger_config in logging_config['loggers'].values():
            if 'file' not in logger_config['handlers']:
                logger_config['handlers'].append('file')
    return logging_config
