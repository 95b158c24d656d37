"""
Settings used by the test suite.

Artifacts always go where each test points them, never to a shared
directory picked up from the environment. App loggers propagate so caplog
sees their records.
"""
from config.settings.base import *

NODENET_OUTPUT_DIR = None

LOGGING = finalize_logging(LOGGING, 'WARNING')
for _app in NODENET_APPS:
    LOGGING['loggers'][_app]['propagate'] = True
