"""
Settings module for NodeNet: ``base`` plus an optional untracked ``local.py``.

``local.py`` may set ``NODENET_LOG_LEVEL``, ``NODENET_LOG_FILE``, ``DEBUG``
or anything else; logging is finalized after it is read.
"""
from .base import *

# Load any local settings (not version controlled)
try:
    from .local import *
except ImportError:
    pass

LOGGING = finalize_logging(LOGGING, NODENET_LOG_LEVEL, NODENET_LOG_FILE)
