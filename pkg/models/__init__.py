#!/usr/bin/python3
"""
initialize the models package

Process-wide settings are read once from the environment here:
TDSCHEDULE_THREADS caps run-level parallelism, TDSCHEDULE_LOG_LEVEL names the
console's logging level.
"""

from os import getenv


def _int_env(name, default=0):
    """reads a non-negative integer from the environment"""
    try:
        value = int(getenv(name, default))
    except (TypeError, ValueError):
        return default
    return max(value, 0)


threads_t = _int_env("TDSCHEDULE_THREADS")
log_level_t = getenv("TDSCHEDULE_LOG_LEVEL", "WARNING").upper()
