#!/usr/bin/python
# -*- coding: ascii -*-
'''
Common utilities shared by all kinsynth modules.

'''

#============================================================================

import logging
import sys
from inspect import getfullargspec

#============================================================================

__all__=[
    'KinsynthError', 'get_function_argument_names', 'function_name',
    'configure_logging', 'LOG_FORMAT',
]

#============================================================================
# Exceptions

class KinsynthError(Exception):
    '''Root of all errors raised deliberately by this package.'''
    pass

#============================================================================
# Retrieving the list of argument names for a function

def get_function_argument_names(fn):
    '''Returns the positional argument names of fn, in order.'''
    return getfullargspec(fn)[0]

def function_name(fn):
    return getattr(fn, '__qualname__', fn.__name__)

#============================================================================
# Logging

LOG_FORMAT='%(asctime)s %(levelname)-7s %(name)s: %(message)s'

def configure_logging(level='INFO', stream=None):
    '''Installs a single stream handler on the package logger. Only the
    command line front end calls this; library modules just log.
    @param level: logging level name or number
    @param stream: target stream, stderr by default
    '''
    if isinstance(level, str):
        level=logging.getLevelName(level.upper())
    logger=logging.getLogger('kinsynth')
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    handler=logging.StreamHandler(stream or sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logger.addHandler(handler)
    logger.setLevel(level)
    logger.propagate=False
    return logger

#============================================================================
