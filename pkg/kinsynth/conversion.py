#!/usr/bin/python
# -*- coding: ascii -*-
'''
Conversion of raw configuration values.

Values arrive as JSON scalars from a config file or as strings from the
command line. Converters turn both into the Python value a RunConfig
field expects. They are named As* so they can be used next to the
validators of the validation module without clashes.

Converters can be used in class form (AsInt) or in instance form when
they take arguments (AsInt(allow_none=True)). Several converters given as
a tuple are applied from left to right: (A, B) yields B(A(value)).

You can implement your own converter by subclassing Converter and
overriding its _convert class method and/or the convert instance method.
'''

#============================================================================

import os
import sys

#============================================================================
# Exported symbols

__all__=[
    'ConversionError', 'Converter',
    'AsBool', 'AsInt', 'AsFloat', 'AsStr', 'AsPath', 'AsIntList',
    'convert_value',
]

#============================================================================
# Exceptions

class ConversionError(ValueError):
    '''Error raised when a value fails to convert. The original exception
    information is stored in the original_exc attribute as returned by
    sys.exc_info().'''
    pass

#============================================================================
# Converters

class Converter(object):
    '''Abstract base class'''
    @staticmethod
    def call(converter, value, classtype=type(object)):
        '''Call a Converter class or instance on a value. Foreign objects
        leave the value unchanged.'''
        if type(converter) is classtype and issubclass(converter, Converter):
            return converter._convert(value)
        if isinstance(converter, Converter):
            return converter.convert(value)
        return value
    @classmethod
    def _convert(cls, value):
        raise NotImplementedError()
    def __init__(self, allow_none=False):
        self.allow_none=allow_none
    def convert(self, value):
        if self.allow_none and value is None:
            return None
        return self._convert(value)

#----------------------------------------------------------------------------

class AsBool(Converter):
    _true=('1', 'true', 'yes', 'on')
    _false=('0', 'false', 'no', 'off')
    @classmethod
    def _convert(cls, value):
        if isinstance(value, bool):
            return value
        if isinstance(value, str):
            lowered=value.strip().lower()
            if lowered in cls._true:
                return True
            if lowered in cls._false:
                return False
            raise ValueError('not a boolean: %r'%value)
        if isinstance(value, int) and value in (0, 1):
            return bool(value)
        raise ValueError('not a boolean: %r'%value)

#----------------------------------------------------------------------------

class AsInt(Converter):
    '''Integers. Floats are accepted only when they are integral.'''
    @classmethod
    def _convert(cls, value):
        if isinstance(value, bool):
            raise ValueError('booleans are not integers')
        if isinstance(value, float):
            if not value.is_integer():
                raise ValueError('not an integer: %r'%value)
            return int(value)
        if isinstance(value, str):
            return int(value.strip(), 0)
        return int(value)

#----------------------------------------------------------------------------

class AsFloat(Converter):
    @classmethod
    def _convert(cls, value):
        if isinstance(value, bool):
            raise ValueError('booleans are not numbers')
        if isinstance(value, str):
            value=value.strip()
        return float(value)

#----------------------------------------------------------------------------

class AsStr(Converter):
    @classmethod
    def _convert(cls, value):
        if isinstance(value, str):
            return value
        if isinstance(value, bytes):
            return value.decode('utf8')
        raise ValueError('not a string: %r'%(value,))

#----------------------------------------------------------------------------

class AsPath(Converter):
    '''File system paths, user home expanded. Empty strings become None.'''
    @classmethod
    def _convert(cls, value):
        if value is None or value=='':
            return None
        if isinstance(value, os.PathLike):
            value=os.fspath(value)
        return os.path.expanduser(AsStr._convert(value))

#----------------------------------------------------------------------------

class AsIntList(Converter):
    '''Lists of integers from a JSON list or a comma separated string.'''
    @classmethod
    def _convert(cls, value):
        if isinstance(value, str):
            value=[v for v in value.replace(' ', '').split(',') if v]
        if not isinstance(value, (list, tuple)):
            raise ValueError('not a list: %r'%(value,))
        return [AsInt._convert(v) for v in value]

#============================================================================

def convert_value(name, value, converters):
    '''Applies converters from left to right.
    @param name: name used in the error message
    @param converters: single converter or tuple of converters
    @raise ConversionError: when a converter fails
    '''
    if not isinstance(converters, tuple):
        converters=(converters,)
    for converter in converters:
        try:
            value=Converter.call(converter, value)
        except Exception as e:
            if isinstance(converter, Converter):
                converter=converter.__class__
            exc=ConversionError('Error converting %s by %s converter: %s = %r (%s)'%(name, converter.__name__, name, value, e))
            exc.original_exc=sys.exc_info()
            raise exc
    return value

#============================================================================
