#!/usr/bin/python
# -*- coding: ascii -*-
'''
Validation of function arguments and configuration values.

Validators can be used in class form if they need no arguments (Bool,
Int, Float, Str) or in instance form with arguments:

from kinsynth.validation import *

@validate(side=PowerOfTwo(min=32), n=Int(min=1))
def build(side, n):
    ...

Multiple validators given for the same argument (in a tuple or by more
decorators) are alternatives: the value is accepted if any of them accepts
it. Use the And composite validator when all of them must hold.

check_value() applies the same logic outside of function calls. The
configuration layer uses it to produce field level error messages.

Validation at call boundaries costs time on each call, so it is used on
the public operations only, never inside the tensor kernels.
'''

#============================================================================

import math
import numbers
from functools import wraps

from kinsynth.common import get_function_argument_names, function_name
from kinsynth.annotation import AnnotationDecorator

#============================================================================
# Exported symbols

__all__=[
    'ValidationError', 'Validator', 'And', 'AllowNone',
    'Bool', 'Int', 'Float', 'Str', 'OneOf', 'PowerOfTwo', 'Sequence',
    'InstanceOf', 'check_value', 'ValidationDecorator', 'validate',
]

#============================================================================
# Exceptions

class ValidationError(ValueError):
    '''Error raised when an argument or value fails validation.'''
    pass

#============================================================================
# Validators

class Validator(object):
    '''Abstract base class'''
    @staticmethod
    def call(validator, value, classtype=type(object)):
        '''Call a Validator class or instance to validate a value.
        Returns None for foreign objects or a bool as a result.'''
        if type(validator) is classtype and issubclass(validator, Validator):
            return validator._check(value)
        if isinstance(validator, Validator):
            return validator.check(value)
        return None
    @staticmethod
    def describe(validator):
        if isinstance(validator, Validator):
            return repr(validator)
        return validator.__name__
    @classmethod
    def _check(cls, value):
        '''Called on validators used in class form.'''
        raise NotImplementedError('%s requires arguments'%cls.__name__)
    def check(self, value):
        '''Called on validators used in instance form.'''
        raise NotImplementedError()
    def __repr__(self):
        args=', '.join('%s=%r'%(k, v) for k, v in sorted(self.__dict__.items()) if v is not None)
        return '%s(%s)'%(self.__class__.__name__, args)

#----------------------------------------------------------------------------

class And(Validator):
    def __init__(self, *validators):
        self.validators=validators
    def check(self, value):
        for v in self.validators:
            r=Validator.call(v, value)
            if r is not None and not r:
                return False
        return True
    def __repr__(self):
        return 'And(%s)'%', '.join(Validator.describe(v) for v in self.validators)

#----------------------------------------------------------------------------

class AllowNone(Validator):
    @classmethod
    def _check(cls, value):
        return value is None
    def check(self, value):
        return value is None

#----------------------------------------------------------------------------

class Bool(Validator):
    @classmethod
    def _check(cls, value):
        return isinstance(value, bool)
    def check(self, value):
        return isinstance(value, bool)

#----------------------------------------------------------------------------

class Int(Validator):
    '''Integers, numpy integers included, never bools.'''
    @classmethod
    def _check(cls, value):
        return isinstance(value, numbers.Integral) and not isinstance(value, bool)
    def __init__(self, min=None, max=None):
        self.min=min
        self.max=max
    def check(self, value):
        if not Int._check(value):
            return False
        if self.min is not None and value<self.min:
            return False
        if self.max is not None and value>self.max:
            return False
        return True

#----------------------------------------------------------------------------

class Float(Validator):
    '''Finite real numbers. Bounds are inclusive unless exclusive is set.'''
    @classmethod
    def _check(cls, value):
        return isinstance(value, numbers.Real) and not isinstance(value, bool) and math.isfinite(value)
    def __init__(self, min=None, max=None, exclusive=False):
        self.min=min
        self.max=max
        self.exclusive=exclusive or None
    def check(self, value):
        if not Float._check(value):
            return False
        if self.exclusive:
            if self.min is not None and value<=self.min:
                return False
            if self.max is not None and value>=self.max:
                return False
        else:
            if self.min is not None and value<self.min:
                return False
            if self.max is not None and value>self.max:
                return False
        return True

#----------------------------------------------------------------------------

class Str(Validator):
    @classmethod
    def _check(cls, value):
        return isinstance(value, str)
    def __init__(self, maxlen=None, empty=True):
        self.maxlen=maxlen
        self.empty=empty
    def check(self, value):
        if not isinstance(value, str):
            return False
        if not self.empty and not value:
            return False
        if self.maxlen is not None and len(value)>self.maxlen:
            return False
        return True

#----------------------------------------------------------------------------

class OneOf(Validator):
    '''Accepts one of the given values (compared by equality and type).'''
    def __init__(self, *choices):
        self.choices=choices
    def check(self, value):
        for choice in self.choices:
            if type(choice) is type(value) and choice==value:
                return True
            if Int._check(choice) and Int._check(value) and choice==value:
                return True
        return False
    def __repr__(self):
        return 'OneOf(%s)'%', '.join(repr(c) for c in self.choices)

#----------------------------------------------------------------------------

class PowerOfTwo(Validator):
    @classmethod
    def _check(cls, value):
        return Int._check(value) and value>0 and (value&(value-1))==0
    def __init__(self, min=None):
        self.min=min
    def check(self, value):
        if not PowerOfTwo._check(value):
            return False
        return self.min is None or value>=self.min

#----------------------------------------------------------------------------

class Sequence(Validator):
    '''List or tuple whose items all pass the item validator.'''
    def __init__(self, item=None, min_length=None, max_length=None):
        self.item=item
        self.min_length=min_length
        self.max_length=max_length
    def check(self, value):
        if not isinstance(value, (list, tuple)):
            return False
        if self.min_length is not None and len(value)<self.min_length:
            return False
        if self.max_length is not None and len(value)>self.max_length:
            return False
        if self.item is not None:
            for v in value:
                if not Validator.call(self.item, v):
                    return False
        return True

#----------------------------------------------------------------------------

class InstanceOf(Validator):
    def __init__(self, *classes):
        self.classes=classes
    def check(self, value):
        return isinstance(value, self.classes)
    def __repr__(self):
        return 'InstanceOf(%s)'%', '.join(c.__name__ for c in self.classes)

#============================================================================

def _validators(annotation):
    if isinstance(annotation, tuple):
        return annotation
    return (annotation,)

def check_value(name, value, validators):
    '''Validates a value against alternative validators. Returns None if
    any of them accepts the value, otherwise a message naming the value
    and the validators that refused it.
    @param name: name used in the message
    @param validators: single validator or tuple of alternatives
    '''
    failed=[]
    for validator in _validators(validators):
        valid=Validator.call(validator, value)
        if valid is None:
            continue
        if valid:
            return None
        failed.append(validator)
    if not failed:
        return None
    return '%s = %r is refused by %s'%(name, value, ' or '.join(Validator.describe(v) for v in failed))

#============================================================================

class ValidationDecorator(AnnotationDecorator):
    '''Decorator for function boundary validation. Checks the arguments
    before the call and the return value after it.'''
    _classfilter=(Validator, type(Validator))
    def raiseError(self, fn, name, message):
        if name=='return':
            raise ValidationError('Error checking return value of function %r: %s'%(function_name(fn), message))
        raise ValidationError('Error checking argument %r of function %r: %s'%(name, function_name(fn), message))
    def validateArgument(self, fn, storage, name, value):
        storage.key=name
        validators=tuple(storage)
        if not validators:
            return
        message=check_value(name, value, validators)
        if message is not None:
            self.raiseError(fn, name, message)
    def wrap(self, fn):
        argnames=get_function_argument_names(fn)
        space=fn.__dict__.setdefault(self._attribute, {})
        @wraps(fn)
        def wrapper(*args, **kw):
            storage=self.storage(space)
            for name, value in zip(argnames, args):
                self.validateArgument(fn, storage, name, value)
            for name, value in kw.items():
                self.validateArgument(fn, storage, name, value)
            return_value=fn(*args, **kw)
            self.validateArgument(fn, storage, 'return', return_value)
            return return_value
        return wrapper

#============================================================================

validate=ValidationDecorator()

#============================================================================
