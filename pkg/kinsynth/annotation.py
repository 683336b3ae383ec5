#!/usr/bin/python
# -*- coding: ascii -*-
'''
Decorator based argument annotation.

The validate decorator of the validation module is built on the classes
defined here. Annotations are given as decorator keyword arguments, so
they never interfere with type hints:

@validate(age_years=Int(min=0), gender=OneOf(0, 1))
def encode_label(age_years, gender):
    ...

The annotations are stored in a private dictionary on the function
(__checks__), keyed by argument name. Each key holds a single object or
a tuple of objects, so several decorators can annotate the same argument
cooperatively:

@validate(n=Int(min=1))
@validate(n=Int(max=512))
def build(n):
    ...

Decorators that do not wrap the function only cost time at definition.
'''

#============================================================================

__all__=['AnnotationError', 'TupleStorage', 'AnnotationDecorator']

#============================================================================
# Exceptions

class AnnotationError(ValueError):
    '''Raised when an object not accepted by the class filter is stored.'''
    pass

#============================================================================

class TupleStorage(object):
    '''Proxy to the annotations of one key in an annotation dictionary.
    A single object is stored as is, more objects as a tuple. Only objects
    matching the class filter are yielded or accepted. The key may be
    changed freely, the instance itself stores no annotations.'''
    __slots__=['space', 'key', 'classfilter']
    def __init__(self, space, key, classfilter=object):
        '''@param space: annotation dictionary to operate on
        @param key: argument name, or 'return'
        @param classfilter: class or tuple of classes accepted
        '''
        self.space=space
        self.key=key
        self.classfilter=classfilter
    def __iter__(self):
        if self.key not in self.space:
            return
        storage=self.space[self.key]
        if isinstance(storage, tuple):
            for obj in storage:
                if isinstance(obj, self.classfilter):
                    yield obj
        elif isinstance(storage, self.classfilter):
            yield storage
    def __len__(self):
        return sum(1 for obj in self)
    def __contains__(self, obj):
        return any(o is obj for o in self)
    def add(self, obj):
        '''Adds an object or every object of a tuple.'''
        if isinstance(obj, tuple):
            for o in obj:
                self.add(o)
            return
        if not isinstance(obj, self.classfilter):
            raise AnnotationError('Object does not fit the class filter: key=%r, object=%r'%(self.key, obj))
        if self.key in self.space:
            storage=self.space[self.key]
            if isinstance(storage, tuple):
                self.space[self.key]=storage+(obj,)
            else:
                self.space[self.key]=(storage, obj)
        else:
            self.space[self.key]=obj

#============================================================================

class AnnotationDecorator(object):
    '''Annotates functions through keyword arguments. Subclasses override
    wrap() to add call-time behavior. The positional argument, if any,
    annotates the return value.'''
    _classfilter=object
    _attribute='__checks__'
    def __call__(self, __return__=None, **kw):
        def decorator(fn):
            # Determine the original function from a possible wrapper chain
            ofn=getattr(fn, '_original_function_', fn)
            space=ofn.__dict__.setdefault(self._attribute, {})
            storage=self.storage(space)
            for name, obj in kw.items():
                storage.key=name
                storage.add(obj)
            # Wrap only once, outer decorators reuse the existing wrapper
            if fn is not ofn:
                return fn
            wrapper=self.wrap(fn)
            if wrapper is not fn:
                wrapper._original_function_=fn
            return wrapper
        if __return__ is not None and callable(__return__) and not kw and not isinstance(__return__, self._classfilter):
            # Used without an argument list
            return decorator(__return__)
        if __return__ is not None:
            kw['return']=__return__
        return decorator
    def storage(self, space):
        return TupleStorage(space, None, classfilter=self._classfilter)
    def annotations(self, fn):
        '''Returns the annotation dictionary of a decorated function.'''
        ofn=getattr(fn, '_original_function_', fn)
        return getattr(ofn, self._attribute, {})
    def wrap(self, fn):
        '''Does not wrap by default.'''
        return fn

#============================================================================
