#!/usr/bin/python
# -*- coding: ascii -*-
'''
Parameters, layers and the Network base class.

A Network owns an ordered set of named Parameters. Layers register their
parameters under dotted names ("conv1.weight"), and every network of a
model is given a prefix ("E", "G", "Dz", ...) so names are unique across
a whole checkpoint.

Weights are initialized uniformly in [-s, s] with
s = sqrt(6 / (fan_in + fan_out)); biases start at zero.
'''

#============================================================================

from collections import OrderedDict
import math

import numpy as np

from kinsynth.common import KinsynthError
from kinsynth import numerics as nx

#============================================================================

__all__=[
    'NetworkError', 'Parameter', 'glorot_uniform', 'Dense', 'Conv2d',
    'ConvTranspose2d', 'Network', 'load_networks_state',
]

#============================================================================
# Exceptions

class NetworkError(KinsynthError, ValueError):
    '''Raised on duplicate or mismatching parameter names and shapes.'''
    def __init__(self, message, missing=(), unexpected=()):
        KinsynthError.__init__(self, message)
        self.missing=list(missing)
        self.unexpected=list(unexpected)

#============================================================================

class Parameter(nx.Tensor):
    '''Trainable leaf tensor with a name.'''
    __slots__=['name']
    def __init__(self, value, name):
        nx.Tensor.__init__(self, np.array(value, copy=True), requires_grad=True)
        self.name=name
    def __repr__(self):
        return 'Parameter(%r, shape=%r, dtype=%s)'%(self.name, self.shape, self.dtype)

def glorot_uniform(rng, shape, fan_in, fan_out, dtype=np.float32):
    s=math.sqrt(6.0/(fan_in+fan_out))
    return rng.uniform(-s, s, shape).astype(dtype)

#============================================================================
# Layers

class Dense(object):
    def __init__(self, rng, fan_in, fan_out, dtype=np.float32):
        self.weight=Parameter(glorot_uniform(rng, (fan_in, fan_out), fan_in, fan_out, dtype), 'weight')
        self.bias=Parameter(np.zeros(fan_out, dtype=dtype), 'bias')
    def parameters(self):
        return [self.weight, self.bias]
    def __call__(self, x):
        return nx.dense(x, self.weight, self.bias)

class Conv2d(object):
    def __init__(self, rng, channels_in, channels_out, kernel, stride=1, padding=0, dtype=np.float32):
        self.stride=stride
        self.padding=padding
        shape=(channels_out, channels_in, kernel, kernel)
        self.weight=Parameter(glorot_uniform(rng, shape, channels_in*kernel*kernel, channels_out*kernel*kernel, dtype), 'weight')
        self.bias=Parameter(np.zeros(channels_out, dtype=dtype), 'bias')
    def parameters(self):
        return [self.weight, self.bias]
    def __call__(self, x):
        return nx.conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)

class ConvTranspose2d(object):
    def __init__(self, rng, channels_in, channels_out, kernel, stride=1, padding=0, output_padding=0, dtype=np.float32):
        self.stride=stride
        self.padding=padding
        self.output_padding=output_padding
        shape=(channels_in, channels_out, kernel, kernel)
        self.weight=Parameter(glorot_uniform(rng, shape, channels_in*kernel*kernel, channels_out*kernel*kernel, dtype), 'weight')
        self.bias=Parameter(np.zeros(channels_out, dtype=dtype), 'bias')
    def parameters(self):
        return [self.weight, self.bias]
    def __call__(self, x):
        return nx.conv_transpose2d(x, self.weight, self.bias, stride=self.stride,
            padding=self.padding, output_padding=self.output_padding)

#============================================================================

class Network(object):
    '''Base class of all trainable networks. Subclasses create layers in
    __init__ through add() and implement forward().'''
    def __init__(self, prefix):
        self.prefix=prefix
        self._parameters=OrderedDict()
        self._layers=OrderedDict()
    def add(self, name, layer):
        '''Registers a layer and prefixes its parameter names.'''
        if name in self._layers:
            raise NetworkError('layer %r registered twice in %s'%(name, self.prefix))
        for p in layer.parameters():
            full='%s.%s.%s'%(self.prefix, name, p.name.rsplit('.', 1)[-1])
            if full in self._parameters:
                raise NetworkError('duplicate parameter name %r'%full)
            p.name=full
            self._parameters[full]=p
        self._layers[name]=layer
        return layer
    def layer(self, name):
        return self._layers[name]
    def parameters(self):
        return list(self._parameters.values())
    def named_parameters(self):
        return list(self._parameters.items())
    def zero_grad(self):
        for p in self._parameters.values():
            p.zero_grad()
    @property
    def dtype(self):
        for p in self._parameters.values():
            return p.dtype
        return np.dtype(np.float32)
    def cast(self, dtype):
        '''Converts all parameters in place (float64 for gradient checks).'''
        for p in self._parameters.values():
            p.data=p.data.astype(dtype)
            p.grad=None
        return self
    def state_dict(self):
        return OrderedDict((name, p.data.copy()) for name, p in self._parameters.items())
    def load_state_dict(self, state):
        '''Copies values in by name. Every parameter must be present with
        the right shape and no foreign names are allowed.'''
        missing=[name for name in self._parameters if name not in state]
        unexpected=[name for name in state if name not in self._parameters]
        if missing or unexpected:
            raise NetworkError('parameter names do not match: missing=%r unexpected=%r'%(missing, unexpected), missing, unexpected)
        for name, p in self._parameters.items():
            value=np.asarray(state[name])
            if value.shape!=p.shape:
                raise NetworkError('parameter %r has shape %r, expected %r'%(name, value.shape, p.shape))
            p.data=value.astype(p.dtype, copy=True)
            p.grad=None
    def forward(self, *args):
        raise NotImplementedError()
    def __call__(self, *args):
        return self.forward(*args)

#============================================================================

def load_networks_state(networks, state):
    '''Loads a combined state dictionary into several prefixed networks.
    @raise NetworkError: names missing from state or not owned by any network
    '''
    owned=OrderedDict()
    for net in networks:
        owned.update(net.named_parameters())
    missing=[name for name in owned if name not in state]
    unexpected=[name for name in state if name not in owned]
    if missing or unexpected:
        raise NetworkError('parameter names do not match: missing=%r unexpected=%r'%(missing, unexpected), missing, unexpected)
    for net in networks:
        net.load_state_dict(OrderedDict((name, state[name]) for name, _ in net.named_parameters()))

#============================================================================
