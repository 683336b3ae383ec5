#!/usr/bin/python
# -*- coding: ascii -*-
'''
Adam optimization.

adam_step() applies one bias-corrected Adam update to one parameter. The
Adam class keeps one AdamState per parameter of a network and is what the
training loops use. Moments and the update are computed in float64 and
the result is stored back in the parameter's dtype.

The default beta1 is 0.5, the usual choice for adversarial training.
'''

#============================================================================

import numpy as np

from kinsynth.validation import validate, Float, Int
from kinsynth import numerics as nx

#============================================================================

__all__=['AdamState', 'adam_step', 'Adam', 'step_together', 'DEFAULT_LEARNING_RATE']

DEFAULT_LEARNING_RATE=1e-4

#============================================================================

class AdamState(object):
    '''Moment estimates and hyperparameters for one parameter.'''
    __slots__=['first_moment', 'second_moment', 'step_count',
        'learning_rate', 'beta1', 'beta2', 'epsilon']
    @validate(
        learning_rate=Float(min=0, exclusive=True),
        beta1=Float(min=0, max=1), beta2=Float(min=0, max=1),
        epsilon=Float(min=0, exclusive=True),
    )
    def __init__(self, shape, learning_rate=DEFAULT_LEARNING_RATE, beta1=0.5, beta2=0.999, epsilon=1e-8):
        if beta1>=1 or beta2>=1:
            raise nx.NumericsError('Adam betas must be below 1: beta1=%r beta2=%r'%(beta1, beta2))
        self.first_moment=np.zeros(shape, dtype=np.float64)
        self.second_moment=np.zeros(shape, dtype=np.float64)
        self.step_count=0
        self.learning_rate=float(learning_rate)
        self.beta1=float(beta1)
        self.beta2=float(beta2)
        self.epsilon=float(epsilon)

#============================================================================

def adam_step(param, state):
    '''Updates param.data in place with its current gradient.
    @return: (param, state)
    @raise NonFiniteError: the gradient holds NaN or infinity
    '''
    grad=np.zeros(param.shape) if param.grad is None else np.asarray(param.grad, dtype=np.float64)
    if not np.all(np.isfinite(grad)):
        raise nx.NonFiniteError('non-finite gradient for %s'%getattr(param, 'name', 'tensor'))
    if state.first_moment.shape!=param.shape:
        raise nx.ShapeError('Adam state shape %r does not match parameter %r'%(state.first_moment.shape, param.shape))
    state.step_count+=1
    b1, b2=state.beta1, state.beta2
    state.first_moment*=b1
    state.first_moment+=(1-b1)*grad
    state.second_moment*=b2
    state.second_moment+=(1-b2)*grad*grad
    m_hat=state.first_moment/(1-b1**state.step_count)
    v_hat=state.second_moment/(1-b2**state.step_count)
    update=state.learning_rate*m_hat/(np.sqrt(v_hat)+state.epsilon)
    param.data=(param.data.astype(np.float64)-update).astype(param.dtype)
    return param, state

#============================================================================

class Adam(object):
    '''Adam over a fixed list of parameters.'''
    @validate(learning_rate=Float(min=0, exclusive=True), beta1=Float(min=0, max=1),
        beta2=Float(min=0, max=1), epsilon=Float(min=0, exclusive=True))
    def __init__(self, parameters, learning_rate=DEFAULT_LEARNING_RATE, beta1=0.5, beta2=0.999, epsilon=1e-8):
        self.parameters=list(parameters)
        self.states=[AdamState(p.shape, learning_rate, beta1, beta2, epsilon) for p in self.parameters]
    def check(self):
        '''@raise NonFiniteError: some gradient holds NaN or infinity'''
        for p in self.parameters:
            if p.grad is not None and not np.all(np.isfinite(p.grad)):
                raise nx.NonFiniteError('non-finite gradient for %s'%getattr(p, 'name', 'tensor'))
    def step(self):
        '''Updates every parameter, or none if any gradient is not finite.'''
        self.check()
        for p, state in zip(self.parameters, self.states):
            adam_step(p, state)
    def zero_grad(self):
        for p in self.parameters:
            p.zero_grad()
    @property
    def step_count(self):
        return self.states[0].step_count if self.states else 0

def step_together(*optimizers):
    '''Steps several optimizers as one: every gradient of every optimizer
    is checked before the first parameter moves.'''
    for optimizer in optimizers:
        optimizer.check()
    for optimizer in optimizers:
        optimizer.step()

#============================================================================
