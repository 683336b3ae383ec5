#!/usr/bin/python
# -*- coding: ascii -*-
'''
Differentiable tensor computation.

A Tensor wraps a numpy array. Operations on tensors that require
gradients record their inputs and a backward closure; backward() walks the
recorded graph in reverse topological order and accumulates gradients into
the leaf tensors (network parameters or inputs created with
requires_grad=True). Gradients accumulate until zero_grad() is called.

Training runs in 32-bit floats. Gradient checks run in 64-bit floats:
operations keep the dtype of their tensor inputs, so a network cast to
float64 computes in float64 throughout.

Every operation output is checked for NaN and infinity, an op producing
one raises NonFiniteError.

Images inside networks are NCHW arrays; convolutions use im2col with
numpy's sliding window views and a single matrix product.

Example:

x=Tensor(np.array(3.0), requires_grad=True)
loss=mul(x, x)
backward(loss)
x.grad  # -> 6.0
'''

#============================================================================

import threading
from contextlib import contextmanager

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from kinsynth.common import KinsynthError

#============================================================================
# Exported symbols

__all__=[
    'NumericsError', 'ShapeError', 'NonFiniteError', 'GraphError',
    'Tensor', 'as_tensor', 'no_grad', 'is_grad_enabled', 'backward',
    'add', 'sub', 'mul', 'neg', 'matmul', 'dense', 'conv2d',
    'conv_transpose2d', 'leaky_relu', 'relu', 'tanh', 'sigmoid', 'maximum',
    'where', 'mean', 'sum', 'l2_norm', 'absolute', 'binary_cross_entropy',
    'reshape', 'transpose', 'concatenate', 'broadcast_to',
    'OPS', 'forward_op', 'check_gradients', 'BCE_EPSILON',
]

#============================================================================
# Exceptions

class NumericsError(KinsynthError, ValueError):
    pass

class ShapeError(NumericsError):
    '''Raised when operand shapes are incompatible for an operation.'''
    pass

class NonFiniteError(NumericsError):
    '''Raised when an operation produces NaN or infinity.'''
    pass

class GraphError(NumericsError):
    '''Raised when backward() is called on something it cannot walk.'''
    pass

#============================================================================
# Gradient recording switch, per thread

_state=threading.local()

def is_grad_enabled():
    return getattr(_state, 'enabled', True)

@contextmanager
def no_grad():
    '''Disables graph recording in the current thread.'''
    previous=is_grad_enabled()
    _state.enabled=False
    try:
        yield
    finally:
        _state.enabled=previous

#============================================================================

class Tensor(object):
    '''Dense real array with optional gradient tracking.'''
    __slots__=['data', 'grad', 'requires_grad', 'op', '_parents', '_backward']
    def __init__(self, data, requires_grad=False, dtype=None):
        if isinstance(data, Tensor):
            data=data.data
        if dtype is None:
            if isinstance(data, np.ndarray) and data.dtype in (np.float32, np.float64):
                dtype=data.dtype
            elif isinstance(data, np.floating):
                dtype=data.dtype
            else:
                dtype=np.float32
        self.data=np.asarray(data, dtype=dtype)
        self.grad=None
        self.requires_grad=bool(requires_grad)
        self.op=None
        self._parents=()
        self._backward=None
    @property
    def shape(self):
        return self.data.shape
    @property
    def ndim(self):
        return self.data.ndim
    @property
    def size(self):
        return self.data.size
    @property
    def dtype(self):
        return self.data.dtype
    def item(self):
        return float(self.data)
    def numpy(self):
        return self.data
    def detach(self):
        '''Returns a graph-free tensor sharing the data.'''
        return Tensor(self.data)
    def zero_grad(self):
        self.grad=None
    def __repr__(self):
        return 'Tensor(shape=%r, dtype=%s, requires_grad=%r)'%(self.shape, self.dtype, self.requires_grad)
    # Operator sugar
    def __add__(self, other):
        return add(self, other)
    def __radd__(self, other):
        return add(other, self)
    def __sub__(self, other):
        return sub(self, other)
    def __rsub__(self, other):
        return sub(other, self)
    def __mul__(self, other):
        return mul(self, other)
    def __rmul__(self, other):
        return mul(other, self)
    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise NumericsError('division is only defined by constants')
        return mul(self, 1.0/other)
    def __neg__(self):
        return neg(self)
    def __matmul__(self, other):
        return matmul(self, other)
    def reshape(self, *shape):
        if len(shape)==1 and isinstance(shape[0], (tuple, list)):
            shape=tuple(shape[0])
        return reshape(self, shape)
    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)
    def sum(self, axis=None, keepdims=False):
        return sum(self, axis=axis, keepdims=keepdims)

#----------------------------------------------------------------------------

def as_tensor(value, like=None):
    '''Wraps constants; tensors pass through. Constants take the dtype of
    the tensor they are combined with.'''
    if isinstance(value, Tensor):
        return value
    dtype=like.dtype if like is not None else None
    if dtype is None and not isinstance(value, np.ndarray):
        dtype=np.float32
    return Tensor(np.asarray(value, dtype=dtype) if dtype is not None else value)

def _result(data, parents, backward_fn, op):
    '''Builds an op output, recording the graph when needed.'''
    if not np.all(np.isfinite(data)):
        raise NonFiniteError('operation %r produced a non-finite value'%op)
    out=Tensor(data)
    out.op=op
    if is_grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad=True
        out._parents=tuple(parents)
        out._backward=backward_fn
    return out

def _unbroadcast(grad, shape):
    '''Sums a broadcast gradient back to the operand shape.'''
    while grad.ndim>len(shape):
        grad=grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size==1 and grad.shape[axis]!=1:
            grad=grad.sum(axis=axis, keepdims=True)
    return grad

def _broadcast_shape(op, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError('%s: shapes %r and %r do not broadcast'%(op, a.shape, b.shape))

def _pair(a, b):
    if isinstance(a, Tensor):
        return a, as_tensor(b, a)
    b=as_tensor(b)
    return as_tensor(a, b), b

#============================================================================
# Elementwise arithmetic

def add(a, b):
    a, b=_pair(a, b)
    _broadcast_shape('add', a, b)
    def backward_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)
    return _result(a.data+b.data, (a, b), backward_fn, 'add')

def sub(a, b):
    a, b=_pair(a, b)
    _broadcast_shape('sub', a, b)
    def backward_fn(g):
        return _unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)
    return _result(a.data-b.data, (a, b), backward_fn, 'sub')

def mul(a, b):
    a, b=_pair(a, b)
    _broadcast_shape('mul', a, b)
    def backward_fn(g):
        return _unbroadcast(g*b.data, a.shape), _unbroadcast(g*a.data, b.shape)
    return _result(a.data*b.data, (a, b), backward_fn, 'mul')

def neg(a):
    a=as_tensor(a)
    return _result(-a.data, (a,), lambda g: (-g,), 'neg')

def maximum(a, b):
    '''Elementwise maximum. Ties send the gradient to the first operand.'''
    a, b=_pair(a, b)
    _broadcast_shape('maximum', a, b)
    first=a.data>=b.data
    def backward_fn(g):
        return _unbroadcast(np.where(first, g, 0), a.shape), _unbroadcast(np.where(first, 0, g), b.shape)
    return _result(np.maximum(a.data, b.data), (a, b), backward_fn, 'maximum')

def where(condition, a, b):
    '''Picks a where condition holds, b elsewhere.'''
    a, b=_pair(a, b)
    condition=np.asarray(condition, dtype=bool)
    try:
        np.broadcast_shapes(condition.shape, a.shape, b.shape)
    except ValueError:
        raise ShapeError('where: shapes %r, %r and %r do not broadcast'%(condition.shape, a.shape, b.shape))
    def backward_fn(g):
        return _unbroadcast(np.where(condition, g, 0), a.shape), _unbroadcast(np.where(condition, 0, g), b.shape)
    return _result(np.where(condition, a.data, b.data), (a, b), backward_fn, 'where')

def absolute(a):
    a=as_tensor(a)
    return _result(np.abs(a.data), (a,), lambda g: (g*np.sign(a.data),), 'absolute')

#============================================================================
# Activations

def leaky_relu(a, slope=0.2):
    a=as_tensor(a)
    positive=a.data>0
    def backward_fn(g):
        return (np.where(positive, g, g*slope),)
    return _result(np.where(positive, a.data, a.data*slope).astype(a.dtype, copy=False), (a,), backward_fn, 'leaky_relu')

def relu(a):
    a=as_tensor(a)
    positive=a.data>0
    return _result(np.where(positive, a.data, 0).astype(a.dtype, copy=False), (a,), lambda g: (np.where(positive, g, 0),), 'relu')

def tanh(a):
    a=as_tensor(a)
    out=np.tanh(a.data)
    return _result(out, (a,), lambda g: (g*(1-out*out),), 'tanh')

def sigmoid(a):
    a=as_tensor(a)
    e=np.exp(-np.abs(a.data))
    out=np.where(a.data>=0, 1/(1+e), e/(1+e)).astype(a.dtype, copy=False)
    return _result(out, (a,), lambda g: (g*out*(1-out),), 'sigmoid')

#============================================================================
# Reductions and losses

def _axes(ndim, axis):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis=(axis,)
    return tuple(x%ndim for x in axis)

def sum(a, axis=None, keepdims=False):
    a=as_tensor(a)
    axes=_axes(a.ndim, axis)
    def backward_fn(g):
        if not keepdims:
            g=np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.shape).astype(a.dtype),)
    return _result(np.asarray(a.data.sum(axis=axes, keepdims=keepdims), dtype=a.dtype), (a,), backward_fn, 'sum')

def mean(a, axis=None, keepdims=False):
    a=as_tensor(a)
    axes=_axes(a.ndim, axis)
    count=1
    for x in axes:
        count*=a.shape[x]
    if count==0:
        raise ShapeError('mean of an empty tensor')
    def backward_fn(g):
        if not keepdims:
            g=np.expand_dims(g, axes)
        return (np.broadcast_to(g/count, a.shape).astype(a.dtype),)
    return _result(np.asarray(a.data.mean(axis=axes, keepdims=keepdims), dtype=a.dtype), (a,), backward_fn, 'mean')

def l2_norm(a, axis=None, keepdims=False):
    '''Euclidean norm. The gradient at the zero vector is taken as zero.'''
    a=as_tensor(a)
    axes=_axes(a.ndim, axis)
    norm=np.sqrt((a.data*a.data).sum(axis=axes, keepdims=True))
    def backward_fn(g):
        if not keepdims:
            g=np.expand_dims(g, axes)
        safe=np.where(norm>0, norm, 1)
        return ((g*np.where(norm>0, a.data/safe, 0)).astype(a.dtype),)
    out=norm if keepdims else np.squeeze(norm, axis=axes)
    return _result(np.asarray(out, dtype=a.dtype), (a,), backward_fn, 'l2_norm')

BCE_EPSILON=1e-7

def binary_cross_entropy(p, target, eps=BCE_EPSILON):
    '''Mean binary cross-entropy of probabilities p against constant
    targets. Probabilities are clamped to [eps, 1-eps]; the clamped region
    passes no gradient.'''
    p=as_tensor(p)
    target=np.broadcast_to(np.asarray(target.data if isinstance(target, Tensor) else target, dtype=p.dtype), p.shape)
    clamped=np.clip(p.data, eps, 1-eps)
    inside=(p.data>=eps)&(p.data<=1-eps)
    losses=-(target*np.log(clamped)+(1-target)*np.log(1-clamped))
    def backward_fn(g):
        local=(-target/clamped+(1-target)/(1-clamped))/p.size
        return ((g*np.where(inside, local, 0)).astype(p.dtype),)
    return _result(np.asarray(losses.mean(), dtype=p.dtype), (p,), backward_fn, 'binary_cross_entropy')

#============================================================================
# Linear algebra

def matmul(a, b):
    a, b=_pair(a, b)
    if a.ndim!=2 or b.ndim!=2 or a.shape[1]!=b.shape[0]:
        raise ShapeError('matmul: shapes %r and %r are not aligned'%(a.shape, b.shape))
    def backward_fn(g):
        return g@b.data.T, a.data.T@g
    return _result(a.data@b.data, (a, b), backward_fn, 'matmul')

def dense(x, weight, bias=None):
    '''x (N, in) times weight (in, out) plus bias (out,).'''
    out=matmul(x, weight)
    if bias is not None:
        out=add(out, bias)
    return out

#----------------------------------------------------------------------------
# Convolutions, NCHW, square kernels

def _conv_out(size, kernel, stride, padding):
    return (size+2*padding-kernel)//stride+1

def conv2d(x, weight, bias=None, stride=1, padding=0):
    '''x (N, C, H, W), weight (F, C, k, k), bias (F,).'''
    x=as_tensor(x)
    weight=as_tensor(weight, x)
    if x.ndim!=4 or weight.ndim!=4 or x.shape[1]!=weight.shape[1] or weight.shape[2]!=weight.shape[3]:
        raise ShapeError('conv2d: input %r and kernel %r are incompatible'%(x.shape, weight.shape))
    n, c, h, w=x.shape
    f, _, k, _=weight.shape
    ho, wo=_conv_out(h, k, stride, padding), _conv_out(w, k, stride, padding)
    if ho<=0 or wo<=0:
        raise ShapeError('conv2d: kernel %d does not fit input %r'%(k, x.shape))
    xp=np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    windows=sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :ho, :wo]
    cols=windows.transpose(0, 2, 3, 1, 4, 5).reshape(n*ho*wo, c*k*k)
    wmat=weight.data.reshape(f, c*k*k)
    out=(cols@wmat.T).reshape(n, ho, wo, f).transpose(0, 3, 1, 2)
    def backward_fn(g):
        gm=g.transpose(0, 2, 3, 1).reshape(n*ho*wo, f)
        dw=(gm.T@cols).reshape(weight.shape)
        dcols=(gm@wmat).reshape(n, ho, wo, c, k, k)
        dxp=np.zeros(xp.shape, dtype=x.dtype)
        for i in range(k):
            for j in range(k):
                dxp[:, :, i:i+stride*ho:stride, j:j+stride*wo:stride]+=dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        return dxp[:, :, padding:padding+h, padding:padding+w], dw
    out=_result(np.ascontiguousarray(out), (x, weight), backward_fn, 'conv2d')
    if bias is not None:
        out=add(out, reshape(bias, (1, f, 1, 1)))
    return out

def conv_transpose2d(x, weight, bias=None, stride=1, padding=0, output_padding=0):
    '''Adjoint of conv2d. x (N, Ci, H, W), weight (Ci, Co, k, k); the
    output side is (H-1)*stride-2*padding+k+output_padding.'''
    x=as_tensor(x)
    weight=as_tensor(weight, x)
    if x.ndim!=4 or weight.ndim!=4 or x.shape[1]!=weight.shape[0] or weight.shape[2]!=weight.shape[3]:
        raise ShapeError('conv_transpose2d: input %r and kernel %r are incompatible'%(x.shape, weight.shape))
    if output_padding>=stride and output_padding>0:
        raise ShapeError('conv_transpose2d: output_padding must be smaller than stride')
    n, ci, h, w=x.shape
    _, co, k, _=weight.shape
    hf, wf=(h-1)*stride+k+output_padding, (w-1)*stride+k+output_padding
    ho, wo=hf-2*padding, wf-2*padding
    if ho<=0 or wo<=0:
        raise ShapeError('conv_transpose2d: padding %d too large for input %r'%(padding, x.shape))
    xm=x.data.transpose(0, 2, 3, 1).reshape(n*h*w, ci)
    wmat=weight.data.reshape(ci, co*k*k)
    cols=(xm@wmat).reshape(n, h, w, co, k, k)
    full=np.zeros((n, co, hf, wf), dtype=x.dtype)
    for i in range(k):
        for j in range(k):
            full[:, :, i:i+stride*h:stride, j:j+stride*w:stride]+=cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    out=full[:, :, padding:padding+ho, padding:padding+wo]
    def backward_fn(g):
        gfull=np.zeros((n, co, hf, wf), dtype=g.dtype)
        gfull[:, :, padding:padding+ho, padding:padding+wo]=g
        windows=sliding_window_view(gfull, (k, k), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :h, :w]
        dcols=windows.transpose(0, 2, 3, 1, 4, 5).reshape(n*h*w, co*k*k)
        dx=(dcols@wmat.T).reshape(n, h, w, ci).transpose(0, 3, 1, 2)
        dw=(xm.T@dcols).reshape(weight.shape)
        return dx, dw
    out=_result(np.ascontiguousarray(out), (x, weight), backward_fn, 'conv_transpose2d')
    if bias is not None:
        out=add(out, reshape(bias, (1, co, 1, 1)))
    return out

#============================================================================
# Shape manipulation

def reshape(a, shape):
    a=as_tensor(a)
    try:
        out=a.data.reshape(shape)
    except ValueError:
        raise ShapeError('reshape: cannot reshape %r into %r'%(a.shape, tuple(shape)))
    return _result(out, (a,), lambda g: (g.reshape(a.shape),), 'reshape')

def transpose(a, axes):
    a=as_tensor(a)
    if sorted(axes)!=list(range(a.ndim)):
        raise ShapeError('transpose: %r is not a permutation of %d axes'%(axes, a.ndim))
    inverse=np.argsort(axes)
    return _result(np.ascontiguousarray(a.data.transpose(axes)), (a,), lambda g: (g.transpose(inverse),), 'transpose')

def broadcast_to(a, shape):
    a=as_tensor(a)
    try:
        out=np.broadcast_to(a.data, shape)
    except ValueError:
        raise ShapeError('broadcast_to: cannot broadcast %r to %r'%(a.shape, tuple(shape)))
    return _result(np.ascontiguousarray(out), (a,), lambda g: (_unbroadcast(g, a.shape),), 'broadcast_to')

def concatenate(tensors, axis=0):
    tensors=[as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError('concatenate: nothing to concatenate')
    try:
        out=np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError('concatenate: shapes %r do not match'%([t.shape for t in tensors],))
    bounds=np.cumsum([t.shape[axis] for t in tensors])[:-1]
    def backward_fn(g):
        return tuple(np.split(g, bounds, axis=axis))
    return _result(out, tensors, backward_fn, 'concatenate')

#============================================================================
# Reverse-mode differentiation

def _topological_order(root):
    '''Tensors reachable from root that require gradients, inputs first.'''
    order=[]
    visited=set()
    stack=[(root, False)]
    while stack:
        node, expanded=stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order

def backward(loss):
    '''Accumulates d(loss)/d(leaf) into the grad of every reachable leaf
    tensor that requires gradients.
    @raise ShapeError: loss is not a scalar
    @raise GraphError: loss was not produced by recorded operations
    '''
    if not isinstance(loss, Tensor):
        raise GraphError('backward() needs a Tensor, got %r'%(loss,))
    if loss.shape!=():
        raise ShapeError('backward() needs a scalar loss, got shape %r'%(loss.shape,))
    if not loss.requires_grad:
        raise GraphError('loss has no recorded graph (built under no_grad or from constants)')
    grads={id(loss): np.ones((), dtype=loss.dtype)}
    for node in reversed(_topological_order(loss)):
        g=grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            if node.grad is None:
                node.grad=np.array(g, dtype=node.dtype).reshape(node.shape)
            else:
                node.grad+=g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            pg=np.asarray(pg, dtype=parent.dtype)
            key=id(parent)
            if key in grads:
                grads[key]=grads[key]+pg
            else:
                grads[key]=pg

#============================================================================
# Operation registry

OPS={
    'matmul': matmul,
    'dense': dense,
    'conv2d': conv2d,
    'conv_transpose2d': conv_transpose2d,
    'leaky_relu': leaky_relu,
    'relu': relu,
    'tanh': tanh,
    'sigmoid': sigmoid,
    'add': add,
    'sub': sub,
    'mul': mul,
    'neg': neg,
    'maximum': maximum,
    'where': lambda a, b, condition: where(condition, a, b),
    'mean': mean,
    'sum': sum,
    'l2_norm': l2_norm,
    'absolute': absolute,
    'binary_cross_entropy': binary_cross_entropy,
    'reshape': reshape,
    'transpose': transpose,
    'broadcast_to': broadcast_to,
    'concatenate': lambda *tensors, **kw: concatenate(tensors, **kw),
}

def forward_op(op_kind, inputs, **attributes):
    '''Applies a registered operation by name.
    @param inputs: sequence of tensors
    @param attributes: keyword attributes of the operation (stride=2, ...)
    '''
    try:
        fn=OPS[op_kind]
    except KeyError:
        raise NumericsError('unknown operation %r'%(op_kind,))
    return fn(*inputs, **attributes)

#============================================================================
# Finite-difference verification

def check_gradients(loss_fn, tensors, step=1e-5, floor=1e-6):
    '''Compares reverse-mode gradients with central finite differences.
    @param loss_fn: callable without arguments returning a scalar Tensor
    @param tensors: leaf tensors (float64, requires_grad) loss_fn reads
    @return: maximum relative error |a-n| / max(|a|+|n|, floor)
    '''
    for t in tensors:
        if t.dtype!=np.float64:
            raise NumericsError('gradient checks need float64 tensors')
        t.zero_grad()
    backward(loss_fn())
    worst=0.0
    for t in tensors:
        analytic=np.zeros(t.shape) if t.grad is None else t.grad.copy()
        numeric=np.zeros(t.shape)
        with no_grad():
            for idx in np.ndindex(*t.shape):
                original=t.data[idx]
                t.data[idx]=original+step
                plus=loss_fn().item()
                t.data[idx]=original-step
                minus=loss_fn().item()
                t.data[idx]=original
                numeric[idx]=(plus-minus)/(2*step)
        error=np.abs(analytic-numeric)/np.maximum(np.abs(analytic)+np.abs(numeric), floor)
        if error.size:
            worst=max(worst, float(error.max()))
    return worst

#============================================================================
