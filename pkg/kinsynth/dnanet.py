#!/usr/bin/python
# -*- coding: ascii -*-
'''
Gene mappings and parent-to-child recombination.

T_fg maps a feature vector (n) to a gene vector (m), T_gf maps genes back
to features. A child's feature vector is predicted from its parents as

    T(h_f, h_m) = T_gf(S(T_fg(h_f), T_fg(h_m)))

where the selection S keeps the larger gene of each coordinate while
training (select_max) and follows a 0-1 mask when sampling siblings
(select_mask: r_i*g_f_i + (1-r_i)*g_m_i, evaluated as a pick so every
output coordinate is exactly one of the parent coordinates).

D_h pushes predicted child features towards the uniform prior on
[-1, 1]^n, the same way D_z does for the CAAE encoder.
'''

#============================================================================

from collections import OrderedDict, namedtuple
import logging

import numpy as np

from kinsynth import numerics as nx
from kinsynth.caae import FeatureDiscriminator, TrainingError, sample_prior
from kinsynth.network import Network, Dense, load_networks_state
from kinsynth.optim import Adam, DEFAULT_LEARNING_RATE, step_together
from kinsynth.rng import seeded_rng
from kinsynth.validation import validate, Int, OneOf, Sequence, InstanceOf

#============================================================================

__all__=[
    'NORMS', 'DnaNetArchitecture', 'GeneEncoder', 'GeneDecoder',
    'DnaNetModel', 'SelectionMask', 'genes_from_feature',
    'feature_from_genes', 'select_max', 'select_mask', 'sample_mask',
    'sample_masks', 'child_feature', 'child_features_batch',
    'dnanet_reconstruction_loss', 'dh_losses', 'DnaNetLossWeights',
    'DnaNetOptimizers', 'dnanet_train_step', 'DNANET_REPORT_TERMS',
]

log=logging.getLogger(__name__)

NORMS=('l2', 'l1')

#============================================================================
# Networks

class DnaNetArchitecture(object):
    @validate(n=Int(min=1), m=Int(min=1), hidden=Sequence(Int(min=1), min_length=2, max_length=2),
        dh_widths=Sequence(Int(min=1), min_length=1))
    def __init__(self, n=100, m=100, hidden=(128, 128), dh_widths=(64, 32)):
        self.n=n
        self.m=m
        self.hidden=tuple(hidden)
        self.dh_widths=tuple(dh_widths)
    def to_dict(self):
        return OrderedDict([
            ('kind', 'dnanet'),
            ('n', self.n),
            ('m', self.m),
            ('hidden', list(self.hidden)),
            ('dh_widths', list(self.dh_widths)),
        ])
    @classmethod
    def from_dict(cls, d):
        d=dict(d)
        d.pop('kind', None)
        return cls(**d)
    def __eq__(self, other):
        return isinstance(other, DnaNetArchitecture) and self.to_dict()==other.to_dict()

class _ThreeLayer(Network):
    '''Three dense layers with rectifiers in between.'''
    def __init__(self, prefix, rng, widths, bounded):
        Network.__init__(self, prefix)
        for i in range(3):
            self.add('fc%d'%(i+1), Dense(rng, widths[i], widths[i+1]))
        self.bounded=bounded
    def forward(self, x):
        x=nx.as_tensor(x, self.parameters()[0])
        x=nx.relu(self.layer('fc1')(x))
        x=nx.relu(self.layer('fc2')(x))
        x=self.layer('fc3')(x)
        return nx.tanh(x) if self.bounded else x

class GeneEncoder(_ThreeLayer):
    '''T_fg: n -> h1 -> h2 -> m, unbounded genes.'''
    def __init__(self, arch, rng, prefix='Tfg'):
        h1, h2=arch.hidden
        _ThreeLayer.__init__(self, prefix, rng, (arch.n, h1, h2, arch.m), bounded=False)

class GeneDecoder(_ThreeLayer):
    '''T_gf: m -> h2 -> h1 -> n, tanh output.'''
    def __init__(self, arch, rng, prefix='Tgf'):
        h1, h2=arch.hidden
        _ThreeLayer.__init__(self, prefix, rng, (arch.m, h2, h1, arch.n), bounded=True)

class DnaNetModel(object):
    @validate(arch=InstanceOf(DnaNetArchitecture), seed=Int(min=0))
    def __init__(self, arch, seed=0):
        self.arch=arch
        rng=seeded_rng(seed)
        self.gene_encoder=GeneEncoder(arch, rng.child('Tfg'))
        self.gene_decoder=GeneDecoder(arch, rng.child('Tgf'))
        self.dh=FeatureDiscriminator(arch.n, arch.dh_widths, rng.child('Dh'), prefix='Dh')
    def networks(self):
        return [self.gene_encoder, self.gene_decoder, self.dh]
    def named_parameters(self):
        params=[]
        for net in self.networks():
            params.extend(net.named_parameters())
        return params
    def state_dict(self):
        return OrderedDict((name, p.data.copy()) for name, p in self.named_parameters())
    def load_state_dict(self, state):
        load_networks_state(self.networks(), state)
    def zero_grad(self):
        for net in self.networks():
            net.zero_grad()
    @property
    def dtype(self):
        return self.gene_encoder.dtype
    def cast(self, dtype):
        for net in self.networks():
            net.cast(dtype)
        return self

#============================================================================
# Selection

class SelectionMask(object):
    '''0-1 sequence choosing, per gene, the father (1) or the mother (0).'''
    __slots__=['bits']
    def __init__(self, bits):
        bits=np.asarray(bits)
        if bits.ndim!=1 or not np.all((bits==0)|(bits==1)):
            raise nx.ShapeError('selection mask must be a flat 0-1 sequence')
        self.bits=bits.astype(np.uint8)
    def __len__(self):
        return len(self.bits)
    def complement(self):
        return SelectionMask(1-self.bits)
    def __eq__(self, other):
        return isinstance(other, SelectionMask) and np.array_equal(self.bits, other.bits)
    def __hash__(self):
        return hash(self.bits.tobytes())
    def to_string(self):
        return ''.join('01'[b] for b in self.bits)
    def __repr__(self):
        return 'SelectionMask(%r)'%self.to_string()

def _check_same_shape(op, a, b):
    if np.shape(a.data if isinstance(a, nx.Tensor) else a)!=np.shape(b.data if isinstance(b, nx.Tensor) else b):
        raise nx.ShapeError('%s: gene vectors of shapes %r and %r'%(op, np.shape(getattr(a, 'data', a)), np.shape(getattr(b, 'data', b))))

def select_max(g_f, g_m):
    '''Elementwise maximum of the parents' genes. Tensors stay differentiable.'''
    _check_same_shape('select_max', g_f, g_m)
    if isinstance(g_f, nx.Tensor) or isinstance(g_m, nx.Tensor):
        return nx.maximum(g_f, g_m)
    return np.maximum(g_f, g_m)

def select_mask(g_f, g_m, r):
    '''Father's gene where r is 1, mother's where r is 0.'''
    _check_same_shape('select_mask', g_f, g_m)
    bits=r.bits if isinstance(r, SelectionMask) else SelectionMask(r).bits
    if bits.shape[0]!=np.shape(getattr(g_f, 'data', g_f))[-1]:
        raise nx.ShapeError('select_mask: mask of length %d for genes %r'%(len(bits), np.shape(getattr(g_f, 'data', g_f))))
    if isinstance(g_f, nx.Tensor) or isinstance(g_m, nx.Tensor):
        return nx.where(bits==1, g_f, g_m)
    return np.where(bits==1, g_f, g_m)

@validate(m=Int(min=1))
def sample_mask(rng, m=100):
    '''Mask of m independent fair Bernoulli bits.'''
    return SelectionMask(rng.bernoulli(0.5, m))

@validate(k=Int(min=1), m=Int(min=1))
def sample_masks(rng, k, m=100):
    '''k pairwise distinct masks, drawn in order from one stream.'''
    if m<63 and k>2**m:
        raise nx.NumericsError('cannot draw %d distinct masks of length %d'%(k, m))
    masks=[]
    seen=set()
    while len(masks)<k:
        mask=sample_mask(rng, m)
        if mask in seen:
            continue
        seen.add(mask)
        masks.append(mask)
    return masks

#============================================================================
# Inference

def _check_vector(name, v, dim):
    v=np.asarray(v)
    if v.shape!=(dim,):
        raise nx.ShapeError('%s has shape %r, expected (%d,)'%(name, v.shape, dim))
    return v

def genes_from_feature(model, h):
    h=_check_vector('feature vector', h, model.arch.n)
    with nx.no_grad():
        return model.gene_encoder(h[None].astype(model.dtype)).data[0]

def feature_from_genes(model, g):
    g=_check_vector('gene vector', g, model.arch.m)
    with nx.no_grad():
        return model.gene_decoder(g[None].astype(model.dtype)).data[0]

def _select(g_f, g_m, mode, mask):
    if mode=='max':
        return select_max(g_f, g_m)
    if mask is None:
        raise nx.NumericsError('mode "mask" needs a selection mask')
    return select_mask(g_f, g_m, mask)

@validate(mode=OneOf('max', 'mask'))
def child_feature(model, h_f, h_m, mode='max', mask=None):
    '''Predicted child feature vector T_gf(S(T_fg(h_f), T_fg(h_m))).'''
    g_f=genes_from_feature(model, h_f)
    g_m=genes_from_feature(model, h_m)
    return feature_from_genes(model, _select(g_f, g_m, mode, mask))

@validate(mode=OneOf('max', 'mask'))
def child_features_batch(model, h_fathers, h_mothers, mode='max', masks=None):
    '''Row-wise child_feature for (N, n) parent batches; masks is one
    SelectionMask per row in mask mode.'''
    h_fathers=np.asarray(h_fathers)
    h_mothers=np.asarray(h_mothers)
    if h_fathers.shape!=h_mothers.shape or h_fathers.ndim!=2 or h_fathers.shape[1]!=model.arch.n:
        raise nx.ShapeError('parent batches %r and %r do not fit the model'%(h_fathers.shape, h_mothers.shape))
    with nx.no_grad():
        g_f=model.gene_encoder(h_fathers.astype(model.dtype)).data
        g_m=model.gene_encoder(h_mothers.astype(model.dtype)).data
        if mode=='max':
            g_c=select_max(g_f, g_m)
        else:
            if masks is None or len(masks)!=len(g_f):
                raise nx.NumericsError('mode "mask" needs one selection mask per row')
            g_c=np.stack([select_mask(a, b, r) for a, b, r in zip(g_f, g_m, masks)]) if len(g_f) else g_f
        return model.gene_decoder(g_c).data

#============================================================================
# Losses

@validate(norm=OneOf(*NORMS))
def dnanet_reconstruction_loss(h_pred, h_c, norm='l2'):
    '''Norm of the prediction error; for (N, n) batches the mean of the
    row norms.'''
    h_pred=nx.as_tensor(h_pred)
    h_c=nx.as_tensor(h_c, h_pred)
    if h_pred.shape!=h_c.shape or h_pred.ndim not in (1, 2):
        raise nx.ShapeError('dnanet_reconstruction_loss: shapes %r and %r'%(h_pred.shape, h_c.shape))
    diff=nx.sub(h_pred, h_c)
    if norm=='l2':
        rows=nx.l2_norm(diff, axis=-1)
    else:
        rows=nx.sum(nx.absolute(diff), axis=-1)
    return nx.mean(rows)

def dh_losses(model, h_pred_batch, z_prior_batch):
    '''D_h losses with the conventions of caae.dz_losses.
    @return: (-mean log D_h(z*) - mean log(1 - D_h(T(h_f, h_m))),
              -mean log D_h(T(h_f, h_m)))
    '''
    h=nx.as_tensor(h_pred_batch)
    z=nx.as_tensor(z_prior_batch, h)
    if h.ndim!=2 or z.ndim!=2 or h.shape[1]!=z.shape[1] or not h.shape[0] or not z.shape[0]:
        raise nx.ShapeError('dh_losses: batches %r and %r are not compatible'%(h.shape, z.shape))
    on_prior=model.dh(z)
    on_predicted=model.dh(h)
    return (nx.add(nx.binary_cross_entropy(on_prior, 1.0), nx.binary_cross_entropy(on_predicted, 0.0)),
        nx.binary_cross_entropy(on_predicted, 1.0))

#============================================================================
# Training

DnaNetLossWeights=namedtuple('DnaNetLossWeights', ['reconstruction', 'dh'])
DnaNetLossWeights.__new__.__defaults__=(1.0, 0.1)

DNANET_REPORT_TERMS=('reconstruction', 'dh_prior', 'dh_predicted', 'adversarial')

class DnaNetOptimizers(object):
    def __init__(self, model, learning_rate=DEFAULT_LEARNING_RATE, beta1=0.5, beta2=0.999):
        self.gene_encoder=Adam(model.gene_encoder.parameters(), learning_rate, beta1, beta2)
        self.gene_decoder=Adam(model.gene_decoder.parameters(), learning_rate, beta1, beta2)
        self.dh=Adam(model.dh.parameters(), learning_rate, beta1, beta2)

def _predict(model, h_f, h_m):
    '''Differentiable max-rule prediction for (N, n) parent batches.'''
    return model.gene_decoder(nx.maximum(model.gene_encoder(h_f), model.gene_encoder(h_m)))

def _triplet_tensors(model, batch):
    h_f, h_m, h_c=[np.asarray(b, dtype=model.dtype) for b in batch]
    if not (h_f.shape==h_m.shape==h_c.shape) or h_f.ndim!=2 or not len(h_f) or h_f.shape[1]!=model.arch.n:
        raise nx.ShapeError('triplet batch shapes %r, %r, %r'%(h_f.shape, h_m.shape, h_c.shape))
    return nx.Tensor(h_f), nx.Tensor(h_m), nx.Tensor(h_c)

@validate(norm=OneOf(*NORMS), discriminator_steps=Int(min=1))
def dnanet_train_step(model, batch, weights, optimizers, rng, norm='l2', discriminator_steps=1):
    '''One alternating update: D_h ascends, then T_fg and T_gf descend on
    weighted reconstruction plus the non-saturating adversarial term.
    @param batch: (father, mother, child) feature arrays of shape (N, n),
        precomputed by a frozen encoder
    @return: OrderedDict with the DNANET_REPORT_TERMS
    '''
    h_f, h_m, h_c=_triplet_tensors(model, batch)
    n=h_f.shape[0]
    for _ in range(discriminator_steps):
        with nx.no_grad():
            predicted=_predict(model, h_f, h_m)
        z=nx.Tensor(sample_prior(n, rng, model.arch.n).astype(model.dtype))
        try:
            prior_term=nx.binary_cross_entropy(model.dh(z), 1.0)
            predicted_term=nx.binary_cross_entropy(model.dh(predicted), 0.0)
            model.dh.zero_grad()
            nx.backward(nx.add(prior_term, predicted_term))
            optimizers.dh.step()
        except nx.NonFiniteError as e:
            raise TrainingError('D_h step aborted: %s'%e)
        finally:
            model.zero_grad()
    try:
        predicted=_predict(model, h_f, h_m)
        rec=dnanet_reconstruction_loss(predicted, h_c, norm)
        adversarial=nx.binary_cross_entropy(model.dh(predicted), 1.0)
        loss=nx.add(nx.mul(rec, weights.reconstruction), nx.mul(adversarial, weights.dh))
        model.zero_grad()
        nx.backward(loss)
        step_together(optimizers.gene_encoder, optimizers.gene_decoder)
    except nx.NonFiniteError as e:
        raise TrainingError('T_fg/T_gf step aborted: %s'%e)
    finally:
        model.zero_grad()
    report=OrderedDict([
        ('reconstruction', rec.item()),
        ('dh_prior', prior_term.item()),
        ('dh_predicted', predicted_term.item()),
        ('adversarial', adversarial.item()),
    ])
    log.debug('dnanet step: %s', ', '.join('%s=%.5f'%kv for kv in report.items()))
    return report

#============================================================================
