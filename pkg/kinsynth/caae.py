#!/usr/bin/python
# -*- coding: ascii -*-
'''
Conditional adversarial autoencoder.

The encoder E maps an S x S RGB face to a feature vector h in [-1, 1]^n,
the decoder G maps h and a 20-dim age/gender label back to a face. Two
discriminators shape the training: D_z pushes encodings towards the
uniform prior on [-1, 1]^n, D_img judges (image, label) pairs.

Architecture, for image side S (a power of two, at least 32):

E     4 stride-2 convolutions (kernel 5, widths 32/64/128/256, rectifier),
      dense to n, tanh
G     dense from n+20 to 256 x S/16 x S/16, rectifier, 4 stride-2
      transposed convolutions (widths 128/64/32/3), tanh output
D_z   dense 64/32/1, leaky rectifier (slope 0.2), sigmoid
D_img label broadcast over the image plane and stacked onto the input,
      3 stride-2 convolutions (widths 32/64/128, leaky rectifier),
      dense to 1, sigmoid

Faces enter and leave as (S, S, 3) arrays with values in [-1, 1];
networks work on NCHW tensors internally.

The adversarial terms of the encoder and the generator use the
non-saturating form -log D(fake) instead of log(1 - D(fake)).
'''

#============================================================================

from collections import OrderedDict, namedtuple
import logging

import numpy as np

from kinsynth.common import KinsynthError
from kinsynth import numerics as nx
from kinsynth.network import Network, Dense, Conv2d, ConvTranspose2d, load_networks_state
from kinsynth.optim import Adam, DEFAULT_LEARNING_RATE, step_together
from kinsynth.rng import seeded_rng
from kinsynth.validation import validate, Int, OneOf, PowerOfTwo, Sequence, InstanceOf

#============================================================================

__all__=[
    'TrainingError', 'AGE_GROUP_UPPER_BOUNDS', 'AGE_GROUPS', 'GENDERS',
    'LABEL_DIM', 'ConditionLabel', 'encode_label', 'label_for_group',
    'age_group_of', 'CaaeArchitecture', 'Encoder', 'Decoder',
    'FeatureDiscriminator', 'ImageDiscriminator', 'CaaeModel',
    'check_face_image', 'encode', 'encode_batch', 'decode', 'decode_batch',
    'decode_grid', 'reconstruction_loss', 'sample_prior', 'dz_losses',
    'dimg_losses', 'CaaeLossWeights', 'CaaeOptimizers',
    'discriminator_phase', 'generator_phase', 'caae_train_step',
    'CAAE_REPORT_TERMS', 'CAAE_DETAIL_TERMS',
]

log=logging.getLogger(__name__)

#============================================================================
# Exceptions

class TrainingError(KinsynthError):
    '''Raised when a training step meets a non-finite loss or gradient.
    The parameters of the failing phase are left untouched.'''
    pass

#============================================================================
# Condition labels

# Upper bound (inclusive) of each age group in years; older ages clamp
# into the last group.
AGE_GROUP_UPPER_BOUNDS=(5, 10, 15, 20, 30, 40, 50, 60, 70, 80)
AGE_GROUPS=len(AGE_GROUP_UPPER_BOUNDS)
GENDERS=2
GENDER_TILES=5
LABEL_DIM=AGE_GROUPS+GENDERS*GENDER_TILES

class ConditionLabel(object):
    '''Age group and gender with their 20-dim encoding: the 10-dim age
    one-hot followed by the 2-dim gender one-hot tiled five times.'''
    __slots__=['age_group', 'gender', 'encoded']
    def __init__(self, age_group, gender):
        self.age_group=int(age_group)
        self.gender=int(gender)
        age=np.zeros(AGE_GROUPS, dtype=np.float32)
        age[self.age_group]=1
        sex=np.zeros(GENDERS, dtype=np.float32)
        sex[self.gender]=1
        self.encoded=np.concatenate([age, np.tile(sex, GENDER_TILES)])
    def __eq__(self, other):
        return isinstance(other, ConditionLabel) and (self.age_group, self.gender)==(other.age_group, other.gender)
    def __hash__(self):
        return hash((self.age_group, self.gender))
    def __repr__(self):
        return 'ConditionLabel(age_group=%d, gender=%d)'%(self.age_group, self.gender)

def age_group_of(age_years):
    for group, upper in enumerate(AGE_GROUP_UPPER_BOUNDS):
        if age_years<=upper:
            return group
    return AGE_GROUPS-1

@validate(age_years=Int(min=0), gender=OneOf(0, 1))
def encode_label(age_years, gender):
    '''Bins an age in years and encodes it with the gender.'''
    return ConditionLabel(age_group_of(age_years), gender)

@validate(age_group=Int(min=0, max=AGE_GROUPS-1), gender=OneOf(0, 1))
def label_for_group(age_group, gender):
    return ConditionLabel(age_group, gender)

#============================================================================
# Architecture

class CaaeArchitecture(object):
    '''Shape parameters of a CAAE; stored next to checkpoints as JSON.'''
    @validate(image_side=PowerOfTwo(min=32), n=Int(min=1),
        encoder_widths=Sequence(Int(min=1), min_length=4, max_length=4),
        dz_widths=Sequence(Int(min=1), min_length=1),
        dimg_widths=Sequence(Int(min=1), min_length=1), kernel=Int(min=1))
    def __init__(self, image_side=64, n=100, encoder_widths=(32, 64, 128, 256),
            dz_widths=(64, 32), dimg_widths=(32, 64, 128), kernel=5):
        self.image_side=image_side
        self.n=n
        self.encoder_widths=tuple(encoder_widths)
        self.dz_widths=tuple(dz_widths)
        self.dimg_widths=tuple(dimg_widths)
        self.kernel=kernel
    def to_dict(self):
        return OrderedDict([
            ('kind', 'caae'),
            ('image_side', self.image_side),
            ('n', self.n),
            ('encoder_widths', list(self.encoder_widths)),
            ('dz_widths', list(self.dz_widths)),
            ('dimg_widths', list(self.dimg_widths)),
            ('kernel', self.kernel),
        ])
    @classmethod
    def from_dict(cls, d):
        d=dict(d)
        d.pop('kind', None)
        return cls(**d)
    def __eq__(self, other):
        return isinstance(other, CaaeArchitecture) and self.to_dict()==other.to_dict()

#============================================================================
# Networks

def _to_nchw(images):
    return nx.transpose(nx.as_tensor(images), (0, 3, 1, 2))

def _to_nhwc(images):
    return nx.transpose(images, (0, 2, 3, 1))

class Encoder(Network):
    def __init__(self, arch, rng, prefix='E'):
        Network.__init__(self, prefix)
        k=arch.kernel
        channels=3
        for i, width in enumerate(arch.encoder_widths):
            self.add('conv%d'%(i+1), Conv2d(rng, channels, width, k, stride=2, padding=k//2))
            channels=width
        side=arch.image_side//2**len(arch.encoder_widths)
        self.flat=channels*side*side
        self.add('fc', Dense(rng, self.flat, arch.n))
        self.depth=len(arch.encoder_widths)
    def forward(self, images):
        '''images (N, S, S, 3) -> features (N, n) in [-1, 1].'''
        x=_to_nchw(images)
        for i in range(self.depth):
            x=nx.relu(self.layer('conv%d'%(i+1))(x))
        x=nx.reshape(x, (x.shape[0], self.flat))
        return nx.tanh(self.layer('fc')(x))

class Decoder(Network):
    def __init__(self, arch, rng, prefix='G'):
        Network.__init__(self, prefix)
        k=arch.kernel
        widths=list(reversed(arch.encoder_widths))
        self.side=arch.image_side//2**len(widths)
        self.channels=widths[0]
        self.add('fc', Dense(rng, arch.n+LABEL_DIM, self.channels*self.side*self.side))
        outs=widths[1:]+[3]
        channels=self.channels
        for i, width in enumerate(outs):
            self.add('deconv%d'%(i+1), ConvTranspose2d(rng, channels, width, k, stride=2, padding=k//2, output_padding=1))
            channels=width
        self.depth=len(outs)
    def forward(self, features, labels):
        '''features (N, n), labels (N, 20) -> images (N, S, S, 3).'''
        x=nx.concatenate([nx.as_tensor(features), nx.as_tensor(labels, nx.as_tensor(features))], axis=1)
        x=nx.relu(self.layer('fc')(x))
        x=nx.reshape(x, (x.shape[0], self.channels, self.side, self.side))
        for i in range(self.depth):
            x=self.layer('deconv%d'%(i+1))(x)
            x=nx.tanh(x) if i==self.depth-1 else nx.relu(x)
        return _to_nhwc(x)

class FeatureDiscriminator(Network):
    '''Dense discriminator on feature vectors, probability of "prior".'''
    def __init__(self, n, widths, rng, prefix='Dz'):
        Network.__init__(self, prefix)
        fan_in=n
        for i, width in enumerate(widths):
            self.add('fc%d'%(i+1), Dense(rng, fan_in, width))
            fan_in=width
        self.add('out', Dense(rng, fan_in, 1))
        self.depth=len(widths)
    def forward(self, features):
        x=nx.as_tensor(features, self._dtype_tensor())
        for i in range(self.depth):
            x=nx.leaky_relu(self.layer('fc%d'%(i+1))(x), 0.2)
        x=nx.sigmoid(self.layer('out')(x))
        return nx.reshape(x, (x.shape[0],))
    def _dtype_tensor(self):
        return self.parameters()[0]

class ImageDiscriminator(Network):
    '''Convolutional discriminator on (image, label) pairs.'''
    def __init__(self, arch, rng, prefix='Dimg'):
        Network.__init__(self, prefix)
        k=arch.kernel
        channels=3+LABEL_DIM
        for i, width in enumerate(arch.dimg_widths):
            self.add('conv%d'%(i+1), Conv2d(rng, channels, width, k, stride=2, padding=k//2))
            channels=width
        side=arch.image_side//2**len(arch.dimg_widths)
        self.flat=channels*side*side
        self.add('out', Dense(rng, self.flat, 1))
        self.depth=len(arch.dimg_widths)
    def forward(self, images, labels):
        x=_to_nchw(images)
        n, _, s, _=x.shape
        plane=nx.broadcast_to(nx.reshape(nx.as_tensor(labels, x), (n, LABEL_DIM, 1, 1)), (n, LABEL_DIM, s, s))
        x=nx.concatenate([x, plane], axis=1)
        for i in range(self.depth):
            x=nx.leaky_relu(self.layer('conv%d'%(i+1))(x), 0.2)
        x=nx.sigmoid(self.layer('out')(nx.reshape(x, (n, self.flat))))
        return nx.reshape(x, (n,))

#============================================================================

class CaaeModel(object):
    '''The four CAAE networks. Parameter sets are disjoint; names carry
    the network prefix (E., G., Dz., Dimg.).'''
    @validate(arch=InstanceOf(CaaeArchitecture), seed=Int(min=0))
    def __init__(self, arch, seed=0):
        self.arch=arch
        rng=seeded_rng(seed)
        self.encoder=Encoder(arch, rng.child('E'))
        self.decoder=Decoder(arch, rng.child('G'))
        self.dz=FeatureDiscriminator(arch.n, arch.dz_widths, rng.child('Dz'))
        self.dimg=ImageDiscriminator(arch, rng.child('Dimg'))
    def networks(self):
        return [self.encoder, self.decoder, self.dz, self.dimg]
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
        return self.encoder.dtype
    def cast(self, dtype):
        for net in self.networks():
            net.cast(dtype)
        return self

#============================================================================
# Inference

def check_face_image(pixels, side):
    '''Raises ShapeError or NumericsError unless pixels is an (S, S, 3) face
    with values in [-1, 1].'''
    pixels=np.asarray(pixels)
    if pixels.shape!=(side, side, 3):
        raise nx.ShapeError('face image has shape %r, model expects %r'%(pixels.shape, (side, side, 3)))
    if not np.all(np.isfinite(pixels)) or pixels.min()<-1 or pixels.max()>1:
        raise nx.NumericsError('face image pixels must lie in [-1, 1]')
    return pixels

def encode_batch(model, images, chunk=64):
    '''(N, S, S, 3) faces -> (N, n) features.'''
    images=np.asarray(images)
    if images.ndim!=4 or images.shape[1:]!=(model.arch.image_side, model.arch.image_side, 3):
        raise nx.ShapeError('faces have shape %r, model expects (N, %d, %d, 3)'%(images.shape, model.arch.image_side, model.arch.image_side))
    out=[]
    with nx.no_grad():
        for start in range(0, len(images), chunk):
            batch=images[start:start+chunk].astype(model.dtype)
            out.append(model.encoder(batch).data)
    if not out:
        return np.zeros((0, model.arch.n), dtype=model.dtype)
    return np.concatenate(out)

def encode(model, image):
    '''Feature vector of one face.'''
    check_face_image(image, model.arch.image_side)
    return encode_batch(model, np.asarray(image)[None])[0]

def _encoded_labels(labels):
    return np.stack([l.encoded if isinstance(l, ConditionLabel) else np.asarray(l, dtype=np.float32) for l in labels])

def decode_batch(model, features, labels, chunk=64):
    '''(N, n) features and N labels -> (N, S, S, 3) faces.'''
    features=np.asarray(features)
    encoded=_encoded_labels(labels)
    if features.ndim!=2 or features.shape[1]!=model.arch.n or len(encoded)!=len(features) or encoded.shape[1]!=LABEL_DIM:
        raise nx.ShapeError('decode: features %r and labels %r do not fit the model'%(features.shape, encoded.shape))
    out=[]
    with nx.no_grad():
        for start in range(0, len(features), chunk):
            out.append(model.decoder(features[start:start+chunk].astype(model.dtype), encoded[start:start+chunk].astype(model.dtype)).data)
    return np.concatenate(out)

def decode(model, h, label):
    '''Face for one feature vector under one condition label.'''
    h=np.asarray(h)
    if h.shape!=(model.arch.n,):
        raise nx.ShapeError('feature vector has shape %r, expected (%d,)'%(h.shape, model.arch.n))
    return decode_batch(model, h[None], [label])[0]

def decode_grid(model, h, labels):
    '''One face per label for the same feature vector.'''
    h=np.asarray(h)
    return decode_batch(model, np.repeat(h[None], len(labels), axis=0), labels)

#============================================================================
# Losses

def reconstruction_loss(x, x_hat):
    '''Mean squared pixel difference.'''
    x=nx.as_tensor(x)
    x_hat=nx.as_tensor(x_hat, x)
    if x.shape!=x_hat.shape:
        raise nx.ShapeError('reconstruction_loss: shapes %r and %r differ'%(x.shape, x_hat.shape))
    diff=nx.sub(x, x_hat)
    return nx.mean(nx.mul(diff, diff))

@validate(count=Int(min=1), n=Int(min=1))
def sample_prior(count, rng, n=100):
    '''count i.i.d. samples of the uniform prior on [-1, 1]^n.'''
    return rng.uniform(-1.0, 1.0, (count, n)).astype(np.float32)

def _real_term(probabilities):
    return nx.binary_cross_entropy(probabilities, 1.0)

def _fake_term(probabilities):
    return nx.binary_cross_entropy(probabilities, 0.0)

def dz_losses(model, h_real_batch, z_prior_batch):
    '''Feature discriminator losses.
    @return: (-mean log D_z(z*) - mean log(1 - D_z(E(x))),
              -mean log D_z(E(x)))
    '''
    h=nx.as_tensor(h_real_batch)
    z=nx.as_tensor(z_prior_batch, h)
    if h.ndim!=2 or z.ndim!=2 or h.shape[1]!=z.shape[1] or not h.shape[0] or not z.shape[0]:
        raise nx.ShapeError('dz_losses: batches %r and %r are not compatible'%(h.shape, z.shape))
    on_prior=model.dz(z)
    on_encoded=model.dz(h)
    return nx.add(_real_term(on_prior), _fake_term(on_encoded)), _real_term(on_encoded)

def dimg_losses(model, x_batch, l_batch, generated=None):
    '''Image discriminator losses on real pairs (x, l) and generated pairs
    (G(E(x), l), l). A precomputed generated batch may be passed in.
    @return: (-mean log D_img(x, l) - mean log(1 - D_img(G(E(x), l), l)),
              -mean log D_img(G(E(x), l), l))
    '''
    x=nx.as_tensor(x_batch)
    l=nx.as_tensor(_encoded_labels(l_batch) if not isinstance(l_batch, (np.ndarray, nx.Tensor)) else l_batch, x)
    if x.ndim!=4 or l.ndim!=2 or x.shape[0]!=l.shape[0] or not x.shape[0]:
        raise nx.ShapeError('dimg_losses: images %r and labels %r are not aligned'%(x.shape, l.shape))
    if generated is None:
        generated=model.decoder(model.encoder(x), l)
    on_real=model.dimg(x, l)
    on_generated=model.dimg(generated, l)
    return nx.add(_real_term(on_real), _fake_term(on_generated)), _real_term(on_generated)

#============================================================================
# Training

CaaeLossWeights=namedtuple('CaaeLossWeights', ['reconstruction', 'dz', 'dimg'])
CaaeLossWeights.__new__.__defaults__=(1.0, 1.0, 1.0)

# The five summed terms of the combined objective, in report order.
CAAE_REPORT_TERMS=('reconstruction', 'dz_prior', 'dz_encoded', 'dimg_real', 'dimg_generated')
CAAE_DETAIL_TERMS=('encoder_adversarial', 'generator_adversarial')

class CaaeOptimizers(object):
    '''One Adam per CAAE network.'''
    def __init__(self, model, learning_rate=DEFAULT_LEARNING_RATE, beta1=0.5, beta2=0.999):
        self.encoder=Adam(model.encoder.parameters(), learning_rate, beta1, beta2)
        self.decoder=Adam(model.decoder.parameters(), learning_rate, beta1, beta2)
        self.dz=Adam(model.dz.parameters(), learning_rate, beta1, beta2)
        self.dimg=Adam(model.dimg.parameters(), learning_rate, beta1, beta2)

def _batch_tensors(model, batch):
    images, labels=batch
    images=np.asarray(images, dtype=model.dtype)
    labels=_encoded_labels(labels) if not isinstance(labels, np.ndarray) else labels
    if images.ndim!=4 or len(images)!=len(labels) or not len(images):
        raise nx.ShapeError('training batch of %r images and %r labels'%(images.shape, np.shape(labels)))
    return nx.Tensor(images), nx.Tensor(np.asarray(labels, dtype=model.dtype))

def discriminator_phase(model, batch, optimizers, rng):
    '''One ascent step of D_z and D_img on detached encodings and
    reconstructions. Only discriminator parameters change.
    @return: the four adversarial expectation terms
    '''
    x, l=_batch_tensors(model, batch)
    with nx.no_grad():
        h=model.encoder(x)
        generated=model.decoder(h, l)
    z=nx.Tensor(sample_prior(x.shape[0], rng, model.arch.n).astype(model.dtype))
    try:
        prior_term=_real_term(model.dz(z))
        encoded_term=_fake_term(model.dz(h))
        real_term=_real_term(model.dimg(x, l))
        generated_term=_fake_term(model.dimg(generated, l))
        loss=nx.add(nx.add(prior_term, encoded_term), nx.add(real_term, generated_term))
        model.dz.zero_grad()
        model.dimg.zero_grad()
        nx.backward(loss)
        step_together(optimizers.dz, optimizers.dimg)
    except nx.NonFiniteError as e:
        raise TrainingError('discriminator step aborted: %s'%e)
    finally:
        model.zero_grad()
    return OrderedDict([
        ('dz_prior', prior_term.item()),
        ('dz_encoded', encoded_term.item()),
        ('dimg_real', real_term.item()),
        ('dimg_generated', generated_term.item()),
    ])

def generator_phase(model, batch, weights, optimizers):
    '''One descent step of E and G on the weighted reconstruction and
    non-saturating adversarial terms. Only E and G parameters change.
    @return: reconstruction, encoder and generator adversarial terms
    '''
    x, l=_batch_tensors(model, batch)
    try:
        h=model.encoder(x)
        x_hat=model.decoder(h, l)
        rec=reconstruction_loss(x, x_hat)
        encoder_adv=_real_term(model.dz(h))
        generator_adv=_real_term(model.dimg(x_hat, l))
        loss=nx.add(nx.add(nx.mul(rec, weights.reconstruction), nx.mul(encoder_adv, weights.dz)), nx.mul(generator_adv, weights.dimg))
        model.zero_grad()
        nx.backward(loss)
        step_together(optimizers.encoder, optimizers.decoder)
    except nx.NonFiniteError as e:
        raise TrainingError('encoder/generator step aborted: %s'%e)
    finally:
        model.zero_grad()
    return OrderedDict([
        ('reconstruction', rec.item()),
        ('encoder_adversarial', encoder_adv.item()),
        ('generator_adversarial', generator_adv.item()),
    ])

@validate(discriminator_steps=Int(min=1))
def caae_train_step(model, batch, weights, optimizers, rng, discriminator_steps=1, details=False):
    '''One alternating update: the discriminators step first, then E and G.
    @param batch: (images (N, S, S, 3), labels) with labels ConditionLabels
        or an (N, 20) array of encoded labels
    @param details: also report the CAAE_DETAIL_TERMS
    @return: OrderedDict of the five objective terms (CAAE_REPORT_TERMS)
    '''
    for _ in range(discriminator_steps):
        adversarial=discriminator_phase(model, batch, optimizers, rng)
    generated=generator_phase(model, batch, weights, optimizers)
    log.debug('caae step: %s', ', '.join('%s=%.5f'%kv for kv in list(adversarial.items())+list(generated.items())))
    report=OrderedDict()
    report['reconstruction']=generated['reconstruction']
    report.update(adversarial)
    if details:
        for term in CAAE_DETAIL_TERMS:
            report[term]=generated[term]
    return report

#============================================================================
