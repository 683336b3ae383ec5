#!/usr/bin/python
# -*- coding: ascii -*-
'''
Seeded random streams.

All randomness in kinsynth flows from explicit 64-bit seeds through
numpy's PCG64 bit generator, which produces identical streams on every
platform. Independent sub-streams for different purposes are derived with
child(), so drawing more values for one purpose never shifts another.
'''

#============================================================================

import zlib

import numpy as np

from kinsynth.validation import validate, Int, Float, Str

#============================================================================

__all__=['SeededStream', 'seeded_rng', 'MAX_SEED']

MAX_SEED=2**64-1

#============================================================================

class SeededStream(object):
    '''Deterministic stream of uniform reals and Bernoulli bits.'''
    def __init__(self, seed, key=()):
        self.seed=int(seed)
        self.key=tuple(key)
        entropy=[self.seed]+[zlib.crc32(k.encode('utf8')) for k in self.key]
        self._generator=np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
    @validate(name=Str(empty=False))
    def child(self, name):
        '''Independent stream for a named purpose, the same for the same
        seed and name regardless of what this stream drew before.'''
        return SeededStream(self.seed, self.key+(name,))
    def uniform(self, low=0.0, high=1.0, size=None):
        return self._generator.uniform(low, high, size)
    @validate(p=Float(min=0, max=1))
    def bernoulli(self, p=0.5, size=None):
        '''0/1 draws as uint8.'''
        return (self._generator.random(size)<p).astype(np.uint8)
    def integers(self, low, high=None, size=None):
        return self._generator.integers(low, high, size)
    def permutation(self, n):
        return self._generator.permutation(n)
    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._generator.normal(loc, scale, size)
    def __repr__(self):
        return 'SeededStream(seed=%d, key=%r)'%(self.seed, self.key)

#============================================================================

@validate(seed=Int(min=0, max=MAX_SEED))
def seeded_rng(seed):
    '''Returns the deterministic stream for a 64-bit seed.'''
    return SeededStream(seed)

#============================================================================
