#!/usr/bin/python
# -*- coding: ascii -*-
'''
Bit-exact checkpoint files.

Layout, all integers little-endian:

    magic       4 bytes  "KSNC"
    version     uint32   FORMAT_VERSION
    count       uint32   number of entries
    entries     count times:
        name length  uint16, then the UTF-8 name
        dtype code   uint8   0 = float32, 1 = float64
        rank         uint8
        dims         rank times uint64
        values       raw little-endian, row-major
    crc         uint32   CRC-32 of every preceding byte

Writing goes to a temporary file which replaces the target under an
exclusive lock, so readers never see half a checkpoint. Each checkpoint
may have an architecture sidecar (<path>.arch.json) from which the model
is rebuilt before the values are loaded.
'''

#============================================================================

from collections import OrderedDict
import fcntl
import json
import logging
import os
import struct
import zlib

import numpy as np

from kinsynth.common import KinsynthError

#============================================================================

__all__=[
    'CheckpointError', 'CorruptCheckpointError', 'CheckpointVersionError',
    'CheckpointMismatchError', 'MAGIC', 'FORMAT_VERSION', 'encode_checkpoint',
    'decode_checkpoint', 'save_checkpoint', 'load_checkpoint',
    'restore_model', 'architecture_path', 'write_architecture',
    'read_architecture',
]

log=logging.getLogger(__name__)

MAGIC=b'KSNC'
FORMAT_VERSION=1

_DTYPES={0: np.dtype('<f4'), 1: np.dtype('<f8')}
_CODES={np.dtype(np.float32): 0, np.dtype(np.float64): 1}

#============================================================================
# Exceptions

class CheckpointError(KinsynthError):
    pass

class CorruptCheckpointError(CheckpointError):
    '''Truncated file, bad magic, bad checksum or inconsistent lengths.'''
    pass

class CheckpointVersionError(CheckpointError):
    pass

class CheckpointMismatchError(CheckpointError, ValueError):
    '''The checkpoint does not fit the model it is loaded into.'''
    def __init__(self, message, missing=(), unexpected=()):
        CheckpointError.__init__(self, message)
        self.missing=list(missing)
        self.unexpected=list(unexpected)

#============================================================================
# Encoding

def encode_checkpoint(entries):
    '''Serializes an ordered name -> array mapping.'''
    chunks=[MAGIC, struct.pack('<II', FORMAT_VERSION, len(entries))]
    seen=set()
    for name, value in entries.items():
        if name in seen:
            raise CheckpointError('duplicate entry %r'%name)
        seen.add(name)
        value=np.asarray(value)
        if value.dtype not in _CODES:
            raise CheckpointError('entry %r has unsupported dtype %s'%(name, value.dtype))
        raw_name=name.encode('utf-8')
        if len(raw_name)>0xffff or value.ndim>0xff:
            raise CheckpointError('entry %r is too large to store'%name)
        chunks.append(struct.pack('<H', len(raw_name)))
        chunks.append(raw_name)
        chunks.append(struct.pack('<BB', _CODES[value.dtype], value.ndim))
        chunks.append(struct.pack('<%dQ'%value.ndim, *value.shape))
        chunks.append(np.ascontiguousarray(value, dtype=value.dtype.newbyteorder('<')).tobytes())
    body=b''.join(chunks)
    return body+struct.pack('<I', zlib.crc32(body)&0xffffffff)

class _Reader(object):
    def __init__(self, data):
        self.data=data
        self.offset=0
    def take(self, size):
        if self.offset+size>len(self.data):
            raise CorruptCheckpointError('checkpoint truncated at byte %d'%self.offset)
        chunk=self.data[self.offset:self.offset+size]
        self.offset+=size
        return chunk
    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

def decode_checkpoint(data):
    '''Parses checkpoint bytes into an OrderedDict of arrays.'''
    if len(data)<16 or data[:4]!=MAGIC:
        raise CorruptCheckpointError('not a checkpoint (bad magic or too short)')
    body, (crc,)=data[:-4], struct.unpack('<I', data[-4:])
    version=struct.unpack('<I', data[4:8])[0]
    if version!=FORMAT_VERSION:
        raise CheckpointVersionError('checkpoint format version %d, this build reads %d'%(version, FORMAT_VERSION))
    if zlib.crc32(body)&0xffffffff!=crc:
        raise CorruptCheckpointError('checkpoint checksum mismatch (file truncated or damaged)')
    reader=_Reader(body)
    reader.take(8)
    (count,)=reader.unpack('<I')
    entries=OrderedDict()
    for _ in range(count):
        (length,)=reader.unpack('<H')
        try:
            name=reader.take(length).decode('utf-8')
        except UnicodeDecodeError:
            raise CorruptCheckpointError('entry name is not UTF-8')
        code, rank=reader.unpack('<BB')
        if code not in _DTYPES:
            raise CorruptCheckpointError('entry %r has unknown dtype code %d'%(name, code))
        shape=reader.unpack('<%dQ'%rank)
        dtype=_DTYPES[code]
        size=int(np.prod(shape, dtype=np.uint64)) if rank else 1
        values=np.frombuffer(reader.take(size*dtype.itemsize), dtype=dtype).reshape(shape)
        if name in entries:
            raise CorruptCheckpointError('duplicate entry %r'%name)
        entries[name]=values.astype(dtype.newbyteorder('='))
    if reader.offset!=len(body):
        raise CorruptCheckpointError('%d trailing bytes after the last entry'%(len(body)-reader.offset))
    return entries

#============================================================================
# Files

def _state(parameters):
    if hasattr(parameters, 'state_dict'):
        return parameters.state_dict()
    return OrderedDict(parameters)

def save_checkpoint(parameters, path):
    '''Writes a model (anything with state_dict()) or a name -> array
    mapping to path.'''
    data=encode_checkpoint(_state(parameters))
    directory=os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    # The lock file is never removed: a waiting writer may hold its inode.
    with open(path+'.lock', 'w') as lock:
        fcntl.flock(lock, fcntl.LOCK_EX)
        try:
            tmp=path+'.tmp'
            with open(tmp, 'wb') as f:
                f.write(data)
                f.flush()
                os.fsync(f.fileno())
            os.replace(tmp, path)
        finally:
            fcntl.flock(lock, fcntl.LOCK_UN)
    log.info('saved checkpoint %s (%d bytes)', path, len(data))
    return path

def load_checkpoint(path):
    try:
        with open(path, 'rb') as f:
            data=f.read()
    except OSError as e:
        raise CheckpointError('cannot read checkpoint %s: %s'%(path, e))
    return decode_checkpoint(data)

def restore_model(model, path):
    '''Loads a checkpoint into model, checking names and shapes first.
    @raise CheckpointMismatchError: listing missing and unexpected names
    '''
    state=load_checkpoint(path)
    own=OrderedDict(model.named_parameters())
    missing=[name for name in own if name not in state]
    unexpected=[name for name in state if name not in own]
    if missing or unexpected:
        raise CheckpointMismatchError('checkpoint %s does not fit the model: missing=%r unexpected=%r'%(path, missing, unexpected), missing, unexpected)
    wrong=['%s %r != %r'%(name, state[name].shape, p.shape) for name, p in own.items() if state[name].shape!=p.shape]
    if wrong:
        raise CheckpointMismatchError('checkpoint %s has mismatching shapes: %s'%(path, ', '.join(wrong)))
    model.load_state_dict(state)
    return model

#----------------------------------------------------------------------------
# Architecture sidecar

def architecture_path(path):
    return path+'.arch.json'

def write_architecture(path, arch):
    '''Stores arch.to_dict() next to the checkpoint at path.'''
    with open(architecture_path(path), 'w', encoding='utf-8') as f:
        json.dump(arch.to_dict(), f, indent=2, sort_keys=True)
        f.write('\n')

def read_architecture(path):
    try:
        with open(architecture_path(path), encoding='utf-8') as f:
            return json.load(f)
    except (OSError, ValueError) as e:
        raise CheckpointError('cannot read architecture of %s: %s'%(path, e))

#============================================================================
