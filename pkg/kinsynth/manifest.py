#!/usr/bin/python
# -*- coding: ascii -*-
'''
Run manifests.

Every command writes manifest.json into its output directory: the
resolved configuration, git-style hashes of the files it consumed and
produced, a per-epoch loss table and wall-clock times. Together with
config.json it is enough to re-run the command.

A git blob hash is the SHA-1 of "blob <size>\\0" followed by the content,
the same value "git hash-object" prints.
'''

#============================================================================

from collections import OrderedDict
from datetime import datetime, timezone
import hashlib
import json
import os
import time

from kinsynth.version import __version__

#============================================================================

__all__=['git_blob_hash', 'tree_hash', 'RunManifest', 'MANIFEST_NAME']

MANIFEST_NAME='manifest.json'

#============================================================================

def git_blob_hash(path=None, data=None):
    '''Hash of a file (path) or of a bytes object (data).'''
    if data is None:
        with open(path, 'rb') as f:
            data=f.read()
    h=hashlib.sha1(b'blob %d\0'%len(data))
    h.update(data)
    return h.hexdigest()

def tree_hash(directory):
    '''Hash over the sorted relative names and blob hashes of all files
    below directory.'''
    lines=[]
    for root, dirs, files in os.walk(directory):
        dirs.sort()
        for name in sorted(files):
            path=os.path.join(root, name)
            rel=os.path.relpath(path, directory).replace(os.sep, '/')
            lines.append('%s %s\n'%(git_blob_hash(path), rel))
    return git_blob_hash(data=''.join(lines).encode('utf-8'))

def _now():
    return datetime.now(timezone.utc).isoformat(timespec='seconds')

#============================================================================

class RunManifest(object):
    def __init__(self, command, config, output_dir):
        self.command=command
        self.config=config
        self.output_dir=output_dir
        self.inputs=OrderedDict()
        self.artifacts=OrderedDict()
        self.loss_table=[]
        self.results=OrderedDict()
        self.started_at=_now()
        self.finished_at=None
        self._clock=time.monotonic()
        self.elapsed_seconds=None
    def add_input(self, label, path):
        '''Records the hash of a consumed file or directory.'''
        self.inputs[label]=OrderedDict([
            ('path', path),
            ('hash', tree_hash(path) if os.path.isdir(path) else git_blob_hash(path)),
        ])
    def add_artifact(self, path):
        '''Records a produced file, keyed by its path below output_dir.'''
        rel=os.path.relpath(path, self.output_dir).replace(os.sep, '/')
        self.artifacts[rel]=git_blob_hash(path)
        return path
    def record_losses(self, epoch, report):
        row=OrderedDict([('epoch', epoch)])
        row.update(report)
        self.loss_table.append(row)
    def finish(self):
        self.finished_at=_now()
        self.elapsed_seconds=round(time.monotonic()-self._clock, 3)
    def to_dict(self):
        return OrderedDict([
            ('command', self.command),
            ('version', '.'.join(str(v) for v in __version__)),
            ('config', self.config.to_dict()),
            ('inputs', self.inputs),
            ('artifacts', self.artifacts),
            ('loss_table', self.loss_table),
            ('results', self.results),
            ('started_at', self.started_at),
            ('finished_at', self.finished_at),
            ('elapsed_seconds', self.elapsed_seconds),
        ])
    def write(self):
        if self.finished_at is None:
            self.finish()
        path=os.path.join(self.output_dir, MANIFEST_NAME)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write('\n')
        return path

#============================================================================
