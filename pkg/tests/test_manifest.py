#!/usr/bin/python
# -*- coding: ascii -*-
'''
Test cases for content hashes and run manifests.

'''

#============================================================================

import json
import os
import shutil
import tempfile
from unittest import main, TestCase

from kinsynth.config import RunConfig
from kinsynth.manifest import *

#============================================================================

class HashTestCase(TestCase):
    def setUp(self):
        self.tmp=tempfile.mkdtemp(prefix='kinsynth-test-')
    def tearDown(self):
        shutil.rmtree(self.tmp, ignore_errors=True)
    def write(self, name, data):
        path=os.path.join(self.tmp, name)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, 'wb') as f:
            f.write(data)
        return path
    def testGitBlobHash(self):
        # Values printed by "git hash-object".
        self.assertEqual(git_blob_hash(data=b'hello\n'), 'ce013625030ba8dba906f756967f9e9ca394464a')
        self.assertEqual(git_blob_hash(data=b''), 'e69de29bb2d1d6434b8b29ae775ad8c2e48c5391')
        self.assertEqual(git_blob_hash(self.write('a.txt', b'hello\n')), 'ce013625030ba8dba906f756967f9e9ca394464a')
    def testTreeHash(self):
        self.write('b/x.bin', b'1')
        self.write('a.txt', b'2')
        first=tree_hash(self.tmp)
        self.assertEqual(tree_hash(self.tmp), first)
        self.write('b/x.bin', b'3')
        changed=tree_hash(self.tmp)
        self.assertNotEqual(changed, first)
        os.rename(os.path.join(self.tmp, 'a.txt'), os.path.join(self.tmp, 'c.txt'))
        self.assertNotEqual(tree_hash(self.tmp), changed)

#============================================================================

class RunManifestTestCase(TestCase):
    def setUp(self):
        self.tmp=tempfile.mkdtemp(prefix='kinsynth-test-')
    def tearDown(self):
        shutil.rmtree(self.tmp, ignore_errors=True)
    def testWrite(self):
        config=RunConfig.from_mapping({'output_dir': self.tmp})
        manifest=RunManifest('train-caae', config, self.tmp)
        source=os.path.join(self.tmp, 'in.txt')
        with open(source, 'wb') as f:
            f.write(b'hello\n')
        manifest.add_input('faces', self.tmp)
        manifest.add_input('note', source)
        os.makedirs(os.path.join(self.tmp, 'out'))
        artifact=os.path.join(self.tmp, 'out', 'a.txt')
        with open(artifact, 'wb') as f:
            f.write(b'')
        self.assertEqual(manifest.add_artifact(artifact), artifact)
        manifest.record_losses(0, {'eval_reconstruction': 0.5})
        manifest.record_losses(1, {'reconstruction': 0.25})
        manifest.results['epochs']=1
        path=manifest.write()
        self.assertEqual(path, os.path.join(self.tmp, MANIFEST_NAME))
        with open(path) as f:
            document=json.load(f)
        self.assertEqual(document['command'], 'train-caae')
        self.assertEqual(document['config']['output_dir'], self.tmp)
        self.assertEqual(document['inputs']['note']['hash'], 'ce013625030ba8dba906f756967f9e9ca394464a')
        self.assertEqual(document['artifacts'], {'out/a.txt': 'e69de29bb2d1d6434b8b29ae775ad8c2e48c5391'})
        self.assertEqual(document['loss_table'], [{'epoch': 0, 'eval_reconstruction': 0.5}, {'epoch': 1, 'reconstruction': 0.25}])
        self.assertEqual(document['results'], {'epochs': 1})
        self.assertTrue(document['elapsed_seconds']>=0)
        self.assertTrue(document['finished_at'])

#============================================================================

if __name__=='__main__':
    main()
