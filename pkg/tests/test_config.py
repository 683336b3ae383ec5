#!/usr/bin/python
# -*- coding: ascii -*-
'''
Test cases for configuration resolution.

'''

#============================================================================

import argparse
import json
import os
import shutil
import tempfile
from unittest import main, TestCase

from kinsynth.config import *

#============================================================================

class RunConfigTestCase(TestCase):
    def testDefaults(self):
        config=RunConfig.from_mapping({})
        self.assertEqual(config.batch_size, 32)
        self.assertEqual(config.learning_rate, 1e-4)
        self.assertEqual(config.beta1, 0.5)
        self.assertEqual(config.norm, 'l2')
        self.assertEqual((config.n, config.m), (100, 100))
        self.assertEqual(config.caae_widths, [32, 64, 128, 256])
        self.assertTrue(config.output_dir is None)
        self.assertEqual(list(config.to_dict()), list(FIELDS))
    def testConversion(self):
        config=RunConfig.from_mapping({'batch_size': '16', 'caae_widths': '8, 8,8,8', 'allow_dim_mismatch': 'yes', 'm': 50})
        self.assertEqual(config.batch_size, 16)
        self.assertEqual(config.caae_widths, [8, 8, 8, 8])
        self.assertEqual((config.n, config.m), (100, 50))
    def testUnknownField(self):
        try:
            RunConfig.from_mapping({'epochs': 3})
        except ConfigError as e:
            self.assertEqual(e.field, 'epochs')
        else:
            self.fail('ConfigError not raised')
    def testInvalidValues(self):
        for field, value in [('batch_size', 0), ('batch_size', 'many'), ('norm', 'l3'), ('beta1', 1.0),
                ('learning_rate', 0), ('image_side', 48), ('caae_widths', '8,8'), ('test_fraction', 1.5),
                ('training_seed', -1), ('config_version', 2), ('log_level', 'LOUD')]:
            try:
                RunConfig.from_mapping({field: value})
            except ConfigError as e:
                self.assertEqual(e.field, field)
                self.assertTrue("field '%s'"%field in str(e))
            else:
                self.fail('%s=%r accepted'%(field, value))
    def testDimensionRule(self):
        try:
            RunConfig.from_mapping({'n': 64})
        except ConfigError as e:
            self.assertEqual(e.field, 'm')
        else:
            self.fail('n != m accepted')
        self.assertEqual(RunConfig.from_mapping({'n': 64, 'm': 64}).n, 64)
    def testReplace(self):
        config=RunConfig.from_mapping({})
        other=config.replace(batch_size=4)
        self.assertEqual(other.batch_size, 4)
        self.assertEqual(config.batch_size, 32)
        self.assertRaises(ConfigError, config.replace, batch_size=-4)
    def testMissingAttribute(self):
        self.assertRaises(AttributeError, getattr, RunConfig.from_mapping({}), 'epochs')
    def testCanonicalJson(self):
        config=RunConfig.from_mapping({'batch_size': 8})
        text=config.to_json()
        self.assertTrue(text.endswith('}\n'))
        keys=list(json.loads(text))
        self.assertEqual(keys, sorted(keys))
        self.assertEqual(RunConfig.from_mapping(json.loads(text)), config)
        self.assertEqual(RunConfig.from_mapping(json.loads(text)).to_json(), text)

#============================================================================

class ResolutionTestCase(TestCase):
    def setUp(self):
        self.tmp=tempfile.mkdtemp(prefix='kinsynth-test-')
        self.parser=add_config_arguments(argparse.ArgumentParser())
    def tearDown(self):
        shutil.rmtree(self.tmp, ignore_errors=True)
    def document(self, content):
        path=os.path.join(self.tmp, 'config.json')
        with open(path, 'w') as f:
            f.write(content if isinstance(content, str) else json.dumps(content))
        return path
    def testFlagName(self):
        self.assertEqual(flag_name('batch_size'), '--batch-size')
    def testPrecedence(self):
        path=self.document({'batch_size': 8, 'norm': 'l1'})
        self.assertEqual(resolve_config(self.parser.parse_args([])).batch_size, 32)
        config=resolve_config(self.parser.parse_args(['--config', path]))
        self.assertEqual((config.batch_size, config.norm), (8, 'l1'))
        config=resolve_config(self.parser.parse_args(['--config', path, '--batch-size', '4']))
        self.assertEqual((config.batch_size, config.norm), (4, 'l1'))
    def testWrittenConfigResolvesToItself(self):
        config=RunConfig.from_mapping({'batch_size': 8, 'dz_widths': [16]})
        path=config.write(os.path.join(self.tmp, 'written.json'))
        self.assertEqual(RunConfig.load(path), config)
        self.assertEqual(resolve_config(self.parser.parse_args(['--config', path])), config)
    def testBadDocuments(self):
        for content in ('[1, 2]', '{not json', {'batch_size': 0}):
            path=self.document(content)
            self.assertRaises(ConfigError, resolve_config, self.parser.parse_args(['--config', path]))
        self.assertRaises(ConfigError, RunConfig.load, os.path.join(self.tmp, 'absent.json'))
    def testFieldSubset(self):
        parser=add_config_arguments(argparse.ArgumentParser(), ['batch_size'])
        self.assertEqual(resolve_config(parser.parse_args(['--batch-size', '2'])).batch_size, 2)
        self.assertRaises(SystemExit, parser.parse_args, ['--norm', 'l1'])

#============================================================================

if __name__=='__main__':
    main()
