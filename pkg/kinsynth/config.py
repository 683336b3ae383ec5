#!/usr/bin/python
# -*- coding: ascii -*-
'''
Run configuration.

A RunConfig is resolved from three sources, later ones winning:

1. the defaults of the field schema below
2. a flat JSON document given with --config
3. command line flags (--batch-size 16 sets batch_size)

Every value goes through the field's converters, then its validators. A
failure raises ConfigError naming the field. The resolved configuration
is written verbatim (canonical JSON) into every output directory.
'''

#============================================================================

from collections import OrderedDict
import argparse
import json

from kinsynth.common import KinsynthError
from kinsynth.conversion import convert_value, ConversionError, AsBool, AsInt, AsFloat, AsStr, AsPath, AsIntList
from kinsynth.validation import check_value, And, Int, Float, Str, Bool, OneOf, PowerOfTwo, Sequence, AllowNone
from kinsynth.rng import MAX_SEED

#============================================================================

__all__=[
    'ConfigError', 'CONFIG_VERSION', 'Field', 'FIELDS', 'RunConfig',
    'add_config_arguments', 'resolve_config', 'flag_name',
]

CONFIG_VERSION=1

#============================================================================
# Exceptions

class ConfigError(KinsynthError, ValueError):
    '''Invalid configuration. field names the offending field, or None
    for document level problems.'''
    def __init__(self, message, field=None):
        KinsynthError.__init__(self, message)
        self.field=field

#============================================================================
# Schema

class Field(object):
    __slots__=['converters', 'validators', 'default', 'help']
    def __init__(self, converters, validators, default, help):
        self.converters=converters
        self.validators=validators
        self.default=default
        self.help=help

_Seed=Int(min=0, max=MAX_SEED)
_Positive=Int(min=1)
_Widths=Sequence(Int(min=1), min_length=1)
_OptionalPath=(AllowNone, Str(empty=False))
_Beta=And(Float(min=0), Float(max=1, exclusive=True))

FIELDS=OrderedDict([
    ('config_version', Field(AsInt, OneOf(CONFIG_VERSION), CONFIG_VERSION, 'configuration format version')),
    # Architecture
    ('image_side', Field(AsInt, PowerOfTwo(min=32), 64, 'face side length S in pixels')),
    ('n', Field(AsInt, _Positive, 100, 'feature vector dimension')),
    ('m', Field(AsInt, _Positive, 100, 'gene vector dimension')),
    ('allow_dim_mismatch', Field(AsBool, Bool, False, 'allow n != m')),
    ('caae_widths', Field(AsIntList, Sequence(Int(min=1), min_length=4, max_length=4), [32, 64, 128, 256], 'encoder convolution widths')),
    ('dz_widths', Field(AsIntList, _Widths, [64, 32], 'D_z hidden widths')),
    ('dimg_widths', Field(AsIntList, _Widths, [32, 64, 128], 'D_img convolution widths')),
    ('dnanet_hidden', Field(AsIntList, Sequence(Int(min=1), min_length=2, max_length=2), [128, 128], 'T_fg/T_gf hidden widths')),
    ('dh_widths', Field(AsIntList, _Widths, [64, 32], 'D_h hidden widths')),
    # Optimization
    ('learning_rate', Field(AsFloat, Float(min=0, exclusive=True), 1e-4, 'Adam learning rate')),
    ('beta1', Field(AsFloat, _Beta, 0.5, 'Adam beta1')),
    ('beta2', Field(AsFloat, _Beta, 0.999, 'Adam beta2')),
    ('batch_size', Field(AsInt, _Positive, 32, 'training batch size')),
    ('caae_epochs', Field(AsInt, Int(min=0), 20, 'CAAE training epochs')),
    ('dnanet_epochs', Field(AsInt, Int(min=0), 50, 'DNA-Net training epochs')),
    ('discriminator_steps', Field(AsInt, _Positive, 1, 'discriminator steps per generator step')),
    ('weight_recon', Field(AsFloat, Float(min=0), 1.0, 'CAAE reconstruction weight')),
    ('weight_dz', Field(AsFloat, Float(min=0), 1.0, 'D_z adversarial weight')),
    ('weight_dimg', Field(AsFloat, Float(min=0), 1.0, 'D_img adversarial weight')),
    ('weight_dnanet_recon', Field(AsFloat, Float(min=0), 1.0, 'DNA-Net reconstruction weight')),
    ('weight_dh', Field(AsFloat, Float(min=0), 0.1, 'D_h adversarial weight')),
    ('norm', Field(AsStr, OneOf('l2', 'l1'), 'l2', 'DNA-Net reconstruction norm')),
    # Seeds
    ('world_seed', Field(AsInt, _Seed, 0, 'synthetic world seed')),
    ('training_seed', Field(AsInt, _Seed, 0, 'initialization and batch order seed')),
    ('sampling_seed', Field(AsInt, _Seed, 0, 'selection mask and evaluation seed')),
    # Synthetic data
    ('families', Field(AsInt, _Positive, 100, 'number of synthetic families')),
    ('true_gene_dim', Field(AsInt, _Positive, 8, 'true gene dimension of the synthetic world')),
    ('test_fraction', Field(AsFloat, Float(min=0, max=1), 0.2, 'share of families held out')),
    # Paths
    ('faces_dir', Field(AsPath, _OptionalPath, None, 'labeled face directory')),
    ('triplets_csv', Field(AsPath, _OptionalPath, None, 'family triplet CSV')),
    ('caae_checkpoint', Field(AsPath, _OptionalPath, None, 'CAAE checkpoint')),
    ('dnanet_checkpoint', Field(AsPath, _OptionalPath, None, 'DNA-Net checkpoint')),
    ('output_dir', Field(AsPath, _OptionalPath, None, 'output directory')),
    # Runtime
    ('workers', Field(AsInt, _Positive, 4, 'image loading threads')),
    ('log_level', Field(AsStr, OneOf('DEBUG', 'INFO', 'WARNING', 'ERROR'), 'INFO', 'logging level')),
])

#============================================================================

def _read_document(path):
    try:
        with open(path, encoding='utf-8') as f:
            document=json.load(f)
    except (OSError, ValueError) as e:
        raise ConfigError('cannot read config %s: %s'%(path, e))
    if not isinstance(document, dict):
        raise ConfigError('config %s is not a JSON object'%path)
    return document

class RunConfig(object):
    '''Validated configuration; fields are attributes.'''
    def __init__(self, values):
        self._values=values
    def __getattr__(self, name):
        try:
            return self.__dict__['_values'][name]
        except KeyError:
            raise AttributeError(name)
    @classmethod
    def from_mapping(cls, mapping):
        '''Converts and validates a mapping over the defaults.
        @raise ConfigError: unknown field, failed conversion or validation
        '''
        unknown=sorted(k for k in mapping if k not in FIELDS)
        if unknown:
            raise ConfigError('unknown configuration field %r'%unknown[0], unknown[0])
        values=OrderedDict()
        for name, field in FIELDS.items():
            raw=mapping.get(name, field.default)
            if raw is None:
                value=None
            else:
                try:
                    value=convert_value(name, raw, field.converters)
                except ConversionError as e:
                    raise ConfigError("field '%s': %s"%(name, e), name)
            message=check_value(name, value, field.validators)
            if message is not None:
                raise ConfigError("field '%s': %s"%(name, message), name)
            values[name]=value
        if values['n']!=values['m'] and not values['allow_dim_mismatch']:
            raise ConfigError("field 'm': n=%d and m=%d differ; set allow_dim_mismatch to permit it"%(values['n'], values['m']), 'm')
        return cls(values)
    @classmethod
    def load(cls, path):
        return cls.from_mapping(_read_document(path))
    def replace(self, **changes):
        values=self.to_dict()
        values.update(changes)
        return RunConfig.from_mapping(values)
    def to_dict(self):
        return OrderedDict(self._values)
    def to_json(self):
        '''Canonical form: sorted keys, 2-space indent, trailing newline.'''
        return json.dumps(self._values, indent=2, sort_keys=True)+'\n'
    def write(self, path):
        with open(path, 'w', encoding='utf-8') as f:
            f.write(self.to_json())
        return path
    def __eq__(self, other):
        return isinstance(other, RunConfig) and self._values==other._values
    def __repr__(self):
        return 'RunConfig(%s)'%', '.join('%s=%r'%kv for kv in self._values.items())

#============================================================================
# Command line

def flag_name(field):
    return '--'+field.replace('_', '-')

def add_config_arguments(parser, fields=None):
    '''Adds --config and one flag per schema field. Flags default to
    "not given" so they only override what they name.'''
    parser.add_argument('--config', metavar='PATH', default=None, help='JSON configuration file')
    group=parser.add_argument_group('configuration fields')
    for name in fields or FIELDS:
        if name=='config_version':
            continue
        field=FIELDS[name]
        group.add_argument(flag_name(name), dest=name, metavar='VALUE', default=argparse.SUPPRESS,
            help='%s (default: %s)'%(field.help, field.default))
    return parser

def resolve_config(args):
    '''defaults < --config file < flags.'''
    mapping=OrderedDict()
    path=getattr(args, 'config', None)
    if path:
        mapping.update(_read_document(path))
    for name in FIELDS:
        if name in vars(args):
            mapping[name]=getattr(args, name)
    return RunConfig.from_mapping(mapping)

#============================================================================
