#!/usr/bin/python
# -*- coding: ascii -*-
'''
Command line front end.

Subcommands:

synth-data      write a synthetic family dataset (faces, triplets, genes)
train-caae      train the conditional adversarial autoencoder
train-dnanet    train DNA-Net on features of a frozen CAAE encoder
generate        synthesize child faces from two parent images
evaluate        verification metrics, embedding report and projection
heritmap        per-region heritability maps from landmark files

Every subcommand accepts --config and one flag per RunConfig field. Exit
codes: 0 success, 2 configuration error, 1 runtime error.
'''

#============================================================================

from collections import OrderedDict
import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from kinsynth.common import KinsynthError, configure_logging
from kinsynth.config import ConfigError, add_config_arguments, resolve_config
from kinsynth.conversion import AsIntList, ConversionError, convert_value
from kinsynth.validation import ValidationError, validate, Int
from kinsynth import numerics as nx
from kinsynth.rng import seeded_rng
from kinsynth.caae import (CaaeArchitecture, CaaeModel, CaaeLossWeights, CaaeOptimizers,
    CAAE_REPORT_TERMS, CAAE_DETAIL_TERMS, caae_train_step, encode_label, encode_batch, decode_batch,
    reconstruction_loss)
from kinsynth.dnanet import (DnaNetArchitecture, DnaNetModel, DnaNetLossWeights, DnaNetOptimizers,
    DNANET_REPORT_TERMS, dnanet_train_step, dnanet_reconstruction_loss, child_feature,
    child_features_batch, sample_mask, sample_masks)
from kinsynth.data import (DatasetError, SyntheticWorld, scan_labeled_directory, load_images,
    load_image, save_image, load_triplets, split_triplets, write_synthetic_dataset)
from kinsynth.checkpoint import (CheckpointError, CheckpointMismatchError, save_checkpoint,
    load_checkpoint, restore_model, write_architecture, read_architecture, architecture_path)
from kinsynth.evaluation import (EvaluationError, REGIONS, roc_and_accuracy, verification_pairs,
    negative_indices, embedding_similarity_report, oracle_win_rate, project_2d,
    load_landmarks, heritability_map, mean_heritability, write_csv, write_json)
from kinsynth.manifest import RunManifest, git_blob_hash

#============================================================================

__all__=[
    'EXIT_OK', 'EXIT_RUNTIME', 'EXIT_CONFIG', 'build_parser', 'main',
    'cmd_synth_data', 'cmd_train_caae', 'cmd_train_dnanet', 'cmd_generate',
    'cmd_evaluate', 'cmd_heritmap', 'load_caae', 'load_dnanet',
]

log=logging.getLogger(__name__)

EXIT_OK=0
EXIT_RUNTIME=1
EXIT_CONFIG=2

CAAE_CHECKPOINT='caae.ksnc'
DNANET_CHECKPOINT='dnanet.ksnc'
FEATURE_CACHE='features.ksnc'

#============================================================================
# Helpers

def _require(config, *fields):
    for name in fields:
        if getattr(config, name) is None:
            raise ConfigError("field '%s': required by this command"%name, name)

def _start(command, config):
    out=config.output_dir
    os.makedirs(out, exist_ok=True)
    manifest=RunManifest(command, config, out)
    manifest.add_artifact(config.write(os.path.join(out, 'config.json')))
    return out, manifest

def _caae_architecture(config):
    return CaaeArchitecture(image_side=config.image_side, n=config.n, encoder_widths=config.caae_widths,
        dz_widths=config.dz_widths, dimg_widths=config.dimg_widths)

def _dnanet_architecture(config):
    return DnaNetArchitecture(n=config.n, m=config.m, hidden=config.dnanet_hidden, dh_widths=config.dh_widths)

def _load_model(path, kind, arch_class, model_class):
    arch=read_architecture(path)
    if arch.get('kind')!=kind:
        raise CheckpointMismatchError('%s is a %r checkpoint, expected %r'%(path, arch.get('kind'), kind))
    try:
        model=model_class(arch_class.from_dict(arch))
    except (TypeError, ValidationError) as e:
        raise CheckpointMismatchError('invalid architecture for %s: %s'%(path, e))
    return restore_model(model, path)

def load_caae(path):
    return _load_model(path, 'caae', CaaeArchitecture, CaaeModel)

def load_dnanet(path):
    return _load_model(path, 'dnanet', DnaNetArchitecture, DnaNetModel)

def _save_model(model, path, manifest):
    save_checkpoint(model, path)
    write_architecture(path, model.arch)
    manifest.add_artifact(path)
    manifest.add_artifact(architecture_path(path))

def _batches(count, batch_size, rng):
    order=rng.permutation(count)
    for start in range(0, count, batch_size):
        yield order[start:start+batch_size]

def _mean_report(reports):
    return OrderedDict((k, float(np.mean([r[k] for r in reports]))) for k in reports[0])

def _write_loss_table(path, manifest, terms):
    header=['epoch']+list(terms)+['eval_reconstruction']
    rows=[[row.get(h, '') for h in header] for row in manifest.loss_table]
    manifest.add_artifact(write_csv(path, header, rows))

def _log_epoch(stage, epoch, report):
    log.info('%s epoch %d: %s', stage, epoch, ', '.join('%s=%.5f'%kv for kv in report.items()))

#============================================================================
# synth-data

def cmd_synth_data(config):
    '''Writes faces/, triplets.csv and genes.csv for config.families
    synthetic families into config.output_dir.'''
    _require(config, 'output_dir')
    out, manifest=_start('synth-data', config)
    world=SyntheticWorld(config.world_seed, config.true_gene_dim, config.image_side)
    families=write_synthetic_dataset(world, seeded_rng(config.world_seed).child('families'), out, config.families)
    for root, dirs, files in os.walk(out):
        dirs.sort()
        for name in sorted(files):
            path=os.path.join(root, name)
            if path not in (os.path.join(out, 'config.json'), os.path.join(out, 'manifest.json')):
                manifest.add_artifact(path)
    manifest.results['families']=len(families)
    manifest.write()
    return out

#============================================================================
# train-caae

def _caae_eval_reconstruction(model, images, labels, chunk=64):
    total=0.0
    with nx.no_grad():
        for start in range(0, len(images), chunk):
            x=images[start:start+chunk]
            x_hat=model.decoder(model.encoder(x), labels[start:start+chunk])
            total+=reconstruction_loss(x, x_hat).item()*len(x)
    return total/len(images)

def cmd_train_caae(config):
    '''Trains the CAAE on config.faces_dir. The loss table starts with
    the reconstruction loss before any update (epoch 0).'''
    _require(config, 'faces_dir', 'output_dir')
    records=scan_labeled_directory(config.faces_dir)
    if not records:
        raise DatasetError('no labeled faces in %s'%config.faces_dir)
    out, manifest=_start('train-caae', config)
    manifest.add_input('faces_dir', config.faces_dir)
    images=load_images([r.image_path for r in records], config.image_side, config.workers)
    labels=np.stack([encode_label(r.age_years, r.gender).encoded for r in records])
    model=CaaeModel(_caae_architecture(config), seed=config.training_seed)
    optimizers=CaaeOptimizers(model, config.learning_rate, config.beta1, config.beta2)
    weights=CaaeLossWeights(config.weight_recon, config.weight_dz, config.weight_dimg)
    rng=seeded_rng(config.training_seed)
    batch_rng, prior_rng=rng.child('batches'), rng.child('prior')
    path=os.path.join(out, CAAE_CHECKPOINT)
    baseline=_caae_eval_reconstruction(model, images, labels)
    manifest.record_losses(0, OrderedDict([('eval_reconstruction', baseline)]))
    log.info('caae epoch 0: eval_reconstruction=%.5f', baseline)
    for epoch in range(1, config.caae_epochs+1):
        reports=[]
        for index in _batches(len(images), config.batch_size, batch_rng):
            reports.append(caae_train_step(model, (images[index], labels[index]), weights, optimizers,
                prior_rng, config.discriminator_steps, details=True))
        report=_mean_report(reports)
        report['eval_reconstruction']=_caae_eval_reconstruction(model, images, labels)
        manifest.record_losses(epoch, report)
        _log_epoch('caae', epoch, report)
        save_checkpoint(model, path)
    _save_model(model, path, manifest)
    _write_loss_table(os.path.join(out, 'caae_losses.csv'), manifest, CAAE_REPORT_TERMS+CAAE_DETAIL_TERMS)
    manifest.results['faces']=len(records)
    manifest.write()
    return path

#============================================================================
# train-dnanet

def _read_feature_cache(cache_path, caae_hash, keys):
    try:
        with open(cache_path+'.json', encoding='utf-8') as f:
            meta=json.load(f)
    except (OSError, ValueError):
        return None
    if meta.get('caae_hash')!=caae_hash:
        return None
    try:
        cache=load_checkpoint(cache_path)
    except CheckpointError as e:
        log.warning('ignoring feature cache %s: %s', cache_path, e)
        return None
    if any(k not in cache for k in keys):
        return None
    log.info('reusing feature cache %s', cache_path)
    return cache

def _triplet_features(caae, caae_hash, triplets, csv_path, out, workers, manifest):
    '''Encodes every distinct face of the triplets once. Features are
    cached in out/features.ksnc, keyed by path relative to the CSV, and
    reused while the CAAE checkpoint hash stays the same.'''
    base=os.path.dirname(os.path.abspath(csv_path))
    paths=sorted(set(p for t in triplets for p in (t.father_path, t.mother_path, t.child_path)))
    keys=[os.path.relpath(p, base).replace(os.sep, '/') for p in paths]
    cache_path=os.path.join(out, FEATURE_CACHE)
    cache=_read_feature_cache(cache_path, caae_hash, keys)
    if cache is None:
        features=encode_batch(caae, load_images(paths, caae.arch.image_side, workers))
        cache=OrderedDict(zip(keys, features))
        save_checkpoint(cache, cache_path)
        write_json(cache_path+'.json', OrderedDict([('caae_hash', caae_hash), ('entries', len(keys))]))
    manifest.add_artifact(cache_path)
    manifest.add_artifact(cache_path+'.json')
    return dict((p, cache[k]) for p, k in zip(paths, keys))

def _stack(features, triplets):
    return (np.stack([features[t.father_path] for t in triplets]),
        np.stack([features[t.mother_path] for t in triplets]),
        np.stack([features[t.child_path] for t in triplets]))

def cmd_train_dnanet(config):
    '''Trains DNA-Net on the training split of config.triplets_csv with
    features from the frozen CAAE in config.caae_checkpoint.'''
    _require(config, 'caae_checkpoint', 'triplets_csv', 'output_dir')
    caae=load_caae(config.caae_checkpoint)
    if caae.arch.n!=config.n:
        raise CheckpointMismatchError('CAAE checkpoint has n=%d, configuration n=%d'%(caae.arch.n, config.n))
    caae_hash=git_blob_hash(config.caae_checkpoint)
    triplets=load_triplets(config.triplets_csv)
    train, test=split_triplets(triplets, config.test_fraction)
    if not train:
        raise DatasetError('no training triplets in %s'%config.triplets_csv)
    out, manifest=_start('train-dnanet', config)
    manifest.add_input('caae_checkpoint', config.caae_checkpoint)
    manifest.add_input('triplets_csv', config.triplets_csv)
    features=_triplet_features(caae, caae_hash, train, config.triplets_csv, out, config.workers, manifest)
    h_f, h_m, h_c=_stack(features, train)
    model=DnaNetModel(_dnanet_architecture(config), seed=config.training_seed)
    optimizers=DnaNetOptimizers(model, config.learning_rate, config.beta1, config.beta2)
    weights=DnaNetLossWeights(config.weight_dnanet_recon, config.weight_dh)
    rng=seeded_rng(config.training_seed)
    batch_rng, prior_rng=rng.child('batches'), rng.child('prior')
    def evaluate():
        return dnanet_reconstruction_loss(child_features_batch(model, h_f, h_m), h_c, config.norm).item()
    manifest.record_losses(0, OrderedDict([('eval_reconstruction', evaluate())]))
    path=os.path.join(out, DNANET_CHECKPOINT)
    for epoch in range(1, config.dnanet_epochs+1):
        reports=[]
        for index in _batches(len(h_f), config.batch_size, batch_rng):
            reports.append(dnanet_train_step(model, (h_f[index], h_m[index], h_c[index]), weights, optimizers,
                prior_rng, config.norm, config.discriminator_steps))
        report=_mean_report(reports)
        report['eval_reconstruction']=evaluate()
        manifest.record_losses(epoch, report)
        _log_epoch('dnanet', epoch, report)
        save_checkpoint(model, path)
    _save_model(model, path, manifest)
    _write_loss_table(os.path.join(out, 'dnanet_losses.csv'), manifest, DNANET_REPORT_TERMS)
    if git_blob_hash(config.caae_checkpoint)!=caae_hash:
        raise CheckpointError('CAAE checkpoint %s changed during DNA-Net training'%config.caae_checkpoint)
    manifest.results['norm']=config.norm
    manifest.results['default_norm']='l2'
    manifest.results['train_triplets']=len(train)
    manifest.results['test_triplets']=len(test)
    manifest.results['caae_hash']=caae_hash
    manifest.write()
    return path

#============================================================================
# generate

def _grid(faces):
    '''Tiles faces[child][label] into one image, one row per label.'''
    rows=[np.concatenate([child[i] for child in faces], axis=1) for i in range(len(faces[0]))]
    return np.concatenate(rows, axis=0)

def cmd_generate(config, father, mother, age_years=None, gender=None, mode='max', siblings=None, ages=None, genders=None):
    '''Child faces for a father and a mother image.
    @param mode: "max" or "mask" (one seeded mask)
    @param siblings: number of children from distinct seeded masks
    @param ages: ages in years to decode each child at, default [age_years]
    @param genders: genders to decode at, default [gender]
    @return: list of written PNG paths
    '''
    _require(config, 'caae_checkpoint', 'dnanet_checkpoint', 'output_dir')
    ages=list(ages) if ages else ([age_years] if age_years is not None else [])
    genders=list(genders) if genders else ([gender] if gender is not None else [])
    if not ages:
        raise ConfigError("field 'age': an age or a list of ages is required", 'age')
    if not genders:
        raise ConfigError("field 'gender': a gender or a list of genders is required", 'gender')
    if mode not in ('max', 'mask'):
        raise ConfigError("field 'mode': %r is not one of max, mask"%mode, 'mode')
    if siblings is not None and siblings<1:
        raise ConfigError("field 'siblings': must be at least 1", 'siblings')
    request=OrderedDict([('father', father), ('mother', mother), ('ages', ages), ('genders', genders),
        ('mode', mode), ('siblings', siblings)])
    labels=[(a, g, encode_label(a, g)) for g in genders for a in ages]
    caae=load_caae(config.caae_checkpoint)
    dnanet=load_dnanet(config.dnanet_checkpoint)
    out, manifest=_start('generate', config)
    manifest.add_input('caae_checkpoint', config.caae_checkpoint)
    manifest.add_input('dnanet_checkpoint', config.dnanet_checkpoint)
    manifest.add_input('father', father)
    manifest.add_input('mother', mother)
    manifest.results['request']=request
    side=caae.arch.image_side
    h_f=encode_batch(caae, load_image(father, side)[None])[0]
    h_m=encode_batch(caae, load_image(mother, side)[None])[0]
    rng=seeded_rng(config.sampling_seed).child('generate')
    seed=config.sampling_seed
    if siblings:
        masks=sample_masks(rng, siblings, dnanet.arch.m)
        children=[(child_feature(dnanet, h_f, h_m, 'mask', mask), '_sib%d'%i, mask) for i, mask in enumerate(masks)]
    elif mode=='mask':
        mask=sample_mask(rng, dnanet.arch.m)
        children=[(child_feature(dnanet, h_f, h_m, 'mask', mask), '_mask', mask)]
    else:
        children=[(child_feature(dnanet, h_f, h_m, 'max'), '', None)]
    written=[]
    faces_by_child=[]
    for h_c, suffix, mask in children:
        faces=decode_batch(caae, np.repeat(h_c[None], len(labels), axis=0), [l for _, _, l in labels])
        for (a, g, _), face in zip(labels, faces):
            path=os.path.join(out, 'child_s%d_a%d_g%d%s.png'%(seed, a, g, suffix))
            written.append(manifest.add_artifact(save_image(face, path)))
        faces_by_child.append(list(faces))
    if len(written)>1:
        written.append(manifest.add_artifact(save_image(_grid(faces_by_child), os.path.join(out, 'grid_s%d.png'%seed))))
    masks=[(suffix.lstrip('_'), mask) for _, suffix, mask in children if mask is not None]
    if masks:
        path=os.path.join(out, 'masks.txt')
        with open(path, 'w', encoding='ascii') as f:
            for name, mask in masks:
                f.write('%s %s\n'%(name, mask.to_string()))
        manifest.add_artifact(path)
    manifest.results['images']=len(written)
    manifest.write()
    log.info('wrote %d images to %s', len(written), out)
    return written

#============================================================================
# evaluate

PAIR_TYPES=('father-real', 'father-generated', 'mother-real', 'mother-generated')

def cmd_evaluate(config):
    '''Generates a child per test triplet and scores kinship verification
    with the encoder as embedding model. Real and generated rows share
    the same negatives.'''
    _require(config, 'caae_checkpoint', 'dnanet_checkpoint', 'triplets_csv', 'output_dir')
    caae=load_caae(config.caae_checkpoint)
    dnanet=load_dnanet(config.dnanet_checkpoint)
    _, test=split_triplets(load_triplets(config.triplets_csv), config.test_fraction)
    if len(test)<2:
        raise EvaluationError('evaluation needs at least 2 test triplets, found %d'%len(test))
    out, manifest=_start('evaluate', config)
    for label in ('caae_checkpoint', 'dnanet_checkpoint', 'triplets_csv'):
        manifest.add_input(label, getattr(config, label))
    side=caae.arch.image_side
    paths=sorted(set(p for t in test for p in (t.father_path, t.mother_path, t.child_path)))
    features=dict(zip(paths, encode_batch(caae, load_images(paths, side, config.workers))))
    h_f, h_m, h_c=_stack(features, test)
    labels=[encode_label(t.child_age_years, t.child_gender) for t in test]
    generated=decode_batch(caae, child_features_batch(dnanet, h_f, h_m), labels)
    for t, face in zip(test, generated):
        manifest.add_artifact(save_image(face, os.path.join(out, 'generated', '%s.png'%t.family_id)))
    e_gen=encode_batch(caae, generated)
    rng=seeded_rng(config.sampling_seed).child('evaluate')
    negatives=negative_indices(len(test), rng.child('negatives'))
    rows=[]
    metrics=OrderedDict()
    for name, parents, children in zip(PAIR_TYPES, (h_f, h_f, h_m, h_m), (h_c, e_gen, h_c, e_gen)):
        roc=roc_and_accuracy(verification_pairs(parents, children, h_c, negatives))
        metrics[name]=OrderedDict([('auc', roc.auc), ('accuracy', roc.best_threshold_accuracy), ('threshold', roc.best_threshold)])
        rows.append([name, roc.auc, roc.best_threshold_accuracy, roc.best_threshold])
        log.info('%s: auc=%.4f accuracy=%.4f', name, roc.auc, roc.best_threshold_accuracy)
    matched, unrelated=embedding_similarity_report(h_c, e_gen, rng.child('embedding'))
    win_rate=oracle_win_rate(e_gen, h_c, h_c, negatives)
    projection=project_2d(np.concatenate([h_c, e_gen]), seed=config.sampling_seed)
    manifest.add_artifact(write_csv(os.path.join(out, 'metrics.csv'), ['pair_type', 'auc', 'accuracy', 'threshold'], rows))
    manifest.add_artifact(write_csv(os.path.join(out, 'projection.csv'), ['family_id', 'kind', 'x', 'y'],
        [[t.family_id, kind, float(p[0]), float(p[1])] for kind, block in (('real', 0), ('generated', len(test)))
            for t, p in zip(test, projection.points[block:block+len(test)])]))
    report=OrderedDict([
        ('pairs', metrics),
        ('embedding', OrderedDict([('real_vs_generated', matched), ('generated_vs_random', unrelated)])),
        ('oracle_win_rate', win_rate),
        ('projection_eigenvalues', [float(v) for v in projection.eigenvalues]),
        ('test_triplets', len(test)),
    ])
    manifest.add_artifact(write_json(os.path.join(out, 'metrics.json'), report))
    manifest.results.update(report)
    manifest.write()
    return report

#============================================================================
# heritmap

def _landmark_triplets(father, mother, child, landmarks_csv):
    if landmarks_csv is None:
        if not (father and mother and child):
            raise ConfigError("field 'landmarks': give --father, --mother and --child or --landmarks", 'landmarks')
        return [('triplet', father, mother, child)]
    base=os.path.dirname(os.path.abspath(landmarks_csv))
    triplets=[]
    with open(landmarks_csv, newline='', encoding='utf-8') as f:
        reader=csv.DictReader(f)
        missing=[c for c in ('triplet_id', 'father', 'mother', 'child') if c not in (reader.fieldnames or [])]
        if missing:
            raise EvaluationError('landmark index %s lacks columns %s'%(landmarks_csv, ', '.join(missing)))
        for row in reader:
            triplets.append((row['triplet_id'],)+tuple(os.path.join(base, row[c]) for c in ('father', 'mother', 'child')))
    if not triplets:
        raise EvaluationError('landmark index %s lists no triplets'%landmarks_csv)
    return triplets

@validate(canvas_side=Int(min=1))
def cmd_heritmap(config, father=None, mother=None, child=None, landmarks_csv=None, canvas_side=64):
    '''Per-triplet and mean heritability maps from landmark JSON files.'''
    _require(config, 'output_dir')
    triplets=_landmark_triplets(father, mother, child, landmarks_csv)
    maps=OrderedDict()
    for triplet_id, f_path, m_path, c_path in triplets:
        sets=[load_landmarks(p) for p in (f_path, m_path, c_path)]
        names=[sorted(s.names()) for s in sets]
        if not names[0]==names[1]==names[2]:
            raise EvaluationError('region mismatch across landmark files of %s: %s'%(triplet_id, names))
        missing=[r for r in REGIONS if r not in names[0]]
        if missing:
            raise EvaluationError('landmark files of %s lack regions %s'%(triplet_id, ', '.join(missing)))
        maps[triplet_id]=heritability_map(sets[2], sets[0], sets[1], canvas_side=canvas_side)
    mean=mean_heritability(list(maps.values()))
    out, manifest=_start('heritmap', config)
    for triplet_id, f_path, m_path, c_path in triplets:
        for role, p in zip(('father', 'mother', 'child'), (f_path, m_path, c_path)):
            manifest.add_input('%s/%s'%(triplet_id, role), p)
    rows=[[t]+[m[r] for r in REGIONS] for t, m in maps.items()]
    rows.append(['mean']+[mean[r] for r in REGIONS])
    manifest.add_artifact(write_csv(os.path.join(out, 'heritability.csv'), ['triplet_id']+list(REGIONS), rows))
    report=OrderedDict([('triplets', maps), ('mean', mean)])
    manifest.add_artifact(write_json(os.path.join(out, 'heritability.json'), report))
    manifest.results['request']=OrderedDict([('father', father), ('mother', mother), ('child', child),
        ('landmarks_csv', landmarks_csv), ('canvas_side', canvas_side)])
    manifest.results['mean']=mean
    manifest.write()
    return report

#============================================================================
# Argument parsing

def _int_list(text):
    try:
        return convert_value('list', text, AsIntList)
    except ConversionError as e:
        raise argparse.ArgumentTypeError(str(e))

def _run_synth_data(config, args):
    return cmd_synth_data(config)

def _run_train_caae(config, args):
    return cmd_train_caae(config)

def _run_train_dnanet(config, args):
    return cmd_train_dnanet(config)

def _run_generate(config, args):
    return cmd_generate(config, args.father, args.mother, args.age, args.gender, args.mode,
        args.siblings, args.ages, args.genders)

def _run_evaluate(config, args):
    return cmd_evaluate(config)

def _run_heritmap(config, args):
    return cmd_heritmap(config, args.father, args.mother, args.child, args.landmarks, args.canvas_side)

def build_parser():
    parser=argparse.ArgumentParser(prog='kinsynth', description='Kin face synthesis from parent faces.')
    commands=parser.add_subparsers(dest='command', metavar='COMMAND')
    commands.required=True
    def command(name, help, run):
        sub=commands.add_parser(name, help=help)
        sub.set_defaults(run=run)
        return sub
    add_config_arguments(command('synth-data', 'write a synthetic family dataset', _run_synth_data))
    add_config_arguments(command('train-caae', 'train the conditional adversarial autoencoder', _run_train_caae))
    add_config_arguments(command('train-dnanet', 'train DNA-Net on frozen CAAE features', _run_train_dnanet))
    sub=command('generate', 'synthesize child faces from two parent images', _run_generate)
    sub.add_argument('--father', required=True, metavar='IMAGE')
    sub.add_argument('--mother', required=True, metavar='IMAGE')
    sub.add_argument('--age', type=int, default=None, help='child age in years')
    sub.add_argument('--gender', type=int, default=None, help='child gender, 0 or 1')
    sub.add_argument('--mode', default='max', help='gene selection: max or mask')
    sub.add_argument('--siblings', type=int, default=None, metavar='K', help='K children from distinct masks')
    sub.add_argument('--ages', type=_int_list, default=None, help='comma separated ages, one image each')
    sub.add_argument('--genders', type=_int_list, default=None, help='comma separated genders')
    add_config_arguments(sub)
    add_config_arguments(command('evaluate', 'verification metrics on the test triplets', _run_evaluate))
    sub=command('heritmap', 'heritability maps from landmark files', _run_heritmap)
    sub.add_argument('--father', metavar='JSON')
    sub.add_argument('--mother', metavar='JSON')
    sub.add_argument('--child', metavar='JSON')
    sub.add_argument('--landmarks', metavar='CSV', help='index with triplet_id,father,mother,child columns')
    sub.add_argument('--canvas-side', type=int, default=64)
    add_config_arguments(sub)
    return parser

def main(argv=None):
    parser=build_parser()
    args=parser.parse_args(argv)
    try:
        config=resolve_config(args)
    except ConfigError as e:
        sys.stderr.write('kinsynth %s: configuration error: %s\n'%(args.command, e))
        return EXIT_CONFIG
    configure_logging(config.log_level)
    try:
        args.run(config, args)
    except (ConfigError, ValidationError) as e:
        log.error('%s: invalid arguments: %s', args.command, e)
        return EXIT_CONFIG
    except (KinsynthError, OSError) as e:
        log.error('%s failed: %s', args.command, e)
        return EXIT_RUNTIME
    return EXIT_OK

if __name__=='__main__':
    sys.exit(main())

#============================================================================
