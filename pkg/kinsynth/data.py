#!/usr/bin/python
# -*- coding: ascii -*-
'''
Datasets: labeled faces, family triplets and the synthetic genetic world.

Labeled faces follow the UTKFace naming convention
[age]_[gender]_[race]_[stamp].jpg; names that do not parse are skipped
with a warning. Triplet files are CSV with the header

    family_id,father,mother,child,child_age,child_gender

and image paths relative to the CSV file's directory.

Pixels are scaled with v/127.5 - 1 on load; save_image applies the inverse
and clamps to [0, 255].

The synthetic world is a known genes-to-face map: true genes go through a
seeded dense layer, tanh, a reshape to an S x S x 3 image and a fixed 3x3
box smoothing. Families draw both parents' genes uniformly on [-1, 1]^d
and pick each child gene from one parent with a fair 0-1 mask, so tests
have exact ground truth.
'''

#============================================================================

from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor
import csv
import hashlib
import logging
import os

import numpy as np
from PIL import Image, UnidentifiedImageError

from kinsynth.common import KinsynthError
from kinsynth import numerics as nx
from kinsynth.dnanet import select_mask, sample_mask
from kinsynth.rng import seeded_rng
from kinsynth.validation import validate, Int, Float, PowerOfTwo

#============================================================================

__all__=[
    'DatasetError', 'TripletFormatError', 'ImageError',
    'LabeledFaceRecord', 'TripletRecord', 'TRIPLET_COLUMNS',
    'parse_labeled_filename', 'scan_labeled_directory', 'load_image',
    'load_images', 'save_image', 'to_pixels', 'load_triplets',
    'write_triplets', 'split_triplets', 'family_bucket',
    'SyntheticWorld', 'FamilyMember', 'SyntheticFamily', 'family_labels',
    'synth_family', 'write_synthetic_dataset', 'IMAGE_EXTENSIONS',
]

log=logging.getLogger(__name__)

#============================================================================
# Exceptions

class DatasetError(KinsynthError, ValueError):
    pass

class TripletFormatError(DatasetError):
    '''Raised for malformed triplet files. The errors attribute lists
    (line number, message) pairs, line 1 being the header.'''
    def __init__(self, path, errors):
        self.path=path
        self.errors=list(errors)
        DatasetError.__init__(self, 'invalid triplet file %s: %s'%(path, '; '.join('line %d: %s'%e for e in self.errors)))

class ImageError(DatasetError):
    '''Raised when an image file cannot be read or decoded.'''
    pass

#============================================================================
# Records

LabeledFaceRecord=namedtuple('LabeledFaceRecord', ['image_path', 'age_years', 'gender'])

TripletRecord=namedtuple('TripletRecord', [
    'family_id', 'father_path', 'mother_path', 'child_path',
    'child_age_years', 'child_gender',
])

TRIPLET_COLUMNS=('family_id', 'father', 'mother', 'child', 'child_age', 'child_gender')

IMAGE_EXTENSIONS=('.png', '.jpg', '.jpeg')

#============================================================================
# Labeled faces

def parse_labeled_filename(name):
    '''(age_years, gender) from an [age]_[gender]_[race]_[stamp] name.
    @raise DatasetError: fewer than four fields or non-numeric age/gender
    '''
    base=os.path.splitext(os.path.basename(name))[0]
    fields=base.split('_')
    if len(fields)<4:
        raise DatasetError('face file name %r has fewer than 4 fields'%name)
    try:
        age=int(fields[0])
        gender=int(fields[1])
    except ValueError:
        raise DatasetError('face file name %r does not start with numeric age and gender'%name)
    if age<0 or gender not in (0, 1):
        raise DatasetError('face file name %r has age %d, gender %d'%(name, age, gender))
    return age, gender

def scan_labeled_directory(directory):
    '''Records for every parsable image in directory, sorted by file name.'''
    if not os.path.isdir(directory):
        raise DatasetError('face directory %s does not exist'%directory)
    records=[]
    for name in sorted(os.listdir(directory)):
        if not name.lower().endswith(IMAGE_EXTENSIONS):
            continue
        try:
            age, gender=parse_labeled_filename(name)
        except DatasetError as e:
            log.warning('skipping %s: %s', name, e)
            continue
        records.append(LabeledFaceRecord(os.path.join(directory, name), age, gender))
    log.info('found %d labeled faces in %s', len(records), directory)
    return records

#============================================================================
# Images

@validate(side=PowerOfTwo(min=1))
def load_image(path, side):
    '''Decodes a PNG or JPEG, resizes it bilinearly to side x side and
    scales channels to [-1, 1].
    @return: float32 array (side, side, 3)
    '''
    try:
        with Image.open(path) as img:
            img=img.convert('RGB')
            if img.size!=(side, side):
                img=img.resize((side, side), Image.Resampling.BILINEAR)
            pixels=np.asarray(img, dtype=np.float32)
    except (OSError, UnidentifiedImageError, ValueError) as e:
        raise ImageError('cannot read image %s: %s'%(path, e))
    return pixels/np.float32(127.5)-np.float32(1)

def load_images(paths, side, workers=4):
    '''Loads images on a thread pool; the result keeps the order of paths.
    @return: float32 array (len(paths), side, side, 3)
    '''
    paths=list(paths)
    if not paths:
        return np.zeros((0, side, side, 3), dtype=np.float32)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        images=list(pool.map(lambda p: load_image(p, side), paths))
    return np.stack(images)

def to_pixels(image):
    '''Inverse of the load scaling, rounded and clamped to uint8.'''
    image=np.asarray(image, dtype=np.float64)
    return np.clip(np.rint((image+1.0)*127.5), 0, 255).astype(np.uint8)

def save_image(image, path):
    '''Writes an (S, S, 3) face in [-1, 1] as PNG.'''
    image=np.asarray(image)
    if image.ndim!=3 or image.shape[2]!=3:
        raise nx.ShapeError('face image has shape %r'%(image.shape,))
    directory=os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    Image.fromarray(to_pixels(image), 'RGB').save(path, format='PNG')
    return path

#============================================================================
# Triplets

def _resolve(base, path):
    return path if os.path.isabs(path) else os.path.normpath(os.path.join(base, path))

def load_triplets(csv_path, check_files=True):
    '''Reads and validates a triplet CSV.
    @param check_files: report rows whose image files do not exist
    @raise TripletFormatError: with one entry per offending row
    '''
    base=os.path.dirname(os.path.abspath(csv_path))
    errors=[]
    records=[]
    try:
        f=open(csv_path, newline='', encoding='utf-8')
    except OSError as e:
        raise DatasetError('cannot open triplet file %s: %s'%(csv_path, e))
    with f:
        reader=csv.reader(f)
        header=next(reader, None)
        if header is None:
            raise TripletFormatError(csv_path, [(1, 'empty file')])
        header=[h.strip() for h in header]
        missing=[c for c in TRIPLET_COLUMNS if c not in header]
        if missing:
            raise TripletFormatError(csv_path, [(1, 'missing columns %s'%', '.join(missing))])
        index=dict((c, header.index(c)) for c in TRIPLET_COLUMNS)
        for line, row in enumerate(reader, 2):
            if not any(cell.strip() for cell in row):
                continue
            if len(row)<len(header):
                errors.append((line, 'expected %d fields, found %d'%(len(header), len(row))))
                continue
            values=dict((c, row[i].strip()) for c, i in index.items())
            empty=[c for c in TRIPLET_COLUMNS if not values[c]]
            if empty:
                errors.append((line, 'empty %s'%', '.join(empty)))
                continue
            try:
                age=int(values['child_age'])
                gender=int(values['child_gender'])
                if age<0 or gender not in (0, 1):
                    raise ValueError()
            except ValueError:
                errors.append((line, 'invalid child_age/child_gender %r/%r'%(values['child_age'], values['child_gender'])))
                continue
            paths=[_resolve(base, values[c]) for c in ('father', 'mother', 'child')]
            if check_files:
                dangling=[c for c, p in zip(('father', 'mother', 'child'), paths) if not os.path.isfile(p)]
                if dangling:
                    errors.append((line, 'missing image for %s'%', '.join(dangling)))
                    continue
            records.append(TripletRecord(values['family_id'], paths[0], paths[1], paths[2], age, gender))
    if errors:
        raise TripletFormatError(csv_path, errors)
    log.info('loaded %d triplets from %s', len(records), csv_path)
    return records

def write_triplets(csv_path, records):
    '''Writes records with paths relative to the CSV's directory.'''
    base=os.path.dirname(os.path.abspath(csv_path))
    rel=lambda p: os.path.relpath(p, base).replace(os.sep, '/')
    with open(csv_path, 'w', newline='', encoding='utf-8') as f:
        writer=csv.writer(f, lineterminator='\n')
        writer.writerow(TRIPLET_COLUMNS)
        for r in records:
            writer.writerow([r.family_id, rel(r.father_path), rel(r.mother_path), rel(r.child_path), r.child_age_years, r.child_gender])
    return csv_path

def family_bucket(family_id):
    '''Stable position of a family in [0, 1).'''
    digest=hashlib.sha1(family_id.encode('utf-8')).hexdigest()
    return int(digest[:8], 16)/float(2**32)

@validate(test_fraction=Float(min=0, max=1))
def split_triplets(records, test_fraction=0.2):
    '''(train, test) split by family id hash; a family never straddles it.'''
    train, test=[], []
    for r in records:
        (test if family_bucket(r.family_id)<test_fraction else train).append(r)
    return train, test

#============================================================================
# Synthetic genetic world

FamilyMember=namedtuple('FamilyMember', ['image', 'genes', 'age_years', 'gender'])
SyntheticFamily=namedtuple('SyntheticFamily', ['father', 'mother', 'child', 'mask'])

class SyntheticWorld(object):
    '''Fixed nonlinear renderer from true genes to faces.'''
    @validate(world_seed=Int(min=0), true_gene_dim=Int(min=1), image_side=PowerOfTwo(min=32))
    def __init__(self, world_seed=0, true_gene_dim=8, image_side=32):
        self.world_seed=world_seed
        self.true_gene_dim=true_gene_dim
        self.image_side=image_side
        rng=seeded_rng(world_seed).child('render')
        size=image_side*image_side*3
        self.weight=rng.normal(0.0, 2.0/np.sqrt(true_gene_dim), (true_gene_dim, size))
        self.bias=rng.normal(0.0, 0.5, size)
        box=np.zeros((3, 3, 3, 3))
        for c in range(3):
            box[c, c]=1.0/9
        self.smoothing=box
    def render(self, genes):
        '''(N, d) or (d,) true genes -> float32 faces in [-1, 1].'''
        genes=np.asarray(genes, dtype=np.float64)
        single=genes.ndim==1
        genes=np.atleast_2d(genes)
        if genes.shape[1]!=self.true_gene_dim:
            raise nx.ShapeError('world renders %d genes, got %r'%(self.true_gene_dim, genes.shape))
        s=self.image_side
        with nx.no_grad():
            raw=nx.tanh(nx.dense(genes, self.weight, self.bias))
            planes=nx.transpose(nx.reshape(raw, (len(genes), s, s, 3)), (0, 3, 1, 2))
            smooth=nx.conv2d(planes, self.smoothing, padding=1)
            images=np.clip(smooth.data.transpose(0, 2, 3, 1), -1, 1).astype(np.float32)
        return images[0] if single else images

def family_labels(rng):
    '''Seeded (father, mother, child) ages and genders.'''
    father_age=int(rng.integers(25, 61))
    mother_age=int(rng.integers(25, 61))
    child_age=int(rng.integers(1, 31))
    child_gender=int(rng.integers(0, 2))
    return (father_age, 0), (mother_age, 1), (child_age, child_gender)

def synth_family(world, rng, father_genes=None, mother_genes=None):
    '''One family with ground truth. Parent genes are drawn uniformly on
    [-1, 1]^d unless given; the child takes each gene from one parent.'''
    d=world.true_gene_dim
    if father_genes is None:
        father_genes=rng.uniform(-1.0, 1.0, d)
    if mother_genes is None:
        mother_genes=rng.uniform(-1.0, 1.0, d)
    father_genes=np.asarray(father_genes, dtype=np.float64)
    mother_genes=np.asarray(mother_genes, dtype=np.float64)
    mask=sample_mask(rng, d)
    child_genes=select_mask(father_genes, mother_genes, mask)
    (fa, fg), (ma, mg), (ca, cg)=family_labels(rng)
    images=world.render(np.stack([father_genes, mother_genes, child_genes]))
    return SyntheticFamily(
        FamilyMember(images[0], father_genes, fa, fg),
        FamilyMember(images[1], mother_genes, ma, mg),
        FamilyMember(images[2], child_genes, ca, cg),
        mask,
    )

@validate(families=Int(min=1))
def write_synthetic_dataset(world, rng, directory, families):
    '''Writes faces/, triplets.csv and genes.csv under directory.
    Face files carry UTKFace-style labels so the faces directory doubles
    as a labeled training set.
    @return: list of SyntheticFamily
    '''
    faces=os.path.join(directory, 'faces')
    os.makedirs(faces, exist_ok=True)
    records=[]
    generated=[]
    gene_rows=[]
    for i in range(families):
        family_id='family%06d'%i
        family=synth_family(world, rng.child(family_id))
        paths=[]
        for role, member in zip(('father', 'mother', 'child'), family[:3]):
            path=os.path.join(faces, '%d_%d_0_%s-%s.png'%(member.age_years, member.gender, family_id, role))
            save_image(member.image, path)
            paths.append(path)
            gene_rows.append([family_id, role]+['%.17g'%v for v in member.genes])
        records.append(TripletRecord(family_id, paths[0], paths[1], paths[2], family.child.age_years, family.child.gender))
        gene_rows[-1].append(family.mask.to_string())
        generated.append(family)
    write_triplets(os.path.join(directory, 'triplets.csv'), records)
    with open(os.path.join(directory, 'genes.csv'), 'w', newline='', encoding='utf-8') as f:
        writer=csv.writer(f, lineterminator='\n')
        writer.writerow(['family_id', 'role']+['g%d'%j for j in range(world.true_gene_dim)]+['mask'])
        for row in gene_rows:
            writer.writerow(row if len(row)==world.true_gene_dim+3 else row+[''])
    log.info('wrote %d synthetic families to %s', families, directory)
    return generated

#============================================================================
