#!/usr/bin/python
# -*- coding: ascii -*-
'''
Evaluation: verification scores, ROC curves, embedding similarity,
heritability maps and a 2-D feature projection.

Verification pairs are scored by cosine similarity. The ROC sweep uses
every distinct score as a threshold (a pair counts as kin when its score
is at least the threshold). AUC is computed with the trapezoid rule in
integer arithmetic, so it equals the pairwise rank statistic (correctly
ordered kin/non-kin pairs, ties counting one half) exactly.

Heritability maps compare facial regions through the Hu invariant
moments of their rasterized landmark polylines:

    d(region) = cos_dist(hu(child), hu(father)) + cos_dist(hu(child), hu(mother))

with each Hu vector mapped through sign(v)*log10|v| first.
'''

#============================================================================

from collections import OrderedDict, namedtuple
import csv
import json

import numpy as np

from kinsynth.common import KinsynthError
from kinsynth.validation import validate, Int

#============================================================================

__all__=[
    'EvaluationError', 'cosine_similarity', 'cosine_distance', 'ScoredPair',
    'RocCurve', 'roc_and_accuracy', 'negative_indices', 'verification_pairs',
    'embedding_similarity_report', 'oracle_win_rate', 'REGIONS',
    'CLOSED_REGIONS', 'LandmarkSet', 'load_landmarks', 'bresenham_line',
    'rasterize_region', 'hu_moments', 'log_magnitude', 'heritability_map',
    'mean_heritability', 'Projection', 'project_2d', 'write_csv',
    'write_json',
]

#============================================================================
# Exceptions

class EvaluationError(KinsynthError, ValueError):
    pass

#============================================================================
# Cosine similarity

def cosine_similarity(a, b):
    '''dot(a, b)/(|a| |b|), clipped to [-1, 1]; exactly 1 for equal inputs.'''
    a=np.asarray(a, dtype=np.float64).ravel()
    b=np.asarray(b, dtype=np.float64).ravel()
    if a.shape!=b.shape:
        raise EvaluationError('cosine_similarity: lengths %d and %d differ'%(a.size, b.size))
    na, nb=np.linalg.norm(a), np.linalg.norm(b)
    if na==0 or nb==0:
        raise EvaluationError('cosine_similarity of a zero vector')
    if np.array_equal(a, b):
        return 1.0
    return float(np.clip(np.dot(a, b)/(na*nb), -1.0, 1.0))

def cosine_distance(a, b):
    return 1.0-cosine_similarity(a, b)

#============================================================================
# ROC

ScoredPair=namedtuple('ScoredPair', ['score', 'kin'])

class RocCurve(object):
    '''points: (fpr, tpr) from (0, 0) to (1, 1), one per threshold.'''
    def __init__(self, points, thresholds, auc, best_threshold_accuracy, best_threshold):
        self.points=points
        self.thresholds=thresholds
        self.auc=auc
        self.best_threshold_accuracy=best_threshold_accuracy
        self.best_threshold=best_threshold
    def __repr__(self):
        return 'RocCurve(auc=%.4f, accuracy=%.4f, threshold=%.4f)'%(self.auc, self.best_threshold_accuracy, self.best_threshold)

def roc_and_accuracy(pairs):
    '''ROC curve, AUC and best single-threshold accuracy of scored pairs.
    @raise EvaluationError: pairs do not contain both labels
    '''
    scores=np.array([float(p.score) for p in pairs])
    kin=np.array([bool(p.kin) for p in pairs])
    positives=int(kin.sum())
    negatives=len(kin)-positives
    if not positives or not negatives:
        raise EvaluationError('ROC needs kin and non-kin pairs (got %d and %d)'%(positives, negatives))
    thresholds=np.unique(scores)[::-1]
    points=[(0.0, 0.0)]
    twice_area=0
    tp_prev=fp_prev=0
    accuracies=[]
    for t in thresholds:
        predicted=scores>=t
        tp=int((predicted&kin).sum())
        fp=int((predicted&~kin).sum())
        twice_area+=(fp-fp_prev)*(tp+tp_prev)
        tp_prev, fp_prev=tp, fp
        points.append((fp/float(negatives), tp/float(positives)))
        accuracies.append((tp+negatives-fp)/float(len(kin)))
    best=None
    # Ascending thresholds, strict improvement: ties keep the lower one.
    for t, acc in reversed(list(zip(thresholds, accuracies))):
        if best is None or acc>best[0]:
            best=(acc, float(t))
    auc=twice_area/float(2*positives*negatives)
    return RocCurve(points, [float(t) for t in thresholds], auc, best[0], best[1])

#============================================================================
# Verification protocol

@validate(count=Int(min=2))
def negative_indices(count, rng):
    '''One unrelated partner j != i per index i.'''
    offsets=rng.integers(1, count, size=count)
    return (np.arange(count)+offsets)%count

def verification_pairs(parents, children, negative_children, negatives):
    '''Kin pairs (parent i, child i) and one non-kin pair
    (parent i, negative_children[negatives[i]]) per parent.'''
    if not (len(parents)==len(children)==len(negatives)):
        raise EvaluationError('verification lists are not aligned')
    pairs=[]
    for i, parent in enumerate(parents):
        pairs.append(ScoredPair(cosine_similarity(parent, children[i]), True))
        pairs.append(ScoredPair(cosine_similarity(parent, negative_children[negatives[i]]), False))
    return pairs

def embedding_similarity_report(real_children, generated_children, rng):
    '''(mean cosine distance real_i vs generated_i,
        mean cosine distance generated_i vs real_j for a random j != i)'''
    if not len(real_children) or len(real_children)!=len(generated_children):
        raise EvaluationError('embedding report needs aligned non-empty lists')
    if len(real_children)<2:
        raise EvaluationError('embedding report needs at least two children for re-pairing')
    matched=[cosine_distance(r, g) for r, g in zip(real_children, generated_children)]
    others=negative_indices(len(real_children), rng)
    unrelated=[cosine_distance(generated_children[i], real_children[j]) for i, j in enumerate(others)]
    return float(np.mean(matched)), float(np.mean(unrelated))

def oracle_win_rate(generated_children, true_children, unrelated_children, negatives):
    '''Fraction of triplets whose generated child is cosine-closer to the
    true child than to unrelated_children[negatives[i]].'''
    if not len(generated_children):
        raise EvaluationError('oracle win rate of an empty set')
    wins=0
    for i, g in enumerate(generated_children):
        if cosine_similarity(g, true_children[i])>cosine_similarity(g, unrelated_children[negatives[i]]):
            wins+=1
    return wins/float(len(generated_children))

#============================================================================
# Landmarks and rasters

REGIONS=('eyes', 'nose', 'mouth', 'chin')
CLOSED_REGIONS=frozenset(['eyes', 'mouth'])

class LandmarkSet(object):
    '''Ordered 2-D points per facial region, in pixels.'''
    def __init__(self, regions, image_size=None):
        self.regions=OrderedDict()
        for name, points in regions.items():
            points=np.asarray(points, dtype=np.float64)
            if points.ndim!=2 or points.shape[1]!=2 or len(points)<3:
                raise EvaluationError('region %r needs at least 3 (x, y) points'%name)
            if not np.all(np.isfinite(points)):
                raise EvaluationError('region %r has non-finite coordinates'%name)
            if image_size is not None and (points.min()<0 or points[:, 0].max()>=image_size[0] or points[:, 1].max()>=image_size[1]):
                raise EvaluationError('region %r leaves the %dx%d image'%(name, image_size[0], image_size[1]))
            self.regions[name]=points
        self.image_size=image_size
    def __getitem__(self, name):
        try:
            return self.regions[name]
        except KeyError:
            raise EvaluationError('landmark set has no region %r'%name)
    def names(self):
        return list(self.regions)

def load_landmarks(path):
    '''Reads {"regions": {"eyes": [[x, y], ...], ...}} with an optional
    "image_size": [width, height].'''
    try:
        with open(path, encoding='utf-8') as f:
            document=json.load(f)
    except (OSError, ValueError) as e:
        raise EvaluationError('cannot read landmarks %s: %s'%(path, e))
    if not isinstance(document, dict) or not isinstance(document.get('regions'), dict):
        raise EvaluationError('landmark file %s has no "regions" object'%path)
    return LandmarkSet(document['regions'], document.get('image_size'))

def bresenham_line(x0, y0, x1, y1):
    '''Integer pixels of the segment from (x0, y0) to (x1, y1).'''
    points=[]
    dx, dy=abs(x1-x0), -abs(y1-y0)
    sx=1 if x0<x1 else -1
    sy=1 if y0<y1 else -1
    err=dx+dy
    while True:
        points.append((x0, y0))
        if x0==x1 and y0==y1:
            return points
        e2=2*err
        if e2>=dy:
            err+=dy
            x0+=sx
        if e2<=dx:
            err+=dx
            y0+=sy

@validate(canvas_side=Int(min=8))
def rasterize_region(points, canvas_side=64, closed=False):
    '''Draws the polyline through points on a canvas_side square after
    scaling the bounding box to 80% of the canvas.
    @return: uint8 raster indexed [y, x], 1 on the strokes
    '''
    points=np.asarray(points, dtype=np.float64)
    if points.ndim!=2 or points.shape[1]!=2 or len(points)<3:
        raise EvaluationError('rasterize_region needs at least 3 (x, y) points')
    low=points.min(axis=0)
    extent=float((points.max(axis=0)-low).max())
    if extent==0:
        raise EvaluationError('degenerate region: all points coincide')
    span=0.8*(canvas_side-1)
    margin=0.1*(canvas_side-1)
    pixels=np.rint((points-low)*(span/extent)+margin).astype(int)
    raster=np.zeros((canvas_side, canvas_side), dtype=np.uint8)
    segments=list(zip(pixels[:-1], pixels[1:]))
    if closed:
        segments.append((pixels[-1], pixels[0]))
    for (x0, y0), (x1, y1) in segments:
        for x, y in bresenham_line(int(x0), int(y0), int(x1), int(y1)):
            raster[y, x]=1
    return raster

def hu_moments(raster):
    '''The seven Hu invariants of the set pixels of raster.'''
    ys, xs=np.nonzero(np.asarray(raster))
    if not len(xs):
        raise EvaluationError('hu_moments of an empty raster')
    # Bounding box coordinates make translated rasters give identical sums.
    x=(xs-xs.min()).astype(np.float64)
    y=(ys-ys.min()).astype(np.float64)
    m00=float(len(x))
    dx=x-x.mean()
    dy=y-y.mean()
    def eta(p, q):
        return np.sum(dx**p*dy**q)/m00**(1+(p+q)/2.0)
    n20, n02, n11=eta(2, 0), eta(0, 2), eta(1, 1)
    n30, n03, n21, n12=eta(3, 0), eta(0, 3), eta(2, 1), eta(1, 2)
    a, b=n30+n12, n21+n03
    return np.array([
        n20+n02,
        (n20-n02)**2+4*n11**2,
        (n30-3*n12)**2+(3*n21-n03)**2,
        a**2+b**2,
        (n30-3*n12)*a*(a**2-3*b**2)+(3*n21-n03)*b*(3*a**2-b**2),
        (n20-n02)*(a**2-b**2)+4*n11*a*b,
        (3*n21-n03)*a*(a**2-3*b**2)-(n30-3*n12)*b*(3*a**2-b**2),
    ])

def log_magnitude(values):
    '''sign(v)*log10|v|, zero staying zero.'''
    values=np.asarray(values, dtype=np.float64)
    out=np.zeros_like(values)
    nonzero=values!=0
    out[nonzero]=np.sign(values[nonzero])*np.log10(np.abs(values[nonzero]))
    return out

def _region_descriptor(landmarks, name, canvas_side):
    return log_magnitude(hu_moments(rasterize_region(landmarks[name], canvas_side, name in CLOSED_REGIONS)))

def heritability_map(child, father, mother, regions=REGIONS, canvas_side=64):
    '''Accumulated cosine distance of each region to both parents.'''
    result=OrderedDict()
    for name in regions:
        c=_region_descriptor(child, name, canvas_side)
        result[name]=cosine_distance(c, _region_descriptor(father, name, canvas_side))+cosine_distance(c, _region_descriptor(mother, name, canvas_side))
    return result

def mean_heritability(maps):
    if not maps:
        raise EvaluationError('no heritability maps to average')
    return OrderedDict((name, float(np.mean([m[name] for m in maps]))) for name in maps[0])

#============================================================================
# Projection

Projection=namedtuple('Projection', ['points', 'components', 'eigenvalues', 'mean'])

def _sign_fixed(v):
    return -v if v[np.argmax(np.abs(v))]<0 else v

@validate(iterations=Int(min=1), seed=Int(min=0))
def project_2d(features, iterations=1000, seed=0):
    '''Mean-centered projection on the top two principal directions,
    found by power iteration with deflation.'''
    x=np.asarray(features, dtype=np.float64)
    if x.ndim!=2 or len(x)<3:
        raise EvaluationError('project_2d needs at least 3 feature vectors')
    mean=x.mean(axis=0)
    centered=x-mean
    cov=centered.T@centered/(len(x)-1)
    if not np.any(cov):
        raise EvaluationError('project_2d: all feature vectors are identical')
    rng=np.random.Generator(np.random.PCG64(seed))
    components=[]
    eigenvalues=[]
    work=cov.copy()
    for _ in range(2):
        v=rng.normal(size=cov.shape[0])
        for c in components:
            v-=np.dot(v, c)*c
        v/=np.linalg.norm(v)
        for _ in range(iterations):
            w=work@v
            for c in components:
                w-=np.dot(w, c)*c
            norm=np.linalg.norm(w)
            if norm==0:
                break
            w/=norm
            done=np.linalg.norm(w-v)<1e-15
            v=w
            if done:
                break
        v=_sign_fixed(v)
        value=float(v@cov@v)
        components.append(v)
        eigenvalues.append(value)
        work=work-value*np.outer(v, v)
    components=np.stack(components)
    return Projection(centered@components.T, components, np.array(eigenvalues), mean)

#============================================================================
# Reports

def write_csv(path, header, rows):
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer=csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([('%.6f'%v if isinstance(v, float) else v) for v in row])
    return path

def write_json(path, document):
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(document, f, indent=2, sort_keys=True)
        f.write('\n')
    return path

#============================================================================
