#!/usr/bin/python
# -*- coding: ascii -*-
'''
Test cases for verification scores, Hu moments, heritability maps and
the feature projection.

'''

#============================================================================

import json
import os
import shutil
import tempfile
from unittest import main, TestCase

import numpy as np
from hypothesis import assume, given, strategies as st

from kinsynth.evaluation import *
from kinsynth.rng import seeded_rng
from kinsynth.validation import ValidationError

#============================================================================

def rank_statistic(pairs):
    '''Brute force: correctly ordered kin/non-kin pairs, ties one half.'''
    kin=[p.score for p in pairs if p.kin]
    other=[p.score for p in pairs if not p.kin]
    doubled=sum(2 if a>b else 1 if a==b else 0 for a in kin for b in other)
    return doubled/float(2*len(kin)*len(other))

def brute_accuracy(pairs):
    best=None
    for t in sorted(set(p.score for p in pairs)):
        acc=sum((p.score>=t)==p.kin for p in pairs)/float(len(pairs))
        if best is None or acc>best[0]:
            best=(acc, t)
    return best

scored_pairs=st.lists(
    st.builds(ScoredPair, st.integers(min_value=-3, max_value=3).map(lambda v: v/4.0), st.booleans()),
    min_size=2, max_size=12)

def random_shape(rng, count=6):
    return rng.uniform(0, 100, (count, 2))

def landmark_set(rng):
    return LandmarkSet(dict((name, random_shape(rng)) for name in REGIONS))

def relative_error(a, b):
    return np.linalg.norm(a-b)/np.linalg.norm(b)

#============================================================================

class CosineTestCase(TestCase):
    def testValues(self):
        self.assertEqual(cosine_similarity([0.3, 0.7, 0.1], [0.3, 0.7, 0.1]), 1.0)
        self.assertAlmostEqual(cosine_similarity([1, 0], [-2, 0]), -1.0)
        self.assertAlmostEqual(cosine_similarity([1, 0], [0, 5]), 0.0)
        self.assertEqual(cosine_distance([1, 2], [1, 2]), 0.0)
    def testScaleInvariant(self):
        a=seeded_rng(0).normal(0, 1, 100)
        self.assertAlmostEqual(cosine_similarity(a, 3*a), 1.0)
    def testErrors(self):
        self.assertRaises(EvaluationError, cosine_similarity, [0, 0], [1, 2])
        self.assertRaises(EvaluationError, cosine_similarity, [1, 2, 3], [1, 2])

#============================================================================

class RocTestCase(TestCase):
    def testPerfectSeparation(self):
        pairs=[ScoredPair(0.9, True), ScoredPair(0.8, True), ScoredPair(0.2, False), ScoredPair(-0.5, False)]
        roc=roc_and_accuracy(pairs)
        self.assertEqual(roc.auc, 1.0)
        self.assertEqual(roc.best_threshold_accuracy, 1.0)
        self.assertEqual(roc.best_threshold, 0.8)
        self.assertEqual(roc.points[0], (0.0, 0.0))
        self.assertEqual(roc.points[-1], (1.0, 1.0))
    def testWorkedExample(self):
        pairs=[ScoredPair(0.9, True), ScoredPair(0.8, False), ScoredPair(0.7, True), ScoredPair(0.1, False)]
        roc=roc_and_accuracy(pairs)
        self.assertEqual(roc.auc, 0.75)
        self.assertEqual(roc.best_threshold_accuracy, 0.75)
        # 0.9 and 0.7 tie on accuracy; the lower threshold wins.
        self.assertEqual(roc.best_threshold, 0.7)
        self.assertEqual(roc.thresholds, [0.9, 0.8, 0.7, 0.1])
    def testSingleLabel(self):
        self.assertRaises(EvaluationError, roc_and_accuracy, [ScoredPair(0.1, True), ScoredPair(0.2, True)])
        self.assertRaises(EvaluationError, roc_and_accuracy, [])
    @given(scored_pairs)
    def testAucIsTheRankStatistic(self, pairs):
        assume(any(p.kin for p in pairs) and not all(p.kin for p in pairs))
        self.assertEqual(roc_and_accuracy(pairs).auc, rank_statistic(pairs))
    @given(scored_pairs)
    def testAccuracyIsTheBestThreshold(self, pairs):
        assume(any(p.kin for p in pairs) and not all(p.kin for p in pairs))
        roc=roc_and_accuracy(pairs)
        self.assertEqual((roc.best_threshold_accuracy, roc.best_threshold), brute_accuracy(pairs))
    @given(scored_pairs)
    def testCurveIsMonotone(self, pairs):
        assume(any(p.kin for p in pairs) and not all(p.kin for p in pairs))
        points=roc_and_accuracy(pairs).points
        self.assertEqual(points[-1], (1.0, 1.0))
        for (f0, t0), (f1, t1) in zip(points, points[1:]):
            self.assertTrue(f0<=f1 and t0<=t1)
    @given(scored_pairs)
    def testIncreasingTransformKeepsAuc(self, pairs):
        assume(any(p.kin for p in pairs) and not all(p.kin for p in pairs))
        stretched=[ScoredPair(np.exp(3*p.score)+1, p.kin) for p in pairs]
        roc, other=roc_and_accuracy(pairs), roc_and_accuracy(stretched)
        self.assertEqual(other.auc, roc.auc)
        self.assertEqual(other.best_threshold_accuracy, roc.best_threshold_accuracy)
        self.assertEqual(other.best_threshold, np.exp(3*roc.best_threshold)+1)
    def testTiedScores(self):
        pairs=[ScoredPair(0.4, kin) for kin in (True, False, False, True, False)]
        roc=roc_and_accuracy(pairs)
        self.assertEqual(roc.auc, 0.5)
        self.assertEqual(roc.points, [(0.0, 0.0), (1.0, 1.0)])

#============================================================================

class ProtocolTestCase(TestCase):
    def testNegativeIndices(self):
        for count in (2, 3, 50):
            negatives=negative_indices(count, seeded_rng(count))
            self.assertEqual(len(negatives), count)
            self.assertTrue(np.all(negatives!=np.arange(count)))
            self.assertTrue(np.all((negatives>=0)&(negatives<count)))
        np.testing.assert_array_equal(negative_indices(9, seeded_rng(1)), negative_indices(9, seeded_rng(1)))
        self.assertRaises(ValidationError, negative_indices, 1, seeded_rng(0))
    def testVerificationPairs(self):
        parents=np.eye(3)
        children=np.eye(3)+0.1
        pairs=verification_pairs(parents, children, children, [1, 2, 0])
        self.assertEqual([p.kin for p in pairs], [True, False]*3)
        self.assertEqual(roc_and_accuracy(pairs).auc, 1.0)
        self.assertRaises(EvaluationError, verification_pairs, parents, children, children, [1, 2])
    def testEmbeddingReport(self):
        real=seeded_rng(0).normal(0, 1, (5, 8))
        matched, unrelated=embedding_similarity_report(real, real.copy(), seeded_rng(1))
        self.assertEqual(matched, 0.0)
        self.assertTrue(unrelated>0)
        self.assertRaises(EvaluationError, embedding_similarity_report, real[:1], real[:1], seeded_rng(0))
        self.assertRaises(EvaluationError, embedding_similarity_report, real, real[:4], seeded_rng(0))
    def testOracleWinRate(self):
        true=seeded_rng(0).normal(0, 1, (6, 8))
        negatives=negative_indices(6, seeded_rng(1))
        self.assertEqual(oracle_win_rate(true, true, true, negatives), 1.0)
        self.assertEqual(oracle_win_rate(true[negatives], true, true, negatives), 0.0)
        self.assertRaises(EvaluationError, oracle_win_rate, [], true, true, negatives)

#============================================================================

class RasterTestCase(TestCase):
    def testBresenham(self):
        self.assertEqual(bresenham_line(0, 0, 3, 0), [(0, 0), (1, 0), (2, 0), (3, 0)])
        self.assertEqual(bresenham_line(2, 2, 2, 2), [(2, 2)])
        line=bresenham_line(5, 1, 0, 4)
        self.assertEqual((line[0], line[-1]), ((5, 1), (0, 4)))
        for (x0, y0), (x1, y1) in zip(line, line[1:]):
            self.assertTrue(max(abs(x1-x0), abs(y1-y0))==1)
    def testRasterize(self):
        points=[[0, 0], [10, 0], [10, 5]]
        raster=rasterize_region(points, 32)
        self.assertEqual(raster.shape, (32, 32))
        self.assertEqual(raster.dtype, np.uint8)
        ys, xs=np.nonzero(raster)
        self.assertEqual((xs.min(), ys.min()), (3, 3))
        self.assertEqual(xs.max(), 28)
        closed=rasterize_region(points, 32, closed=True)
        self.assertTrue(closed.sum()>raster.sum())
        self.assertTrue(np.all(closed>=raster))
        self.assertRaises(EvaluationError, rasterize_region, [[1, 1], [1, 1], [1, 1]])
        self.assertRaises(EvaluationError, rasterize_region, [[1, 1], [2, 2]])
    def testCollinearPointsDrawOneSegment(self):
        raster=rasterize_region([[0, 0], [5, 5], [10, 10]], 64)
        # 80% of 63 pixels starting at the 10% margin: 6 to 57.
        expected=np.zeros((64, 64), dtype=np.uint8)
        for x, y in bresenham_line(6, 6, 57, 57):
            expected[y, x]=1
        np.testing.assert_array_equal(raster, expected)
    def testTranslationKeepsRaster(self):
        rng=seeded_rng(5)
        for _ in range(10):
            points=rng.integers(0, 50, (6, 2)).astype(np.float64)
            self.assertGreater(np.ptp(points, axis=0).max(), 0)
            for closed in (False, True):
                np.testing.assert_array_equal(rasterize_region(points+5, 64, closed), rasterize_region(points, 64, closed))
    def testLogMagnitude(self):
        np.testing.assert_allclose(log_magnitude([100.0, -0.001, 0.0]), [2.0, 3.0, 0.0])

#============================================================================

class HuMomentTestCase(TestCase):
    def rasters(self):
        rng=seeded_rng(42)
        for _ in range(20):
            yield rasterize_region(random_shape(rng), 64, closed=True)
    def testTranslation(self):
        for raster in self.rasters():
            shifted=np.roll(np.roll(raster, 3, axis=0), -2, axis=1)
            np.testing.assert_array_equal(hu_moments(shifted), hu_moments(raster))
    def testRotation(self):
        for raster in self.rasters():
            self.assertLessEqual(relative_error(hu_moments(np.rot90(raster)), hu_moments(raster)), 1e-3)
    def testScale(self):
        for raster in self.rasters():
            doubled=np.kron(raster, np.ones((2, 2), dtype=np.uint8))
            self.assertLessEqual(relative_error(hu_moments(doubled), hu_moments(raster)), 2e-2)
    def testEmpty(self):
        self.assertRaises(EvaluationError, hu_moments, np.zeros((8, 8)))

#============================================================================

class HeritabilityTestCase(TestCase):
    def testIdenticalFacesGiveZeros(self):
        face=landmark_set(seeded_rng(0))
        result=heritability_map(face, face, face)
        self.assertEqual(list(result), list(REGIONS))
        self.assertEqual(list(result.values()), [0.0]*4)
    def testRange(self):
        rng=seeded_rng(1)
        result=heritability_map(landmark_set(rng), landmark_set(rng), landmark_set(rng))
        for value in result.values():
            self.assertTrue(0<=value<=4)
    def testParentSymmetry(self):
        rng=seeded_rng(2)
        child, father, mother=landmark_set(rng), landmark_set(rng), landmark_set(rng)
        self.assertEqual(heritability_map(child, father, mother), heritability_map(child, mother, father))
    def testCopiedRegionIsMoreHeritable(self):
        rng=seeded_rng(4)
        copied, unrelated=[], []
        for _ in range(20):
            father, mother=landmark_set(rng), landmark_set(rng)
            regions=dict((name, father[name]) for name in REGIONS)
            perturbed=dict((name, father[name]+rng.normal(0, 30, father[name].shape)) for name in REGIONS)
            copied.append(heritability_map(LandmarkSet(regions), father, mother))
            unrelated.append(heritability_map(LandmarkSet(perturbed), father, mother))
        copied, unrelated=mean_heritability(copied), mean_heritability(unrelated)
        for name in REGIONS:
            self.assertLess(copied[name], unrelated[name])
    def testMean(self):
        maps=[dict(eyes=1.0, nose=0.0), dict(eyes=0.0, nose=0.5)]
        self.assertEqual(mean_heritability(maps), {'eyes': 0.5, 'nose': 0.25})
        self.assertRaises(EvaluationError, mean_heritability, [])
    def testMissingRegion(self):
        face=LandmarkSet({'eyes': random_shape(seeded_rng(0))})
        self.assertRaises(EvaluationError, heritability_map, face, face, face)
    def testLandmarkValidation(self):
        self.assertRaises(EvaluationError, LandmarkSet, {'eyes': [[0, 0], [1, 1]]})
        self.assertRaises(EvaluationError, LandmarkSet, {'eyes': [[0, 0], [1, 1], [200, 1]]}, (100, 100))
        self.assertRaises(EvaluationError, LandmarkSet, {'eyes': [[0, 0], [1, np.nan], [2, 1]]})

class LandmarkFileTestCase(TestCase):
    def setUp(self):
        self.tmp=tempfile.mkdtemp(prefix='kinsynth-test-')
    def tearDown(self):
        shutil.rmtree(self.tmp, ignore_errors=True)
    def testLoad(self):
        path=os.path.join(self.tmp, 'face.json')
        with open(path, 'w') as f:
            json.dump({'image_size': [64, 64], 'regions': {'nose': [[1, 2], [3, 4], [5, 1]]}}, f)
        landmarks=load_landmarks(path)
        self.assertEqual(landmarks.names(), ['nose'])
        np.testing.assert_array_equal(landmarks['nose'], [[1, 2], [3, 4], [5, 1]])
        self.assertRaises(EvaluationError, landmarks.__getitem__, 'eyes')
    def testInvalid(self):
        path=os.path.join(self.tmp, 'face.json')
        with open(path, 'w') as f:
            json.dump({'points': []}, f)
        self.assertRaises(EvaluationError, load_landmarks, path)
        self.assertRaises(EvaluationError, load_landmarks, os.path.join(self.tmp, 'absent.json'))

#============================================================================

class ProjectionTestCase(TestCase):
    def setUp(self):
        rng=seeded_rng(3)
        self.features=rng.normal(0, 1, (200, 3))*[10.0, 1.0, 0.1]+[5.0, -2.0, 0.0]
    def testPrincipalDirections(self):
        projection=project_2d(self.features)
        values, vectors=np.linalg.eigh(np.cov(self.features, rowvar=False))
        np.testing.assert_allclose(projection.eigenvalues, values[::-1][:2], rtol=1e-6)
        for i in range(2):
            self.assertAlmostEqual(abs(np.dot(projection.components[i], vectors[:, 2-i])), 1.0, places=6)
        self.assertEqual(projection.points.shape, (200, 2))
        np.testing.assert_allclose(projection.points.mean(axis=0), 0, atol=1e-9)
        np.testing.assert_allclose(projection.mean, self.features.mean(axis=0))
    def testDeterministicSigns(self):
        a=project_2d(self.features)
        b=project_2d(self.features, seed=9)
        np.testing.assert_allclose(a.components, b.components, atol=1e-9)
        for v in a.components:
            self.assertTrue(v[np.argmax(np.abs(v))]>0)
    def testCollinearPoints(self):
        rng=seeded_rng(6)
        direction=np.array([1.0, -2.0, 0.5, 3.0])
        features=rng.normal(0, 4, (12, 1))*direction+[1.0, 2.0, 3.0, 4.0]
        projection=project_2d(features)
        np.testing.assert_allclose(projection.points[:, 1], 0, atol=1e-8)
        np.testing.assert_allclose(np.abs(projection.points[:, 0]), np.linalg.norm(features-features.mean(axis=0), axis=1), atol=1e-8)
    def testPlanarDataKeepsDistances(self):
        features=seeded_rng(7).normal(0, 1, (30, 2))*[3.0, 1.0]
        points=project_2d(features).points
        distances=lambda x: np.linalg.norm(x[:, None, :]-x[None, :, :], axis=2)
        np.testing.assert_allclose(distances(points), distances(features), atol=1e-9)
    def testErrors(self):
        self.assertRaises(EvaluationError, project_2d, self.features[:2])
        self.assertRaises(EvaluationError, project_2d, np.ones((5, 3)))

#============================================================================

class ReportTestCase(TestCase):
    def testWriters(self):
        tmp=tempfile.mkdtemp(prefix='kinsynth-test-')
        try:
            path=write_csv(os.path.join(tmp, 'a.csv'), ['name', 'value'], [['x', 0.5], ['y', 2]])
            with open(path) as f:
                self.assertEqual(f.read(), 'name,value\nx,0.500000\ny,2\n')
            path=write_json(os.path.join(tmp, 'a.json'), {'b': 1, 'a': [1.5]})
            with open(path) as f:
                self.assertEqual(json.load(f), {'a': [1.5], 'b': 1})
        finally:
            shutil.rmtree(tmp, ignore_errors=True)

#============================================================================

if __name__=='__main__':
    main()
