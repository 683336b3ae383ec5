#!/usr/bin/python
# -*- coding: ascii -*-
'''
Test cases for labeled faces, triplet files and the synthetic world.

'''

#============================================================================

import csv
import os
import shutil
import tempfile
from unittest import main, TestCase

import numpy as np
from PIL import Image

from kinsynth import numerics as nx
from kinsynth.data import *
from kinsynth.manifest import tree_hash
from kinsynth.rng import seeded_rng
from kinsynth.validation import ValidationError

#============================================================================

def write_png(path, side=8, value=None, seed=0):
    if value is None:
        pixels=seeded_rng(seed).integers(0, 256, (side, side, 3)).astype(np.uint8)
    else:
        pixels=np.full((side, side, 3), value, dtype=np.uint8)
    Image.fromarray(pixels, 'RGB').save(path, format='PNG')
    return pixels

class TempDirTestCase(TestCase):
    def setUp(self):
        self.tmp=tempfile.mkdtemp(prefix='kinsynth-test-')
    def tearDown(self):
        shutil.rmtree(self.tmp, ignore_errors=True)
    def path(self, *parts):
        return os.path.join(self.tmp, *parts)

#============================================================================

class FilenameTestCase(TestCase):
    def testParse(self):
        self.assertEqual(parse_labeled_filename('25_1_0_20170116174525125.jpg'), (25, 1))
        self.assertEqual(parse_labeled_filename('/faces/3_0_2_x.png'), (3, 0))
        self.assertEqual(parse_labeled_filename('60_0_0_family000001-father.png'), (60, 0))
    def testRejected(self):
        for name in ('abc.jpg', '25_1.jpg', 'x_1_0_1.jpg', '25_3_0_1.jpg', '-4_1_0_1.jpg'):
            self.assertRaises(DatasetError, parse_labeled_filename, name)

class ScanTestCase(TempDirTestCase):
    def testScanSkipsWithWarning(self):
        write_png(self.path('40_1_0_b.png'))
        write_png(self.path('10_0_3_a.png'))
        write_png(self.path('notes_0.png'))
        open(self.path('readme.txt'), 'w').close()
        with self.assertLogs('kinsynth.data', 'WARNING') as logs:
            records=scan_labeled_directory(self.tmp)
        self.assertEqual([os.path.basename(r.image_path) for r in records], ['10_0_3_a.png', '40_1_0_b.png'])
        self.assertEqual([(r.age_years, r.gender) for r in records], [(10, 0), (40, 1)])
        self.assertEqual(len(logs.output), 1)
        self.assertTrue('notes_0.png' in logs.output[0])
    def testMissingDirectory(self):
        self.assertRaises(DatasetError, scan_labeled_directory, self.path('absent'))

#============================================================================

class ImageTestCase(TempDirTestCase):
    def testScaling(self):
        write_png(self.path('black.png'), value=0)
        write_png(self.path('white.png'), value=255)
        black=load_image(self.path('black.png'), 8)
        self.assertEqual(black.dtype, np.float32)
        self.assertEqual(black.shape, (8, 8, 3))
        np.testing.assert_array_equal(black, -1)
        np.testing.assert_array_equal(load_image(self.path('white.png'), 8), 1)
    def testResize(self):
        write_png(self.path('a.png'), side=16, value=128)
        image=load_image(self.path('a.png'), 32)
        self.assertEqual(image.shape, (32, 32, 3))
        np.testing.assert_allclose(image, 128/127.5-1, atol=1e-6)
        self.assertRaises(ValidationError, load_image, self.path('a.png'), 24)
    def testRoundTrip(self):
        pixels=write_png(self.path('a.png'), side=16, seed=3)
        image=load_image(self.path('a.png'), 16)
        np.testing.assert_array_equal(to_pixels(image), pixels)
        saved=save_image(image, self.path('out', 'b.png'))
        self.assertEqual(saved, self.path('out', 'b.png'))
        np.testing.assert_array_equal(load_image(saved, 16), image)
    def testToPixelsClamps(self):
        np.testing.assert_array_equal(to_pixels([-2.0, -1.0, 0.0, 1.0, 3.0]), [0, 0, 128, 255, 255])
    def testUnreadable(self):
        with open(self.path('bad.png'), 'w') as f:
            f.write('not an image')
        self.assertRaises(ImageError, load_image, self.path('bad.png'), 8)
        self.assertRaises(ImageError, load_image, self.path('absent.png'), 8)
    def testSaveRejectsShape(self):
        self.assertRaises(nx.ShapeError, save_image, np.zeros((8, 8)), self.path('x.png'))
    def testLoadImagesKeepsOrder(self):
        paths=[]
        for i in range(6):
            paths.append(self.path('%d.png'%i))
            write_png(paths[-1], value=40*i)
        images=load_images(paths, 8, workers=3)
        self.assertEqual(images.shape, (6, 8, 8, 3))
        for i in range(6):
            np.testing.assert_array_equal(images[i], load_image(paths[i], 8))
        self.assertEqual(load_images([], 8).shape, (0, 8, 8, 3))

#============================================================================

class TripletTestCase(TempDirTestCase):
    def makeFaces(self, family_id):
        paths=[]
        for role in ('father', 'mother', 'child'):
            paths.append(self.path('faces', '%s-%s.png'%(family_id, role)))
            write_png(paths[-1])
        return paths
    def writeCsv(self, rows, header=TRIPLET_COLUMNS):
        with open(self.path('triplets.csv'), 'w', newline='') as f:
            writer=csv.writer(f)
            writer.writerow(header)
            writer.writerows(rows)
        return self.path('triplets.csv')
    def setUp(self):
        TempDirTestCase.setUp(self)
        os.makedirs(self.path('faces'))
    def testRoundTrip(self):
        records=[]
        for i in range(3):
            f, m, c=self.makeFaces('fam%d'%i)
            records.append(TripletRecord('fam%d'%i, f, m, c, 4+i, i%2))
        write_triplets(self.path('triplets.csv'), records)
        with open(self.path('triplets.csv')) as f:
            self.assertEqual(f.readline().strip(), ','.join(TRIPLET_COLUMNS))
            self.assertTrue(f.readline().startswith('fam0,faces/fam0-father.png,'))
        loaded=load_triplets(self.path('triplets.csv'))
        self.assertEqual([r.family_id for r in loaded], ['fam0', 'fam1', 'fam2'])
        self.assertEqual(loaded[1].child_age_years, 5)
        self.assertEqual(loaded[1].child_gender, 1)
        self.assertEqual(os.path.abspath(loaded[2].child_path), os.path.abspath(records[2].child_path))
    def testErrorsCarryLineNumbers(self):
        f, m, c=self.makeFaces('ok')
        rows=[
            ['ok', 'faces/ok-father.png', 'faces/ok-mother.png', 'faces/ok-child.png', '7', '0'],
            ['short', 'faces/ok-father.png'],
            ['age', 'faces/ok-father.png', 'faces/ok-mother.png', 'faces/ok-child.png', 'old', '0'],
            [],
            ['gone', 'faces/ok-father.png', 'faces/absent.png', 'faces/ok-child.png', '7', '1'],
            ['sex', 'faces/ok-father.png', 'faces/ok-mother.png', 'faces/ok-child.png', '7', '2'],
        ]
        path=self.writeCsv(rows)
        try:
            load_triplets(path)
        except TripletFormatError as e:
            self.assertEqual([line for line, _ in e.errors], [3, 4, 6, 7])
            self.assertTrue('mother' in e.errors[2][1])
        else:
            self.fail('TripletFormatError not raised')
        self.assertEqual(len(load_triplets(self.writeCsv(rows[:1]+rows[4:5]), check_files=False)), 2)
    def testMissingColumn(self):
        path=self.writeCsv([], header=TRIPLET_COLUMNS[:-1])
        try:
            load_triplets(path)
        except TripletFormatError as e:
            self.assertEqual(e.errors[0][0], 1)
            self.assertTrue('child_gender' in e.errors[0][1])
        else:
            self.fail('TripletFormatError not raised')
    def testMissingFile(self):
        self.assertRaises(DatasetError, load_triplets, self.path('absent.csv'))
    def testSplit(self):
        records=[TripletRecord('family%03d'%(i//2), 'f', 'm', 'c%d'%i, 1, 0) for i in range(200)]
        train, test=split_triplets(records, 0.3)
        self.assertEqual(len(train)+len(test), 200)
        self.assertFalse(set(r.family_id for r in train)&set(r.family_id for r in test))
        self.assertTrue(10<len(test)<110)
        self.assertEqual((train, test), split_triplets(records, 0.3))
        self.assertEqual(split_triplets(records, 0.0), (records, []))
        self.assertEqual(split_triplets(records, 1.0), ([], records))
        self.assertRaises(ValidationError, split_triplets, records, 1.5)
    def testFamilyBucket(self):
        b=family_bucket('family000001')
        self.assertTrue(0<=b<1)
        self.assertEqual(b, family_bucket('family000001'))

#============================================================================

class SyntheticWorldTestCase(TempDirTestCase):
    def testRender(self):
        world=SyntheticWorld(world_seed=1, true_gene_dim=4, image_side=32)
        genes=seeded_rng(0).uniform(-1, 1, (3, 4))
        faces=world.render(genes)
        self.assertEqual(faces.shape, (3, 32, 32, 3))
        self.assertEqual(faces.dtype, np.float32)
        self.assertTrue(np.all(np.abs(faces)<=1))
        np.testing.assert_allclose(world.render(genes[1]), faces[1], atol=1e-6)
        np.testing.assert_array_equal(SyntheticWorld(1, 4, 32).render(genes), faces)
        self.assertFalse(np.array_equal(SyntheticWorld(2, 4, 32).render(genes), faces))
        self.assertRaises(nx.ShapeError, world.render, np.zeros(5))
    def testFamilyGroundTruth(self):
        world=SyntheticWorld(world_seed=0, true_gene_dim=8)
        family=synth_family(world, seeded_rng(5))
        bits=family.mask.bits
        np.testing.assert_array_equal(family.child.genes[bits==1], family.father.genes[bits==1])
        np.testing.assert_array_equal(family.child.genes[bits==0], family.mother.genes[bits==0])
        self.assertEqual((family.father.gender, family.mother.gender), (0, 1))
        np.testing.assert_allclose(family.child.image, world.render(family.child.genes), atol=1e-6)
        again=synth_family(world, seeded_rng(5))
        np.testing.assert_array_equal(again.child.image, family.child.image)
    def testGivenParentGenes(self):
        world=SyntheticWorld(world_seed=0, true_gene_dim=3)
        family=synth_family(world, seeded_rng(0), [1.0, 1.0, 1.0], [-1.0, -1.0, -1.0])
        np.testing.assert_array_equal(family.child.genes, np.where(family.mask.bits==1, 1.0, -1.0))
    def testWriteDataset(self):
        world=SyntheticWorld(world_seed=3, true_gene_dim=4)
        families=write_synthetic_dataset(world, seeded_rng(3).child('families'), self.path('a'), 5)
        self.assertEqual(len(families), 5)
        self.assertEqual(len(os.listdir(self.path('a', 'faces'))), 15)
        records=load_triplets(self.path('a', 'triplets.csv'))
        self.assertEqual([r.family_id for r in records], ['family%06d'%i for i in range(5)])
        self.assertEqual(len(scan_labeled_directory(self.path('a', 'faces'))), 15)
        with open(self.path('a', 'genes.csv')) as f:
            rows=list(csv.DictReader(f))
        self.assertEqual(len(rows), 15)
        child=rows[2]
        self.assertEqual(child['role'], 'child')
        self.assertEqual(child['mask'], families[0].mask.to_string())
        self.assertEqual(rows[0]['mask'], '')
        self.assertEqual(float(child['g0']), families[0].child.genes[0])
        write_synthetic_dataset(world, seeded_rng(3).child('families'), self.path('b'), 5)
        self.assertEqual(tree_hash(self.path('a')), tree_hash(self.path('b')))

#============================================================================

if __name__=='__main__':
    main()
