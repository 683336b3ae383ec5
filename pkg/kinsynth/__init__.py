#!/usr/bin/python
# -*- coding: ascii -*-
'''
Kin face synthesis from parent faces.

A conditional adversarial autoencoder maps faces to bounded feature
vectors and back under an age/gender label; DNA-Net maps features to gene
vectors, recombines two parents' genes and maps the result back to a
child's features. Evaluation tools score kinship verification, embedding
similarity and per-region heritability.

Please import symbols of modules you require.
'''
