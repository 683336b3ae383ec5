#!/usr/bin/python
# -*- coding: ascii -*-
'''
Kin face synthesis from parent faces.
'''

__version__ = (0,1,0)
