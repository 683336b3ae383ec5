#!/usr/bin/python

import re
from setuptools import setup

def loadVersion():
    version_regexp = re.compile(r'__version__\s*=\s*(\(.*?\))', re.M)
    version_file = open('kinsynth/version.py', 'rb').read().decode('utf-8')
    version_match = version_regexp.search(version_file)
    return eval(version_match.group(1))

version = loadVersion()
version_number = '.'.join([str(x) for x in version])

setup(
    name         = "kinsynth",
    version      = version_number,
    description  = "Child face synthesis from parent faces with a conditional adversarial autoencoder and a gene mapping network",
    long_description = open('README.md', 'r').read(),
    long_description_content_type = "text/markdown",
    license      = "LGPL",
    platforms    = ["Platform Independent"],
    classifiers  = [
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: GNU Library or Lesser General Public License (LGPL)",
        "Operating System :: POSIX",
        "Programming Language :: Python :: 3",
        "Topic :: Scientific/Engineering :: Image Processing",
    ],
    python_requires = ">=3.8",
    packages = [
        "kinsynth",
    ],
    install_requires = [
        "numpy>=1.20",
        "Pillow>=9.1",
    ],
    extras_require = {
        "tests": ["hypothesis>=6.0"],
    },
    entry_points = {
        "console_scripts": ["kinsynth=kinsynth.cli:main"],
    },
)
