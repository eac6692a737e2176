#!/usr/bin/env python
#
# setup for the isingnet library package
#
# use the following to install:
#   python setup.py install
#

import os
import re

from setuptools import setup


def get_version():
    """
    Read the version constants from isingnet/__init__.py.
    """
    with open(os.path.join('isingnet', '__init__.py')) as infile:
        text = infile.read()
    parts = [re.search(r'^PROGRAM_VERSION_%s = (\d+)' % name, text,
                       re.M).group(1)
             for name in ('MAJOR', 'MINOR', 'RELEASE')]
    if parts[2] == '0':
        parts = parts[:2]
    return '.'.join(parts)


def get_files(path, ext=''):
    """
    Get all files in a directory with a extension.
    """
    files = []
    for filename in sorted(os.listdir(path)):
        if filename.endswith(ext):
            files.append(os.path.join(path, filename))
    return files


VERSION = get_version()
scripts = get_files('bin')


setup(
    name='isingnet',
    version=VERSION,
    description='Physics-guided neural networks for Ising ground states',
    long_description="""
        Trains feed-forward networks to predict the ground-state eigenpair
        of transverse-field Ising Hamiltonians with adaptively weighted
        characteristic and spectrum losses.
        """,
    packages=[
        'isingnet',
        'isingnet.deps',
        'isingnet.deps.rasmus',
    ],
    scripts=scripts,
    install_requires=[
        'numpy>=1.17',
    ],
)
