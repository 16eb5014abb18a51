#!/usr/bin/env python
# -*- coding: utf-8 -*-

import codecs
import os

from setuptools import find_packages
from setuptools import setup

# read file content
def read(*parts):
    path = os.path.join(os.path.dirname(__file__), *parts)
    with codecs.open(path, encoding='utf-8') as fobj:
        return fobj.read()

# Read the version number from __init__.py
here = os.path.abspath(os.path.dirname(__file__))
version_file = os.path.join(here, 'prepinn', '__init__.py')
exec(open(version_file).read())

# setup main
# required modules
install_requires = [
    'click>=8.0.4',
    'Jinja2>=3.0.3',
    'PyYAML>=6.0',
    'jsonschema>=4.0.0',
    'numpy>=1.22',
    'scipy>=1.9',
    'torch>=2.0',
]

setup(
    name='prepinn',
    version=__version__,
    description='Preconditioned physics-informed neural networks on structured grids',
    long_description=read('README.md'),
    long_description_content_type='text/markdown',
    author='prepinn developers',
    packages=find_packages(exclude=['tests.*', 'tests']),
    include_package_data=True,
    package_data={'prepinn': ['schemas/*.yaml', 'templates/*.j2']},
    install_requires=install_requires,
    extras_require={'dev': ['pytest>=7.0', 'black>=23.3.0']},
    python_requires='>=3.8.0',
    classifiers=[
        'Development Status :: 4 - Beta',
        'Environment :: Console',
        'Intended Audience :: Science/Research',
        'Programming Language :: Python :: 3',
        'Topic :: Scientific/Engineering :: Mathematics',
    ],
    entry_points='''
        [console_scripts]
        prepinn=prepinn.commands.prepinn:prepinn
    ''',
)
