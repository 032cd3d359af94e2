#!/usr/bin/env python

from setuptools import setup


def get_long_description():
    with open('README.md') as f:
        return f.read()


setup(
    name="Coolcheck",
    python_requires=">=3.7",
    version="0.1.0",
    license="MIT",
    description="Format checks and up-to bisimulation proofs for GSOS languages.",
    long_description=get_long_description(),
    long_description_content_type='text/markdown',
    packages=['coolcheck'],
    platforms='any',
    install_requires=[
        'itsdangerous',
        'lark',
        'starlette',
        'WTForms'
    ],
    extras_require={
        'test': [
            'pytest',
        ]
    },
    entry_points={
        'console_scripts': [
            'coolcheck=coolcheck.cli:main',
        ]
    },
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Environment :: Console",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Topic :: Scientific/Engineering",
        "Programming Language :: Python :: 3",
    ],
    zip_safe=False
    )
