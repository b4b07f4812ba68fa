#!/usr/bin/env python3
# -*- coding: utf-8 -*-

from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="nvpf-fusion",
    version="0.1.0",
    description="Group emotion recognition by non-volume preserving feature fusion",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(include=["src", "src.*"]),
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
    ],
    python_requires=">=3.8",
    install_requires=[
        "numpy>=1.20",
        "pyyaml>=5.1",
        "argparse>=1.4.0",
    ],
    extras_require={
        "dev": [
            "pytest>=6.0.0",
            "pytest-cov>=2.10.0",
            "hypothesis>=6.0",
            "scikit-learn>=1.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "nvpf=src.cli:main",
        ],
    },
    include_package_data=True,
    package_data={
        "": ["config/*.yaml", "config/presets/*.yaml"],
    },
)
