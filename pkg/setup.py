#!/usr/bin/env python3
"""
Setup script for Analytic CIL
"""
from setuptools import setup, find_packages

setup(
    name="acil",
    version="0.1.0",
    description="Analytic class-incremental learning: an exactly recursive ridge classifier head with an experiment harness",
    author="ACIL Team",
    packages=find_packages(exclude=["tests", "tests.*"]),
    include_package_data=True,
    install_requires=[
        "numpy>=1.26.0",
        "scipy>=1.11.0",
        "pandas>=2.2.0",
        "scikit-learn>=1.4.0",
        "PyYAML>=6.0",
        "flask>=2.3.3",
        "gunicorn>=21.2.0",
    ],
    entry_points={
        "console_scripts": [
            "acil=src.experiment.cli:main",
        ],
    },
    python_requires=">=3.9",
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
    ],
)
