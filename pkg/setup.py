#!/usr/bin/env python
"""
setup.py file for VibForge package
"""

from setuptools import setup, find_packages
import os

SKIPPED_DIRS = {"__pycache__", ".ipynb_checkpoints"}


def scripts_in(dirname):
    """Executable scripts under ``dirname``, skipping caches and compiled files."""
    scripts = []
    for root, dirs, files in os.walk(dirname):
        dirs[:] = [d for d in dirs if d not in SKIPPED_DIRS]
        scripts.extend(os.path.join(root, fname) for fname in files if not fname.endswith(".pyc"))
    return sorted(scripts)


setup(
    scripts=scripts_in("bin"),
    packages=find_packages(exclude=["tests"]),
)
