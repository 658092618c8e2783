#!/usr/bin/env python3
"""
Setup script for the benchgen package.

This setup.py is provided for backward compatibility with older pip versions.
The main package configuration is in pyproject.toml.
"""

from setuptools import setup, find_packages
import os

# Read the contents of README file
this_directory = os.path.abspath(os.path.dirname(__file__))
with open(os.path.join(this_directory, 'README.md'), encoding='utf-8') as f:
    long_description = f.read()

setup(
    name="benchgen",
    version="0.1.0",
    author="benchgen developers",
    description="Generate tabletop manipulation scenes and tasks with LLMs and analyze policy rollouts",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(include=["benchgen", "benchgen.*"]),
    package_data={
        "benchgen.data": ["*.json"],
        "benchgen.templates": ["*.txt"],
    },
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
    ],
    python_requires=">=3.9",
    install_requires=[
        "openai>=1.75.0",
        "python-dotenv",
        "numpy>=1.22",
        "scipy>=1.8",
        "pydantic>=2.0",
        "tenacity>=8.0",
    ],
    extras_require={
        "dev": ["pytest>=7.0", "black", "flake8", "mypy", "twine", "build"],
        "test": ["pytest>=7.0", "pytest-cov"],
    },
    entry_points={
        "console_scripts": ["benchgen=benchgen.cli:main"],
    },
    keywords="robotics benchmark manipulation llm scene-generation evaluation",
)
