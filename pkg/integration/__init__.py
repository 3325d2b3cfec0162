"""
Integration layer for halfspace-kernels.

This module provides the command-line driver that wires configuration,
persistence and the numeric core together.
"""

from integration.cli import build_parser, main

__all__ = [
    "build_parser",
    "main",
]
