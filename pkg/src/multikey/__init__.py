"""Rényi output statistics of universal2 hashing and multi-terminal key agreement."""

from __future__ import annotations

__version__ = "0.1.0"
