"""Spectra, integrated density of states and gap labels of decorated Z-graphs."""
from __future__ import annotations

__version__ = "0.1.0"
