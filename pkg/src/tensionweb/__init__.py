"""Tension-only wire webs: admissibility, construction, simplification."""

__version__ = "0.1.0"
