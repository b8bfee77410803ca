"""Numerical gluing for rank-2 self-duality equations on a degenerating neck."""

__version__ = "0.1.0"
