"""Symplectic surface-map laboratory."""
