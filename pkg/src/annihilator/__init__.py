"""Smooth phases that make finitely many integrals vanish at once."""
