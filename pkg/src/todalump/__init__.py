"""Traveling lump of the 2+1 Toda lattice and a numerical check of its nondegeneracy."""
__version__ = "0.1.0"
