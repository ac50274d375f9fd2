"""Schreier families, combinatorial norms and spreading-model constants."""
__version__ = "0.1.0"
