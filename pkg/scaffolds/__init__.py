"""Galois scaffolds for elementary abelian Artin-Schreier towers."""

__version__ = "0.1.0"
