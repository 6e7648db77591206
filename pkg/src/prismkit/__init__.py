"""Exact computations with truncated prisms, Breuil-Kisin modules, displays and their descent."""

__version__ = "0.1.0"
