"""Furniture layout synthesis workbench."""

__version__ = "0.1.0"
