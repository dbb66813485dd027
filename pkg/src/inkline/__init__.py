"""Hierarchical online handwritten text-line generation.

An autoregressive in-context layout generator arranges per-character
bounding boxes; a conditional diffusion synthesizer draws each glyph in
the reference sample's calligraphy style; composition scales the
standard-size glyphs into their boxes.
"""

__version__ = "0.1.0"

from .trajectory import BoundingBox, Glyph, Layout, PenPoint, TextLine

__all__ = ["BoundingBox", "Glyph", "Layout", "PenPoint", "TextLine", "__version__"]
