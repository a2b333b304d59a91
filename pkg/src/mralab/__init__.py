"""mralab: a numerical laboratory for sparse multi-reference alignment."""

__version__ = "0.1.0"
