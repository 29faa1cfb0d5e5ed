"""homoglab: a desk-scale laboratory for periodic homogenization on strips."""

__version__ = "0.1.0"
