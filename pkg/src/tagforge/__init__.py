"""tagforge: sequence-labeling toolkit with CRF and from-scratch neural taggers."""

__version__ = "0.1.0"
