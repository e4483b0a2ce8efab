"""Joint MRF modelling of replicated ChIP-seq count data."""

__version__ = "0.1.0"
