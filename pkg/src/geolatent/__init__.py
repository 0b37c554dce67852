"""Generative modeling of categorical data in GPCA latent subspaces."""
__version__ = "0.1.0"
