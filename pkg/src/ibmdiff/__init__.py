"""Sharp-interface ghost-cell closures for 2-D finite-difference diffusion."""

__version__ = "0.1.0"
