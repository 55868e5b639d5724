"""Structure-adaptive sequential testing for online FDR control."""

__version__ = "0.1.0"
