"""Vanishing-viscosity limit of a degenerate reaction-diffusion equation towards a one-phase Stefan problem."""

__version__ = "0.1.0"
