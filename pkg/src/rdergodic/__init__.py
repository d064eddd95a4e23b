"""Spectral Galerkin Monte Carlo and ergodicity diagnostics for dissipative
stochastic reaction-diffusion equations."""

__version__ = "0.1.0"
