"""Spectral stability laboratory for Gaussian-bump perturbations of Couette flow."""

from .params import ModelParams, Regime, ShearProfile, ProfileKind

__all__ = ["ModelParams", "Regime", "ShearProfile", "ProfileKind"]
__version__ = "0.1.0"
