"""Recursive marginal quantization of discretisation schemes, with and without jumps."""

__version__ = "0.1.0"

from .engine import QuantizedChain, chain_residuals, density_estimate, product_quantize, recursive_quantize
from .laws import QuadraticGaussianMixture, ShiftedLognormal, dirac, gaussian, gaussian_mixture
from .pricing import MertonModel, PutSpec, bs_put, merton_put_closed_form, merton_scheme, quantized_put
from .quantizer import ConvergenceError, Grid, NewtonReport, companion_weights, newton_optimize
from .schemes import Affine, SchemeSpec

__all__ = [
    "Affine", "ConvergenceError", "Grid", "MertonModel", "NewtonReport", "PutSpec",
    "QuadraticGaussianMixture", "QuantizedChain", "SchemeSpec", "ShiftedLognormal",
    "bs_put", "chain_residuals", "companion_weights", "density_estimate", "dirac", "gaussian",
    "gaussian_mixture", "merton_put_closed_form", "merton_scheme", "newton_optimize",
    "product_quantize", "quantized_put", "recursive_quantize",
]
