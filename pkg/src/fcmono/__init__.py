"""Numerical monodromy of the hypergeometric system F_C^{p,m}(a, B)."""

__version__ = "0.1.0"

from .params import Params, ToleranceProfile, generic_params, index_maps, validate_params

__all__ = ["Params", "ToleranceProfile", "generic_params", "index_maps", "validate_params", "__version__"]
