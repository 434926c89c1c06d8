"""Soliton-ensemble numerics for the zero-dispersion limit of the Benjamin-Ono equation."""

__version__ = "0.1.0"

from .profile import Profile, get_profile, lambda_map, lorentzian, quartic  # noqa: E402
from .ensemble import Ensemble, build_A, build_B, build_C, build_D, quantize  # noqa: E402
from .spectral import eig_A, eig_C, eig_general, eig_hermitian  # noqa: E402

__all__ = [
    "__version__",
    "Profile",
    "get_profile",
    "lambda_map",
    "lorentzian",
    "quartic",
    "Ensemble",
    "quantize",
    "build_A",
    "build_B",
    "build_C",
    "build_D",
    "eig_A",
    "eig_C",
    "eig_general",
    "eig_hermitian",
]
