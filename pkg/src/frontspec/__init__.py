"""frontspec: travelling-front solutions of 2D reaction-diffusion systems
and their Evans-function spectral stability."""

__version__ = "0.1.0"

from .model import ModelSpec, cubic_autocatalysis
from .numkit import ToleranceSpec

__all__ = ["ModelSpec", "cubic_autocatalysis", "ToleranceSpec", "__version__"]
