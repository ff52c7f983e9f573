"""hymglue: numerical laboratory for glued Hermitian Yang-Mills connections."""

__version__ = "0.1.0"

from .kernels import BACKEND as kernel_backend  # noqa: F401
