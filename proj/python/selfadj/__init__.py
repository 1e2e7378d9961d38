"""Self-adjoint realizations of ordinary differential expressions."""

from ._selfadj import *  # noqa: F401,F403
from ._selfadj import __doc__  # noqa: F401

__version__ = "0.1.0"
