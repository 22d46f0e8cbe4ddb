"""Python bindings for the lesanet library."""

from ._lesanet import *  # noqa: F401,F403
from ._lesanet import __doc__  # noqa: F401

__version__ = "0.1.0"
