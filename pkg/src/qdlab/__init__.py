"""qdlab: a numerical laboratory for quantum diffusion in weak lattice disorder."""

__version__ = "0.1.0"

from . import errors  # noqa: F401
