"""Exception types raised by qdlab operations."""


class QdlabError(Exception):
    """Base class for all qdlab errors."""


class EmptyShell(QdlabError):
    """Energy shell carries no density of states above tolerance."""


class ToleranceExceeded(QdlabError):
    """A conserved quantity drifted beyond the configured tolerance."""


class QuadratureDivergence(QdlabError):
    """Refining a quadrature failed to reduce the reconstruction error."""


class GridMismatch(QdlabError):
    """Operands live on incompatible grids."""


class CFLViolation(QdlabError):
    """Transport step exceeds the stability bound of the scheme."""


class ExtrapolationUnstable(QdlabError):
    """Regulator extrapolation did not settle within tolerance."""


class BoundViolated(QdlabError):
    """A bound that must hold with a positive constant failed to."""


class InsufficientSamples(QdlabError):
    """A Monte Carlo estimate was requested with too few samples."""


class ConfigInvalid(QdlabError):
    """Experiment configuration failed schema validation."""


class ResourceExceeded(QdlabError):
    """Requested problem size exceeds the configured memory budget."""
