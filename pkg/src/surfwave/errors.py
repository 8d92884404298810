"""Exception and warning types raised across the package."""


class SurfwaveError(Exception):
    """Base class for all package errors."""


class ParseError(SurfwaveError):
    """Model file is not valid JSON or does not follow the model schema."""


class ValidationError(SurfwaveError):
    """Model violates a physical or structural invariant.

    Attributes
    ----------
    kind : str
        One of ``'convexity'``, ``'symmetry'``, ``'tail'``, ``'knots'``.
    where : str
        Human-readable location (profile name, knot index, field).
    """

    def __init__(self, kind, where, message=""):
        self.kind = kind
        self.where = where
        super().__init__(f"{kind} violation at {where}" + (f": {message}" if message else ""))


class OutOfDomain(SurfwaveError):
    """Surface point lies outside the lateral grid hull."""


class ConvergenceError(SurfwaveError):
    """An iterative procedure failed to bracket or converge."""


class SymmetryMismatch(SurfwaveError):
    """Model symmetry does not admit the requested decoupling."""


class DegenerateRoots(SurfwaveError):
    """Lower-half-plane sextic roots are not separated from the real axis."""


class SylvesterSingular(SurfwaveError):
    """Sylvester operator is numerically singular."""


class ExtrapolationUnstable(SurfwaveError):
    """Successive extrapolants to the limiting velocity disagree."""


class NoRoot(SurfwaveError):
    """No subsonic zero of the impedance determinant exists."""


class BranchLost(SurfwaveError):
    """Branch continuation failed: modal overlap dropped below threshold."""


class BranchAbsent(SurfwaveError):
    """Requested branch has no subthreshold eigenvalue anywhere in the box."""


class StepRejected(SurfwaveError):
    """Ray integrator step size fell below the controller floor."""


class CausticEncountered(SurfwaveError):
    """Ray-tube Jacobian changed sign."""


class UsageError(SurfwaveError):
    """Bad command-line usage."""


class TruncationWarning(UserWarning):
    """Some modes carry noticeable mass near the truncation wall."""
