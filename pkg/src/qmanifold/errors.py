"""Exception types raised by the numerical routines."""


class QManifoldError(Exception):
    """Base class for all package errors."""


class DegenerateGroundStateError(QManifoldError):
    """The ground state is (numerically) degenerate, so its geometry is undefined."""


class MetricDegenerateError(QManifoldError):
    """The metric determinant fell below the inversion threshold."""


class NoDegeneracyError(QManifoldError):
    """A diabolic-point search converged to a point with a finite gap."""


class SeparatrixError(QManifoldError):
    """A finite-difference stencil straddles a first-order phase boundary."""


class EigensolverError(QManifoldError):
    """The dense eigensolver failed to converge."""
