"""Exception types raised by the numerical routines."""


class FermistabError(Exception):
    """Base class for all package errors."""


class DomainError(FermistabError, ValueError):
    """An argument lies outside the domain where a formula is defined."""


class SingularPoint(DomainError):
    """A kernel weight or denominator vanishes at the requested point."""


class SingularNode(SingularPoint):
    """A discretization node hits a kernel singularity."""


class NoRoot(FermistabError, ArithmeticError):
    """A bracketing root finder found no sign change."""


class Unstable(DomainError):
    """The stability condition Lambda(m) + Lambda(1/m) < 1 is violated."""


class QuadratureFailure(FermistabError, ArithmeticError):
    """A quadrature error estimate exceeds the requested tolerance."""


class DegenerateSampler(FermistabError, ArithmeticError):
    """The importance-sampling proposal underflows or is not normalizable."""
