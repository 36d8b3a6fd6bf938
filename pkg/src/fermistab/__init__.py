"""Numerical bounds and checks for the stability of 2+2 fermion systems with point interactions."""
from .bounds import (
    BoundKind,
    BoundValue,
    MassWindow,
    WindowBound,
    lambda_bar,
    lambda_schur_kappa,
    lambda_sum,
    lambda_upper,
    mass_window,
    stability_margin,
    sweep,
)
from .errors import (
    DegenerateSampler,
    DomainError,
    FermistabError,
    NoRoot,
    QuadratureFailure,
    SingularNode,
    SingularPoint,
    Unstable,
)
from .kernels import KernelParams
from .quadform_mc import GaussianTrial, MCEstimate
from .spectral import RadialGrid, RadialTrial, SpectralResult, lambda_lower_spectral, rayleigh_probe

__version__ = "0.1.0"
