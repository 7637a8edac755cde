"""Almost-sure spectrum of period-2 Anderson-Bernoulli Schrodinger operators."""

from .bandmodel import (
    CanonicalParams,
    ModelParams,
    OrderingCase,
    SpectrumResult,
    canonicalize,
    gap_intervals,
    ordering_case,
    quad_products,
    spectrum,
    uh_at_energy,
)
from .certify import (
    CertReport,
    MatrixFamily,
    Verdict,
    certify_family,
    min_growth_rate,
    principal_cone,
    product_family,
    scan_energies,
)
from .errors import AndersonBandError, BudgetError, InvalidArgumentError
from .mat2 import Mat2, eigen_directions, eigvec_partials, signed_spectral_radius, transfer_matrix
from .oracle import finite_volume_eigenvalues, lyapunov_estimate, sample_potential
from .projline import Arc, Cone, ProjPoint

__version__ = "0.1.0"
