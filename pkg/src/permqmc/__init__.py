"""Cubature rules and certified worst-case errors for permutation-invariant
periodic integrands: component-by-component lattice construction plus an
approximation-driven weighted cubature, with every bound cross-checkable by
independent evaluation routes."""

from .weights import (
    Enclosure,
    GeneratorSpec,
    SpectralWeight,
    eta_star,
    min_contraction_order,
    r_weight,
    r_weight_inv,
    tail_sum,
)
from .symmetry import (
    PermStructure,
    multiplicity,
    normalize_to_nabla,
    permanent,
    sym_perm_sum,
)
from .kernels import (
    KernelSpec,
    kernel_perminv,
    kernel_shift_invariant,
    kernel_univariate,
    symmetrized_mass,
)
from .lattice import (
    LatticeRule,
    WeightedCubature,
    character_average,
    dual_membership,
    is_prime,
    load_cubature,
    load_lattice,
    save_cubature,
    save_lattice,
)
from .errors import (
    BoundConstants,
    ErrorReport,
    bound_constant,
    bound_constants,
    cbc_objective,
    initial_error_sq,
    mean_sq_error,
    worst_case_error_sq,
    worst_case_error_sq_spectral,
)
from .cbc import CbcResult, cbc_construct, construct_shifted, shift_search
from .spectrum import (
    EigenSpectrum,
    RateConstants,
    c_prime,
    multivariate_spectrum,
    rate_constants,
    spectrum_tail_constants,
    univariate_eigenvalues,
)
from .approx import (
    ApproxAlgorithm,
    AssembledRule,
    SymmetricBasis,
    assemble_rule,
    build_approx_sequence,
    gaussian_average_error_sq,
)
from .integrands import (
    TestIntegrand,
    random_integrand,
    spectral_integrand,
    symmetrized_cosine_integrand,
)

__version__ = "0.1.0"
