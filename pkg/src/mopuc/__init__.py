"""Matrix orthogonal polynomials on the unit circle: Verblunsky coefficients,
Bernstein-Szego approximants, matrix entropy and the Helson-Lowdenslager distance."""

from mopuc.config import DEFAULT_TOLERANCES, Tolerances
from mopuc.errors import MopucError, NumericalError, ValidationError
from mopuc.matlin import (
    hermitian_eig,
    hs_norm,
    loewner_leq,
    matrix_exp_herm,
    matrix_log_hpd,
    matrix_sqrt_hpd,
    min_trace_over_det1,
    spectral_norm,
    trace_norm,
)
from mopuc.measure import (
    MatrixMeasure,
    MomentSequence,
    conjugate_measure,
    density_at,
    load_measure,
    measure_from_alphas,
    moments,
)
from mopuc.polynomials import (
    PolynomialEvaluation,
    VerblunskySequence,
    check_recursion,
    eval_polynomials,
    mobius_identity_check,
    transfer_matrix,
    verblunsky_from_moments,
)
from mopuc.szego import (
    MINUS_INFINITY,
    SzegoReport,
    beta_n,
    entropy_integral,
    hl_distance,
    hl_infimum_check,
    jensen_check,
    szego_report,
)

__version__ = "0.1.0"
