"""Optimal and minimax-robust linear filtering of stationary sequences in noise."""

from .errors import (
    ConsistencyError,
    ConvergenceError,
    FactorizationDomainError,
    FactorizationError,
    IllConditionedWarning,
    MinimalityError,
    RobustFilterError,
    ValidationError,
)
from .spectral import (
    FourierSeries,
    SpectralDensity,
    evaluate_density,
    fourier_coefficients,
    minimality_check,
)
from .factorization import FactorCoeffs, factor_product, spectral_factorize, triangular_operator
from .operators import OperatorMatrix, SpectralPair, build_operator, invert_P, solve_coefficients
from .filtering import (
    FilterSolution,
    FunctionalSpec,
    estimate_point,
    mse,
    smoothing,
    solve_filter,
    solve_filter_factorized,
    solve_filter_finite,
    time_weights,
)
from .minimax import (
    BandContamination,
    JointMinimal,
    MinimaxSolution,
    PowerPair,
    SaddleReport,
    solve_minimax,
    verify_saddle_point,
)
from .oracle import empirical_mse, grid_maximize_delta, simulate_ma, toeplitz_projection

__version__ = "0.1.0"
