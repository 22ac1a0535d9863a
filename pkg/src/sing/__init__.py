"""Non-Gaussian component analysis for one dataset and joint/individual
component analysis for two datasets measured on the same subjects."""

from .errors import (
    AlignmentError,
    ConvergenceWarning,
    DegenerateInputError,
    DomainError,
    InsufficientPermutationsError,
    InsufficientSubjectsError,
    InvalidInputError,
    InvalidRankError,
    MissingRankError,
    NumericError,
    SingError,
)
from .lngca import Decomposition, estimate_mixing_ols, estimate_rank, lngca
from .matcher import (
    JointRankTest,
    MatchResult,
    average_joint_scores,
    chordal_distance_matrix,
    greedy_match,
    perm_test_joint_rank,
    pmse,
)
from .nongauss import jb_gradient, jb_statistic, jb_total, sign_normalize, skewness
from .pipeline import SingConfig, SingResult, StageInit, sing_decompose
from .preprocess import Whitener, double_center, matrix_power, standardize_iterative, whiten
from .simgen import ToySpec, generate_toy, net_to_vec, vec_to_net
from .solver import (
    JointProblem,
    JointSolution,
    chordal_distance,
    curvilinear_solve,
    joint_gradient,
    joint_objective,
    select_rho,
)

__version__ = "0.1.0"
