"""Word-length statistics of random walks on free products of groups.

Exact free-product arithmetic, pattern-avoidance analysis, exact and
Monte-Carlo length distributions, rate-function estimation with conjugate
numerics, and cone-type automata.
"""

__version__ = "0.1.0"

from .errors import (
    FreewalkError,
    MalformedInputError,
    PreconditionError,
    ResourceLimitError,
    UnsupportedContextError,
)
from .words import (
    FiniteCyclicFactor,
    FiniteTableFactor,
    GroupContext,
    IntegerFactor,
    ReducedWord,
    ball_enumerate,
    ends_with,
    growth_estimate,
    inverse,
    length,
    multiply,
    normalize,
    starts_with,
    theta,
    type_size,
)
from .patterns import (
    ExtractionResult,
    PatternVerdict,
    WeightedSet,
    extract_weakly_additive,
    is_pattern_avoiding,
    minimal_avoiding_subset,
    semigroup_pattern_probe,
    verify_weak_additivity,
)
from .walks import (
    DrivingMeasure,
    LengthDistribution,
    TrajectoryStats,
    estimate_escape_rate,
    estimate_spectral_radius,
    exact_length_dist_bruteforce,
    monte_carlo_length_dist,
    return_probability,
    sample_trajectory,
    srw_birth_death_dist,
    srw_tree_dist,
    uniform_srw_measure,
)
from .rates import (
    MgfBracket,
    RateCurve,
    closed_form_rate_srw_free,
    consistency_report,
    empirical_rate_curve,
    fenchel_legendre,
    log_mgf_bracket,
)
from .automata import (
    ConeAutomaton,
    ConeSignature,
    FreeProductGeometry,
    LatticeGeometry,
    build_automaton,
    condition_two_check,
    cone_profile,
    sphere_sizes,
    strongly_connected_components,
)
