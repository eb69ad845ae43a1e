"""Numerical lab for sum-GDoF of the MISO broadcast channel with partial CSIT."""

from .core import (
    BoundedDensitySpec,
    CapExceededError,
    ChannelRealization,
    ChannelSpec2,
    GdofBreakdown,
    GdofLabError,
    SymmetricSpecK,
    ValidationError,
    classify_regime,
    draw_channel,
    effective_csit,
    load_instance,
    sum_gdof_k_symmetric,
    sum_gdof_two_user,
    sum_gdof_two_user_equivalent,
)
from .budget import (
    BudgetAllocation,
    BudgetCurve,
    budget_curve,
    different_preference_gdof,
    optimize_allocation,
)
from .scheme import (
    SchemeLayout,
    SimResult,
    build_layout,
    build_layout_k,
    estimate_gdof_slope,
    normalize_instance,
    plan,
    simulate,
)
from .ais import (
    DeterministicInstance,
    CodewordPair,
    ImageSetStats,
    alignment_probability_mc,
    deterministic_outputs,
    expected_size_curve,
    image_set_sizes,
    interval_condition_check,
)

__version__ = "0.1.0"
