"""Optimal AF relay precoding and maximum eigenmode relaying (MER) criteria."""

from .channel import (
    ChannelDraw,
    EigenPowerAllocation,
    RelayCorrelation,
    RelayPrecoder,
    SystemConfig,
    build_constant_correlation,
    eigendecompose,
    sample_channel,
)
from .criteria import (
    MerReport,
    derivative_at_zero,
    jensen_condition,
    large_ns_condition,
    mer_allocation,
    mer_exact_condition,
)
from .montecarlo import McEstimate, estimate_ergodic_capacity
from .allocation import OptimizationResult, optimize_allocation

__version__ = "0.1.0"
