"""Optimality tests for maximum eigenmode relaying (MER).

MER puts all relay gain on the strongest eigenmode of the relay correlation.
It is optimal when moving a small gain ``p`` from that mode onto the second
one does not increase ergodic capacity, i.e. ``dC/dp <= 0`` at ``p = 0``
with the total gain ``P`` held fixed. Notation used throughout:

``a1, a2``
    Squared eigenvalues ``(lambda_1^Sigma)^2`` and ``(lambda_2^Sigma)^2``.
``c = P a1``
    Gain of the dominant mode after the correlation.
``A(t) = 1 / (c (1 + gamma t))``
    Reciprocal effective SNR given ``Y = t``.
``K = e^{1/c} Gamma(0, 1/c)``
    Scaled incomplete gamma at ``1/c``; ``K / c = E[1 / (1 + c X)]``.
"""

import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from .channel import EigenPowerAllocation, RelayCorrelation, SystemConfig, build_constant_correlation
from .specfun import erlang_pdf, exp_integral_en_scaled, gamma_zero_scaled, integrate_semi_infinite

__all__ = [
    "QUAD_ABS_TOL",
    "QUAD_REL_TOL",
    "MerReport",
    "JensenResult",
    "LargeNsResult",
    "mer_allocation",
    "expectation_inv_z",
    "expectation_gy_over_z",
    "derivative_at_zero",
    "saturated_derivative_at_zero",
    "mer_exact_condition",
    "second_derivative_integrand",
    "jensen_inner_expectation",
    "jensen_condition",
    "large_ns_condition",
    "find_boundary_db",
    "boundary_db",
]

QUAD_ABS_TOL = 1e-10
QUAD_REL_TOL = 1e-8


def mer_allocation(config: SystemConfig, corr: RelayCorrelation) -> EigenPowerAllocation:
    """All gain on the strongest mode, saturating the relay power budget."""
    lam1 = corr.eigvals[0]
    if not lam1 > 0:
        raise ValueError("strongest correlation eigenvalue must be positive")
    gains = np.zeros(corr.n_r)
    gains[0] = config.p_r / (config.n0 + lam1 * config.p_s)
    return EigenPowerAllocation(gains)


def _check_args(total, l1sq, gamma):
    if not total > 0 or not l1sq > 0:
        raise ValueError("total gain and lambda_1^2 must be positive")
    if not gamma >= 0:
        raise ValueError("gamma must be nonnegative")


def _erlang_expectation(g: Callable, n_s: int) -> float:
    res = integrate_semi_infinite(lambda t: g(t) * erlang_pdf(n_s, t),
                                  abs_tol=QUAD_ABS_TOL, rel_tol=QUAD_REL_TOL)
    return res.value


def expectation_inv_z(total: float, l1sq: float, gamma: float, n_s: int) -> float:
    """``E[1/Z]`` with ``Z = 1 + P a1 (1 + gamma Y) X_1``.

    Conditioned on ``Y = t`` the inner expectation over ``X_1`` is
    ``A e^A Gamma(0, A)``; the outer one integrates it against the
    density of ``Y``.
    """
    _check_args(total, l1sq, gamma)
    c = total * l1sq
    if gamma == 0:
        a = 1.0 / c
        return float(a * gamma_zero_scaled(a))

    def g(t):
        a = 1.0 / (c * (1.0 + gamma * t))
        return a * gamma_zero_scaled(a)

    return _erlang_expectation(g, n_s)


def expectation_gy_over_z(total: float, l1sq: float, gamma: float, n_s: int) -> float:
    """``E[(1 + gamma Y) / Z]``, i.e. ``(1/c) E[e^A Gamma(0, A)]``."""
    _check_args(total, l1sq, gamma)
    c = total * l1sq
    if gamma == 0:
        a = 1.0 / c
        return float(a * gamma_zero_scaled(a))

    def g(t):
        return gamma_zero_scaled(1.0 / (c * (1.0 + gamma * t)))

    return _erlang_expectation(g, n_s) / c


def _squares(corr: RelayCorrelation):
    lam = corr.eigvals
    l1sq = float(lam[0] ** 2)
    l2sq = float(lam[1] ** 2) if lam.size > 1 else 0.0
    return l1sq, l2sq


def _mer_total(config, corr, total):
    return mer_allocation(config, corr).total if total is None else float(total)


def _derivative_parts(config, corr, total):
    # Partial derivatives of E[C] w.r.t. the gains of modes 1 and 2 at MER.
    l1sq, l2sq = _squares(corr)
    c = total * l1sq
    k = float(gamma_zero_scaled(1.0 / c))
    e_inv = expectation_inv_z(total, l1sq, config.gamma, config.n_s)
    e_gy = expectation_gy_over_z(total, l1sq, config.gamma, config.n_s)
    d_mode1 = (k / c - e_inv) / total
    d_mode2 = l2sq * (e_gy - k / c)
    return d_mode1, d_mode2, e_inv, e_gy, k


def derivative_at_zero(config: SystemConfig, corr: RelayCorrelation,
                       total: Optional[float] = None) -> float:
    """``dE[C]/dp`` at ``p = 0`` with fixed total gain (nats, no 1/2 factor).

    ``a2 E[(1+gY)/Z] + E[1/Z]/P - K (1 + P a2) / (P^2 a1)``; negative or
    zero means MER is optimal. ``total`` defaults to the MER gain.
    """
    total = _mer_total(config, corr, total)
    l1sq, l2sq = _squares(corr)
    _, _, e_inv, e_gy, k = _derivative_parts(config, corr, total)
    return l2sq * e_gy + e_inv / total - k * (1.0 + total * l2sq) / (total ** 2 * l1sq)


def saturated_derivative_at_zero(config: SystemConfig, corr: RelayCorrelation) -> float:
    """Slope of ``E[C]`` when gain is moved to mode 2 along the power budget.

    Unlike :func:`derivative_at_zero`, the relay power stays at ``P_R``:
    removing gain ``dp`` from mode 1 frees enough power for
    ``dp (N0 + P_S lam1) / (N0 + P_S lam2)`` on mode 2, which is more than
    ``dp`` whenever ``lam2 < lam1``.
    """
    lam = corr.eigvals
    total = _mer_total(config, corr, None)
    d1, d2, *_ = _derivative_parts(config, corr, total)
    ratio = (config.n0 + config.p_s * lam[0]) / (config.n0 + config.p_s * lam[1])
    return ratio * d2 - d1


def second_derivative_integrand(x1, x2, y, p, total, config: SystemConfig,
                                corr: RelayCorrelation):
    """Per-draw ``d^2 C / dp^2`` at split ``(total - p, p)``; never positive.

    With ``u = (P - p) a1 X1 + p a2 X2`` and ``delta = a2 X2 - a1 X1``::

        -delta^2 gamma Y (2 + gamma Y + 2 u (1 + gamma Y))
            / ((1 + u)^2 (1 + u (1 + gamma Y))^2)
    """
    l1sq, l2sq = _squares(corr)
    x1, x2, y = (np.asarray(v, dtype=float) for v in (x1, x2, y))
    g = config.gamma
    u = (total - p) * l1sq * x1 + p * l2sq * x2
    delta = l2sq * x2 - l1sq * x1
    gy = g * y
    num = delta ** 2 * gy * (2.0 + gy + 2.0 * u * (1.0 + gy))
    return -num / ((1.0 + u) ** 2 * (1.0 + u * (1.0 + gy)) ** 2)


def jensen_inner_expectation(total: float, l1sq: float, l2sq: float, gamma: float,
                             n_s: int) -> float:
    """Closed form of ``E[(1 + c (1 + gY) X1) / (a2 (1 + gY) + 1/P)]``.

    ``P (a2 (1 + P a1) + n_s (a1 - a2) e^D E_{n_s+1}(D)) / (a2 (1 + P a2))``
    with ``D = n_s (1 + P a2) / (gamma P a2)``.
    """
    if not l2sq > 0:
        raise ValueError("needs a positive second eigenvalue")
    d = math.inf if gamma == 0 else n_s * (1.0 + total * l2sq) / (gamma * total * l2sq)
    e = float(exp_integral_en_scaled(n_s + 1, d))
    return total * (l2sq * (1.0 + total * l1sq) + n_s * (l1sq - l2sq) * e) / (
        l2sq * (1.0 + total * l2sq))


@dataclass(frozen=True)
class JensenResult:
    certifies: bool
    lhs: float
    rhs: float
    d: float
    note: str = ""


def jensen_condition(config: SystemConfig, corr: RelayCorrelation,
                     total: Optional[float] = None) -> JensenResult:
    """Closed-form test obtained by replacing the expectation in the
    derivative with ``1 / E[1/f]`` (Jensen).

    ``certifies`` is ``lhs < rhs``. Note that Jensen bounds the expectation
    from below, so this is implied by ``dC/dp <= 0`` rather than implying it.
    """
    total = _mer_total(config, corr, total)
    l1sq, l2sq = _squares(corr)
    c = total * l1sq
    rhs = float(gamma_zero_scaled(1.0 / c)) * (1.0 + total * l2sq)
    if l2sq == 0:
        return JensenResult(True, 0.0, rhs, math.inf, note="second eigenvalue is zero")
    inner = jensen_inner_expectation(total, l1sq, l2sq, config.gamma, config.n_s)
    lhs = total ** 2 * l1sq / inner
    d = math.inf if config.gamma == 0 else (
        config.n_s * (1.0 + total * l2sq) / (config.gamma * total * l2sq))
    return JensenResult(lhs < rhs, lhs, rhs, d)


@dataclass(frozen=True)
class LargeNsResult:
    optimal: bool
    threshold: float
    a1: float
    degenerate: bool = False


def large_ns_condition(config: SystemConfig, corr: RelayCorrelation,
                       total: Optional[float] = None) -> LargeNsResult:
    """Closed-form criterion with ``Y`` replaced by its mean 1.

    ``A_1 = 1 / (P a1 (1 + gamma))`` and ``E[1/Z] = A_1 e^{A_1} Gamma(0, A_1)``.
    When the threshold's denominator is not positive the decision falls back
    to the sign of the derivative with the same substitution.
    """
    total = _mer_total(config, corr, total)
    l1sq, l2sq = _squares(corr)
    c = total * l1sq
    a1 = 1.0 / (c * (1.0 + config.gamma))
    k = float(gamma_zero_scaled(1.0 / c))
    k1 = float(gamma_zero_scaled(a1))
    num = k - c * a1 * k1
    den = total * k1 - total * k
    if config.gamma == 0:
        # Numerator and denominator vanish together; the slope is exactly 0.
        return LargeNsResult(l2sq == 0, 0.0, a1, degenerate=True)
    if den > 0:
        threshold = num / den
        return LargeNsResult(l2sq <= threshold, threshold, a1)
    margin = l2sq * k1 / c + a1 * k1 / total - k * (1.0 + total * l2sq) / (total ** 2 * l1sq)
    return LargeNsResult(margin <= 0, math.nan, a1, degenerate=True)


@dataclass(frozen=True)
class MerReport:
    """Everything the three criteria compute for one operating point."""

    total_gain: float
    margin_exact: float
    threshold_exact: float
    lambda2_sq: float
    mer_optimal: bool
    degenerate: bool
    jensen_certifies: bool
    jensen_lhs: float
    jensen_rhs: float
    large_ns_threshold: float
    large_ns_optimal: bool
    a1: float
    d: float
    e_inv_z: float
    e_gy_over_z: float

    def to_dict(self) -> dict:
        return asdict(self)


def mer_exact_condition(config: SystemConfig, corr: RelayCorrelation) -> MerReport:
    """Evaluate the exact criterion (by quadrature) and both closed forms.

    The exact decision is ``lambda_2^2 <= threshold``; if the threshold's
    denominator ``P^2 a1 E[(1+gY)/Z] - P K`` is not positive the point is
    flagged ``degenerate`` and decided by the derivative sign instead.
    """
    total = mer_allocation(config, corr).total
    l1sq, l2sq = _squares(corr)
    _, _, e_inv, e_gy, k = _derivative_parts(config, corr, total)
    margin = l2sq * e_gy + e_inv / total - k * (1.0 + total * l2sq) / (total ** 2 * l1sq)
    num = k - total * l1sq * e_inv
    den = total ** 2 * l1sq * e_gy - total * k
    if config.gamma > 0 and den > 0:
        threshold = num / den
        optimal = l2sq <= threshold
        degenerate = False
    else:
        threshold = 0.0 if config.gamma == 0 else math.nan
        optimal = l2sq == 0 if config.gamma == 0 else margin <= 0
        degenerate = True
    jensen = jensen_condition(config, corr, total)
    large = large_ns_condition(config, corr, total)
    return MerReport(
        total_gain=total,
        margin_exact=margin,
        threshold_exact=threshold,
        lambda2_sq=l2sq,
        mer_optimal=bool(optimal),
        degenerate=degenerate,
        jensen_certifies=bool(jensen.certifies),
        jensen_lhs=jensen.lhs,
        jensen_rhs=jensen.rhs,
        large_ns_threshold=large.threshold,
        large_ns_optimal=bool(large.optimal),
        a1=large.a1,
        d=jensen.d,
        e_inv_z=e_inv,
        e_gy_over_z=e_gy,
    )


def find_boundary_db(is_optimal: Callable[[float], bool], lo_db: float = -30.0,
                     hi_db: float = 60.0, tol_db: float = 0.01) -> float:
    """Bisect for the relay power (dB) where ``is_optimal`` flips to False.

    Returns ``inf`` if MER is optimal over the whole bracket and ``-inf`` if
    it is optimal nowhere in it.
    """
    if is_optimal(hi_db):
        return math.inf
    if not is_optimal(lo_db):
        return -math.inf
    while hi_db - lo_db > tol_db:
        mid = 0.5 * (lo_db + hi_db)
        if is_optimal(mid):
            lo_db = mid
        else:
            hi_db = mid
    return 0.5 * (lo_db + hi_db)


def boundary_db(p_s_db: float, rho: float, n_s: int, n_r: int = 2, criterion: str = "exact",
                n0: float = 1.0, lo_db: float = -30.0, hi_db: float = 60.0,
                tol_db: float = 0.01) -> float:
    """MER region boundary in relay power for a constant-correlation relay.

    ``criterion`` is one of ``"exact"``, ``"large_ns"``, ``"jensen"`` or
    ``"saturated"`` (the budget-preserving slope).
    """
    corr = build_constant_correlation(rho, n_r)

    def cfg(p_r_db):
        return SystemConfig.from_db(p_s_db, p_r_db, n_s=n_s, n_r=n_r, n0=n0)

    deciders = {
        "exact": lambda x: derivative_at_zero(cfg(x), corr) <= 0,
        "large_ns": lambda x: large_ns_condition(cfg(x), corr).optimal,
        "jensen": lambda x: jensen_condition(cfg(x), corr).certifies,
        "saturated": lambda x: saturated_derivative_at_zero(cfg(x), corr) <= 0,
    }
    if criterion not in deciders:
        raise ValueError(f"unknown criterion {criterion!r}")
    return find_boundary_db(deciders[criterion], lo_db, hi_db, tol_db)
