"""Monte Carlo estimators backing the analytic claims.

Samples are produced in fixed-size chunks, chunk ``k`` drawn from stream
``k`` of the seed, and reduced with mergeable Welford accumulators. The
chunking is deterministic, so a seed pins the estimate bit for bit and two
estimators given the same seed see the same channels (common random numbers).
"""

from dataclasses import dataclass
from typing import Iterable, List, Optional, Union

import numpy as np
from scipy import stats

from .channel import (
    ChannelDraw,
    EigenPowerAllocation,
    RelayCorrelation,
    SystemConfig,
    instantaneous_capacity_eigen,
    instantaneous_capacity_matrix,
    instantaneous_capacity_scalar,
    sample_channel,
)

__all__ = [
    "McEstimate",
    "RunningStats",
    "YMomentReport",
    "CHUNK",
    "draw_chunks",
    "estimate_ergodic_capacity",
    "estimate_ergodic_capacity_scalar",
    "check_rotation_invariance",
    "finite_difference_derivative",
    "check_y_distribution",
]

CHUNK = 1 << 16


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_samples: int


class RunningStats:
    """Streaming mean/variance via Welford updates and Chan's pairwise merge."""

    def __init__(self):
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0

    def update(self, values) -> "RunningStats":
        values = np.asarray(values, dtype=float).ravel()
        if values.size:
            other = RunningStats()
            other.count = values.size
            other.mean = float(values.mean())
            other.m2 = float(np.sum((values - other.mean) ** 2))
            self.merge(other)
        return self

    def merge(self, other: "RunningStats") -> "RunningStats":
        if other.count == 0:
            return self
        if self.count == 0:
            self.count, self.mean, self.m2 = other.count, other.mean, other.m2
            return self
        n = self.count + other.count
        delta = other.mean - self.mean
        self.mean += delta * other.count / n
        self.m2 += other.m2 + delta * delta * self.count * other.count / n
        self.count = n
        return self

    @property
    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else 0.0

    def estimate(self, scale: float = 1.0) -> McEstimate:
        if self.count < 2:
            raise ValueError("need at least two samples")
        se = np.sqrt(self.variance / self.count)
        return McEstimate(mean=scale * self.mean, std_error=abs(scale) * float(se),
                          n_samples=self.count)


def _chunk_sizes(n_samples: int, chunk: int = CHUNK):
    full, rest = divmod(int(n_samples), chunk)
    return [chunk] * full + ([rest] if rest else [])


def draw_chunks(config: SystemConfig, n_samples: int, seed: int,
                chunk: int = CHUNK) -> List[ChannelDraw]:
    """Materialize the channel draws an estimator with this seed would see."""
    return [sample_channel(config, seed, k, size=m)
            for k, m in enumerate(_chunk_sizes(n_samples, chunk))]


def _iter_draws(config, n_samples, seed, draws):
    if draws is not None:
        yield from draws
        return
    for k, m in enumerate(_chunk_sizes(n_samples)):
        yield sample_channel(config, seed, k, size=m)


def _kernel(draw, gain, corr, config):
    if isinstance(gain, EigenPowerAllocation):
        return instantaneous_capacity_eigen(draw, gain, corr, config)
    return instantaneous_capacity_matrix(draw, gain, config)


def estimate_ergodic_capacity(config: SystemConfig, corr: RelayCorrelation,
                              gain: Union[EigenPowerAllocation, np.ndarray],
                              n_samples: int, seed: int,
                              draws: Optional[Iterable[ChannelDraw]] = None) -> McEstimate:
    """Half-duplex ergodic capacity (nats) of an allocation or a ``G_hat`` matrix.

    Pass ``draws`` (from :func:`draw_chunks`) to reuse channels across calls.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    acc = RunningStats()
    for draw in _iter_draws(config, n_samples, seed, draws):
        acc.update(_kernel(draw, gain, corr, config))
    return acc.estimate(scale=0.5)


def _scalar_variables(n_r, n_s, m, seed, stream):
    rng = np.random.default_rng([int(seed), int(stream), 1])
    x = rng.exponential(size=(m, n_r))
    y = rng.gamma(n_s, 1.0 / n_s, size=m)
    return x, y


def estimate_ergodic_capacity_scalar(config: SystemConfig, corr: RelayCorrelation,
                                     alloc: EigenPowerAllocation, n_samples: int,
                                     seed: int) -> McEstimate:
    """Half-duplex ergodic capacity from the ``(X, Y)`` scalar representation.

    ``X_j ~ Exp(1)`` and ``Y ~ Gamma(n_S, rate n_S)`` are drawn directly
    from their laws, never from channel matrices.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    acc = RunningStats()
    for k, m in enumerate(_chunk_sizes(n_samples)):
        x, y = _scalar_variables(config.n_r, config.n_s, m, seed, k)
        acc.update(instantaneous_capacity_scalar(x, y, alloc, corr, config))
    return acc.estimate(scale=0.5)


def check_rotation_invariance(config: SystemConfig, corr: RelayCorrelation, g_hat,
                              n_samples: int, seed: int):
    """Compare ergodic capacity of ``G_hat`` with that of its sorted eigenvalues.

    Both sides use the same channels; the returned standard error is the one
    of the paired per-draw differences (already halved like the means).

    Returns
    -------
    (diff, combined_se) : (float, float)
    """
    g_hat = np.asarray(g_hat)
    lam = np.linalg.eigvalsh(0.5 * (g_hat + g_hat.conj().T))[::-1]
    diag = np.diag(np.clip(lam, 0.0, None))
    acc = RunningStats()
    for draw in _iter_draws(config, n_samples, seed, None):
        acc.update(instantaneous_capacity_matrix(draw, g_hat, config)
                   - instantaneous_capacity_matrix(draw, diag, config))
    est = acc.estimate(scale=0.5)
    return abs(est.mean), est.std_error


def finite_difference_derivative(config: SystemConfig, corr: RelayCorrelation, total: float,
                                 p_step: float, n_samples: int, seed: int,
                                 central: bool = False) -> McEstimate:
    """Paired finite-difference estimate of ``dC/dp`` at ``p = 0``.

    Gain ``total - p`` sits on the strongest mode and ``p`` on the second;
    the total stays fixed. No half-duplex factor is applied. Negative ``p``
    is infeasible, so ``central=True`` uses the second-order one-sided
    stencil ``(-3 C(0) + 4 C(h) - C(2h)) / 2h`` instead of a true central
    difference.
    """
    if config.n_r < 2:
        raise ValueError("a perturbation needs at least two relay antennas")
    if not 0.0 < p_step < total / (2.0 if central else 1.0):
        raise ValueError("p_step must be positive and below the total gain")

    def alloc(p):
        g = np.zeros(config.n_r)
        g[0] = total - p
        g[1] = p
        return EigenPowerAllocation(g, p=p)

    a0, a1, a2 = alloc(0.0), alloc(p_step), alloc(2.0 * p_step) if central else None
    acc = RunningStats()
    for draw in _iter_draws(config, n_samples, seed, None):
        c0 = instantaneous_capacity_eigen(draw, a0, corr, config)
        c1 = instantaneous_capacity_eigen(draw, a1, corr, config)
        if central:
            c2 = instantaneous_capacity_eigen(draw, a2, corr, config)
            acc.update((-3.0 * c0 + 4.0 * c1 - c2) / (2.0 * p_step))
        else:
            acc.update((c1 - c0) / p_step)
    return acc.estimate()


@dataclass(frozen=True)
class YMomentReport:
    n_s: int
    mean: float
    mean_se: float
    variance: float
    variance_se: float
    ks_statistic: float
    ks_pvalue: float
    n_samples: int


def check_y_distribution(n_s: int, n_samples: int, seed: int) -> YMomentReport:
    """Sample ``Y = mean_i |h_i|^2`` over ``n_s`` CN(0, 1) entries and compare
    with ``Gamma(n_s, rate n_s)``."""
    rng = np.random.default_rng([int(seed), 0, 2])
    h = (rng.standard_normal((n_samples, n_s))
         + 1j * rng.standard_normal((n_samples, n_s))) * np.sqrt(0.5)
    y = np.mean(np.abs(h) ** 2, axis=1)
    mean = float(y.mean())
    var = float(y.var(ddof=1))
    mean_se = float(np.sqrt(var / n_samples))
    # SE of the sample variance from the fourth central moment.
    m4 = float(np.mean((y - mean) ** 4))
    var_se = float(np.sqrt(max(m4 - var * var, 0.0) / n_samples))
    ks = stats.kstest(y, stats.gamma(n_s, scale=1.0 / n_s).cdf)
    return YMomentReport(n_s=n_s, mean=mean, mean_se=mean_se, variance=var,
                         variance_se=var_se, ks_statistic=float(ks.statistic),
                         ks_pvalue=float(ks.pvalue), n_samples=n_samples)
