"""Numerical eigenmode gain allocation under the relay power budget.

Candidates are parametrized by the share of the relay budget spent on each
mode, so every candidate uses exactly ``P_R``::

    gain_j = w_j P_R / (N0 + P_S lam_j),   w on the unit simplex.

For two relay antennas ``w = (alpha, 1 - alpha)`` and ``alpha`` is found by
golden-section search. Larger arrays use cyclic pairwise golden-section
moves between the strongest mode and each other mode. All candidates within
one optimization are scored on the same channel draws.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List

import numpy as np

from .channel import (EigenPowerAllocation, RelayCorrelation, SystemConfig,
                      instantaneous_capacity_eigen)
from .montecarlo import McEstimate, RunningStats, draw_chunks, estimate_ergodic_capacity

__all__ = [
    "OptimizationResult",
    "simplex_allocation",
    "golden_section_max",
    "capacity_of_allocation",
    "optimize_allocation",
]

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def simplex_allocation(weights, config: SystemConfig,
                       corr: RelayCorrelation) -> EigenPowerAllocation:
    """Gains spending budget share ``weights[j]`` on mode ``j``."""
    w = np.asarray(weights, dtype=float)
    if w.shape != (corr.n_r,) or np.any(w < -1e-15) or abs(w.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be a probability vector over the modes")
    w = np.clip(w, 0.0, None)
    gains = w * config.p_r / (config.n0 + config.p_s * corr.eigvals)
    return EigenPowerAllocation(gains, p=float(gains[1:].sum()))


def golden_section_max(f: Callable[[float], float], lo: float, hi: float,
                       tol: float = 1e-3, max_iter: int = 200):
    """Maximize a unimodal ``f`` on ``[lo, hi]``.

    The endpoints are scored too, so a maximum sitting on the boundary is
    returned exactly rather than ``tol`` inside it.

    Returns
    -------
    (x, fx, iterations, evaluated) where ``evaluated`` maps x to f(x).
    """
    seen: Dict[float, float] = {}

    def fe(x):
        if x not in seen:
            seen[x] = f(x)
        return seen[x]

    a, b = lo, hi
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = fe(x1), fe(x2)
    it = 0
    while b - a > tol and it < max_iter:
        it += 1
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = fe(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = fe(x2)
    mid = 0.5 * (a + b)
    candidates = [mid, lo, hi]
    best = max(candidates, key=fe)
    return best, fe(best), it, seen


def capacity_of_allocation(config: SystemConfig, corr: RelayCorrelation,
                           alloc: EigenPowerAllocation, mc_samples: int,
                           seed: int) -> McEstimate:
    """Half-duplex ergodic capacity (nats) of a fixed allocation."""
    return estimate_ergodic_capacity(config, corr, alloc, mc_samples, seed)


@dataclass(frozen=True)
class OptimizationResult:
    best_alloc: EigenPowerAllocation
    capacity: McEstimate
    weights: np.ndarray
    iterations: int
    converged: bool
    diagnostics: Dict[str, float] = field(default_factory=dict)

    @property
    def alpha(self) -> float:
        """Budget share on the strongest mode."""
        return float(self.weights[0])


class _CrnObjective:
    """Ergodic capacity on a frozen set of draws, with per-draw values kept
    for paired comparisons."""

    def __init__(self, config, corr, mc_samples, seed):
        self.config = config
        self.corr = corr
        self.draws = draw_chunks(config, mc_samples, seed)
        self.evaluations = 0

    def samples(self, weights) -> np.ndarray:
        alloc = simplex_allocation(weights, self.config, self.corr)
        self.evaluations += 1
        return np.concatenate([instantaneous_capacity_eigen(d, alloc, self.corr, self.config)
                               for d in self.draws])

    def __call__(self, weights) -> float:
        return 0.5 * float(self.samples(weights).mean())


def _paired_se(obj: _CrnObjective, w_a, w_b) -> float:
    diff = obj.samples(w_a) - obj.samples(w_b)
    return 0.5 * float(RunningStats().update(diff).estimate().std_error)


def optimize_allocation(config: SystemConfig, corr: RelayCorrelation, mc_samples: int,
                        seed: int, tol: float = 1e-3, max_sweeps: int = 50) -> OptimizationResult:
    """Maximize Monte Carlo ergodic capacity over budget-saturating allocations.

    ``converged`` is False when the search hit its iteration limit, or when
    the objective varies less across the candidates than the paired
    standard error of that variation (the budget cannot resolve the optimum).
    """
    n = corr.n_r
    if n == 1:
        w = np.ones(1)
        alloc = simplex_allocation(w, config, corr)
        cap = capacity_of_allocation(config, corr, alloc, mc_samples, seed)
        return OptimizationResult(alloc, cap, w, 0, True)

    obj = _CrnObjective(config, corr, mc_samples, seed)
    mer = np.zeros(n)
    mer[0] = 1.0
    iterations = 0
    hit_limit = False
    values: List[float] = []

    if n == 2:
        alpha, _, iterations, seen = golden_section_max(
            lambda a: obj(np.array([a, 1.0 - a])), 0.0, 1.0, tol=tol)
        w = np.array([alpha, 1.0 - alpha])
        values = list(seen.values())
        hit_limit = iterations >= 200
    else:
        w = mer.copy()
        values = [obj(w)]
        for sweep in range(max_sweeps):
            moved = 0.0
            for j in range(1, n):
                pool = w[0] + w[j]
                if pool <= 0:
                    continue

                def f(t, j=j, pool=pool):
                    trial = w.copy()
                    trial[0], trial[j] = t, pool - t
                    return obj(trial)

                t, _, it, seen = golden_section_max(f, 0.0, pool, tol=tol * pool)
                iterations += it
                values.extend(seen.values())
                moved = max(moved, abs(t - w[0]))
                w[0], w[j] = t, pool - t
            if moved < tol:
                break
        else:
            hit_limit = True

    alloc = simplex_allocation(w, config, corr)
    samples = obj.samples(w)
    cap = RunningStats().update(samples).estimate(scale=0.5)
    span = max(values) - min(values) if values else 0.0
    hi_w = np.zeros(n)
    hi_w[-1] = 1.0
    span_se = _paired_se(obj, mer, hi_w)
    gain_se = _paired_se(obj, w, mer)
    resolvable = span > span_se or span == 0.0
    diagnostics = {
        "objective_span": span,
        "span_se": span_se,
        "gain_over_mer": cap.mean - obj(mer),
        "gain_over_mer_se": gain_se,
        "evaluations": float(obj.evaluations),
    }
    return OptimizationResult(alloc, cap, w, iterations, bool(resolvable and not hit_limit),
                              diagnostics)
