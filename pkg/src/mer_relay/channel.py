"""Two-hop AF relay model: configuration, relay correlation, channel draws,
capacity kernels and relay power accounting.

Channels follow the Kronecker model with correlation only at the relay:
``H1 = Sigma^(1/2) H1w`` (n_R x n_S) and ``h2 = h2w Sigma^(1/2)`` (1 x n_R).
Capacity kernels return nats per channel use *before* the half-duplex 1/2.

Kernels broadcast over any leading batch axes of a :class:`ChannelDraw`.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "SystemConfig",
    "RelayCorrelation",
    "ChannelDraw",
    "EigenPowerAllocation",
    "RelayPrecoder",
    "db_to_linear",
    "linear_to_db",
    "build_constant_correlation",
    "eigendecompose",
    "sample_channel",
    "correlate",
    "relay_power_used",
    "transformed_power_used",
    "trace_lemma_slack",
    "instantaneous_capacity_matrix",
    "instantaneous_capacity_eigen",
    "instantaneous_capacity_scalar",
    "precoder_from_allocation",
    "unequal_precoder",
]

_TIE_RTOL = 1e-12
_HERMITIAN_TOL = 1e-10
_PSD_TOL = 1e-10


def db_to_linear(db, ref: float = 1.0):
    return ref * 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x, ref: float = 1.0):
    return 10.0 * np.log10(np.asarray(x, dtype=float) / ref)


@dataclass(frozen=True)
class SystemConfig:
    """Node antenna counts, power budgets (linear) and noise power."""

    n_s: int
    n_r: int
    p_s: float
    p_r: float
    n0: float = 1.0

    def __post_init__(self):
        if int(self.n_s) != self.n_s or self.n_s < 1:
            raise ValueError(f"n_s must be a positive integer, got {self.n_s}")
        if int(self.n_r) != self.n_r or self.n_r < 1:
            raise ValueError(f"n_r must be a positive integer, got {self.n_r}")
        if not self.p_s >= 0 or not self.p_r >= 0:
            raise ValueError("powers must be nonnegative")
        if not self.n0 > 0:
            raise ValueError("noise power n0 must be positive")

    @property
    def gamma(self) -> float:
        """Source SNR ``P_S / N_0``."""
        return self.p_s / self.n0

    @classmethod
    def from_db(cls, p_s_db: float, p_r_db: float, n_s: int, n_r: int, n0: float = 1.0):
        """Build from powers in dB relative to the noise power."""
        return cls(n_s=n_s, n_r=n_r, p_s=float(db_to_linear(p_s_db, n0)),
                   p_r=float(db_to_linear(p_r_db, n0)), n0=n0)


def eigendecompose(sigma):
    """Eigen-decompose a Hermitian PSD matrix with descending eigenvalues.

    Eigenvectors of a repeated eigenvalue (within a relative 1e-12) are
    replaced by a canonical basis of their eigenspace, built by
    Gram-Schmidt on the projected standard basis vectors. Every eigenvector
    is then phased so its first non-negligible component is real positive.
    An identity input therefore returns identity eigenvectors.

    Returns
    -------
    (U, lam) : (np.ndarray, np.ndarray)
        Unitary eigenvector matrix (columns) and descending eigenvalues.
    """
    sigma = np.asarray(sigma)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ValueError("matrix must be square")
    scale = max(np.max(np.abs(sigma)), 1.0)
    if np.max(np.abs(sigma - sigma.conj().T)) > _HERMITIAN_TOL * scale:
        raise ValueError("matrix is not Hermitian")
    herm = 0.5 * (sigma + sigma.conj().T)
    lam, vecs = np.linalg.eigh(herm)
    lam = lam[::-1]
    vecs = vecs[:, ::-1]
    n = lam.size
    dtype = np.result_type(vecs.dtype, float)
    out = np.array(vecs, dtype=dtype)

    tol = _TIE_RTOL * max(abs(lam[0]), abs(lam[-1]), 1e-300)
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and abs(lam[stop] - lam[start]) <= tol:
            stop += 1
        if stop - start > 1:
            block = vecs[:, start:stop]
            proj = block @ block.conj().T
            basis = []
            for k in range(n):
                v = proj[:, k].copy()
                for b in basis:
                    v -= (b.conj() @ v) * b
                norm = np.linalg.norm(v)
                if norm > 1e-8:
                    basis.append(v / norm)
                if len(basis) == stop - start:
                    break
            out[:, start:stop] = np.column_stack(basis)
        start = stop

    for j in range(n):
        col = out[:, j]
        k = int(np.argmax(np.abs(col) > 1e-10))
        phase = col[k] / abs(col[k])
        out[:, j] = col / phase
    if not np.iscomplexobj(sigma):
        out = out.real
    return out, lam


@dataclass(frozen=True)
class RelayCorrelation:
    """Relay correlation matrix with its ordered eigensystem."""

    sigma: np.ndarray
    eigvecs: np.ndarray
    eigvals: np.ndarray
    rho: Optional[float] = None

    @classmethod
    def from_matrix(cls, sigma, rho: Optional[float] = None) -> "RelayCorrelation":
        sigma = np.array(sigma)
        u, lam = eigendecompose(sigma)
        if lam[-1] < -_PSD_TOL * max(lam[0], 1.0):
            raise ValueError("correlation matrix is not positive semidefinite")
        lam = np.clip(lam, 0.0, None)
        return cls(sigma=sigma, eigvecs=u, eigvals=lam, rho=rho)

    @property
    def n_r(self) -> int:
        return self.eigvals.size

    def sqrt(self) -> np.ndarray:
        """Principal Hermitian square root of ``sigma``."""
        u = self.eigvecs
        return (u * np.sqrt(self.eigvals)) @ u.conj().T


def build_constant_correlation(rho: float, n_r: int) -> RelayCorrelation:
    """Unit-diagonal correlation with every off-diagonal entry equal to ``rho``.

    The spectrum is ``1 + (n_r - 1) rho`` once and ``1 - rho`` repeated.
    """
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must lie in [0, 1), got {rho}")
    if n_r < 1:
        raise ValueError("n_r must be positive")
    sigma = np.full((n_r, n_r), float(rho))
    np.fill_diagonal(sigma, 1.0)
    return RelayCorrelation.from_matrix(sigma, rho=float(rho))


@dataclass(frozen=True)
class ChannelDraw:
    """Whitened channels ``H1w`` (..., n_R, n_S) and ``h2w`` (..., n_R)."""

    h1w: np.ndarray
    h2w: np.ndarray

    def __len__(self):
        return self.h1w.shape[0] if self.h1w.ndim == 3 else 1


def _complex_normal(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(0.5)


def sample_channel(config: SystemConfig, seed: int, stream: int = 0,
                   size: Optional[int] = None) -> ChannelDraw:
    """Draw i.i.d. CN(0, 1) whitened channels.

    The generator is keyed on ``(seed, stream)``, so equal keys give
    bit-identical draws and distinct streams are independent. ``size``
    adds a leading batch axis.
    """
    rng = np.random.default_rng([int(seed), int(stream)])
    lead = () if size is None else (int(size),)
    h1w = _complex_normal(rng, lead + (config.n_r, config.n_s))
    h2w = _complex_normal(rng, lead + (config.n_r,))
    return ChannelDraw(h1w=h1w, h2w=h2w)


def correlate(draw: ChannelDraw, corr: RelayCorrelation):
    """Apply the relay correlation: returns ``(H1, h2)``."""
    root = corr.sqrt()
    h1 = np.einsum("ij,...js->...is", root, draw.h1w)
    h2 = np.einsum("...j,jk->...k", draw.h2w, root)
    return h1, h2


@dataclass(frozen=True)
class EigenPowerAllocation:
    """Relay gain per eigenmode of the correlation matrix.

    ``p`` optionally records how much of ``total`` sits on the weaker modes.
    """

    gains: np.ndarray
    p: float = 0.0

    def __post_init__(self):
        g = np.asarray(self.gains, dtype=float)
        if g.ndim != 1:
            raise ValueError("gains must be a vector")
        if np.any(g < 0) or not np.all(np.isfinite(g)):
            raise ValueError("gains must be finite and nonnegative")
        object.__setattr__(self, "gains", g)

    @property
    def total(self) -> float:
        return float(self.gains.sum())


def relay_power_used(alloc: EigenPowerAllocation, corr: RelayCorrelation,
                     config: SystemConfig) -> float:
    """Average relay transmit power ``P_S sum(lam_S g) + N_0 sum(g)``."""
    g = alloc.gains
    return float(config.p_s * np.dot(corr.eigvals, g) + config.n0 * g.sum())


def transformed_power_used(g_hat, corr: RelayCorrelation, config: SystemConfig) -> float:
    """Relay power written in terms of a transformed gain ``G_hat``:
    ``P_S Tr(Lam^-1 G_hat) + N_0 Tr(Lam^-2 G_hat)``. Needs ``Lam > 0``."""
    d = np.real(np.diagonal(np.asarray(g_hat)))
    lam = corr.eigvals
    if np.any(lam <= 0):
        raise ValueError("transformed power needs a positive definite correlation")
    return float(config.p_s * np.sum(d / lam) + config.n0 * np.sum(d / lam ** 2))


def trace_lemma_slack(g_hat, lam_sigma, k: int = 1) -> float:
    """``Tr(Lam^-k G_hat) - Tr(Lam^-k diag(eig_desc(G_hat)))``.

    Nonnegative for PSD ``G_hat`` and descending positive ``lam_sigma``:
    aligning the eigenvalues of ``G_hat`` with the eigenbasis never costs
    more relay power.
    """
    g_hat = np.asarray(g_hat)
    lam = np.asarray(lam_sigma, dtype=float)
    w = lam ** (-float(k))
    eig = np.linalg.eigvalsh(0.5 * (g_hat + g_hat.conj().T))[::-1]
    return float(np.dot(w, np.real(np.diagonal(g_hat))) - np.dot(w, eig))


def _psd_sqrt(mat):
    lam, vecs = np.linalg.eigh(0.5 * (mat + mat.conj().T))
    if lam[0] < -_PSD_TOL * max(abs(lam[-1]), 1.0):
        raise ValueError("gain matrix is not positive semidefinite")
    lam = np.clip(lam, 0.0, None)
    return (vecs * np.sqrt(lam)) @ vecs.conj().T


def instantaneous_capacity_matrix(draw: ChannelDraw, g_hat, config: SystemConfig):
    """Instantaneous capacity for a general transformed gain matrix ``G_hat``.

    ``log(1 + gamma |h2w G^1/2 H1w|^2 / (n_S (1 + h2w G h2w^H)))``
    with the principal square root of ``G_hat``.
    """
    g_hat = np.asarray(g_hat)
    root = _psd_sqrt(g_hat)
    v = np.einsum("...j,jk->...k", draw.h2w, root)
    w = np.einsum("...k,...ks->...s", v, draw.h1w)
    num = np.sum(np.abs(w) ** 2, axis=-1)
    den = np.einsum("...j,jk,...k->...", draw.h2w, g_hat, draw.h2w.conj()).real
    return np.log1p(config.gamma * num / (config.n_s * (1.0 + den)))


def instantaneous_capacity_eigen(draw: ChannelDraw, alloc: EigenPowerAllocation,
                                 corr: RelayCorrelation, config: SystemConfig):
    """Instantaneous capacity for a diagonal allocation in eigen coordinates."""
    amp = np.sqrt(alloc.gains) * corr.eigvals
    v = draw.h2w * amp
    w = np.einsum("...k,...ks->...s", v, draw.h1w)
    num = np.sum(np.abs(w) ** 2, axis=-1)
    den = np.sum(np.abs(v) ** 2, axis=-1)
    return np.log1p(config.gamma * num / (config.n_s * (1.0 + den)))


def instantaneous_capacity_scalar(x, y, alloc: EigenPowerAllocation,
                                  corr: RelayCorrelation, config: SystemConfig):
    """Capacity as a function of ``X_j = |h2w_j|^2`` and the Erlang variable ``Y``.

    ``x`` has shape (..., n_R) and ``y`` shape (...).
    """
    s = np.asarray(x, dtype=float) @ (alloc.gains * corr.eigvals ** 2)
    y = np.asarray(y, dtype=float)
    return np.log1p(s * (1.0 + config.gamma * y)) - np.log1p(s)


@dataclass(frozen=True)
class RelayPrecoder:
    f: np.ndarray
    g: np.ndarray
    g_hat: np.ndarray
    u_g: np.ndarray = field(repr=False)


def precoder_from_allocation(alloc: EigenPowerAllocation,
                             corr: RelayCorrelation) -> RelayPrecoder:
    """Relay precoder transmitting along the correlation eigenvectors."""
    u = corr.eigvecs
    root_g = np.sqrt(alloc.gains)
    g = (u * alloc.gains) @ u.conj().T
    f = (u * root_g) @ u.conj().T
    # G_hat^1/2 = Lam^1/2 U^H G^1/2 U Lam^1/2
    half = np.sqrt(corr.eigvals)
    g_hat_root = half[:, None] * (u.conj().T @ f @ u) * half[None, :]
    g_hat = g_hat_root @ g_hat_root.conj().T
    return RelayPrecoder(f=f, g=g, g_hat=g_hat, u_g=u)


def unequal_precoder(corr1: RelayCorrelation, corr2: RelayCorrelation, lam) -> np.ndarray:
    """``F = U_2 diag(lam) U_1^H`` for distinct receive/transmit correlations."""
    lam = np.asarray(lam, dtype=float)
    if corr1.n_r != corr2.n_r or lam.shape != (corr1.n_r,):
        raise ValueError("dimension mismatch between correlations and gains")
    if np.any(lam < 0) or np.any(np.diff(lam) > 0):
        raise ValueError("lam must be nonnegative and descending")
    return (corr2.eigvecs * lam) @ corr1.eigvecs.conj().T
