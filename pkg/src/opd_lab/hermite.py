"""Hermite polynomials, second-order Hermite coefficients and limit weights.

The coincidence indicator ``f(Y) = 1{pattern(Y1 window) = pattern(Y2 window)}``
of the stacked increment vector ``Y ~ N(0, Sigma)`` has Hermite rank 2. Its
second-order projection is

    f(Y) - p  ~  1/2 * (Y' A Y - E[Y' A Y]),    A = Sigma^{-1} C Sigma^{-1},

with ``C = E[Y (f(Y) - p) Y']``. The block sums of ``A`` drive the
long-memory limit; the full covariance series of the indicators gives the
short-memory variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ._runtime import STREAM_SRD, STREAM_WEIGHTS, chunk_sizes, ordered_map, seed_sequence
from .errors import (
    ConditioningError,
    InvalidParameterError,
    RegimeError,
    UnsupportedOrderError,
)
from .estimators import theoretical_p_h1
from .ordinal import increment_codes_batch
from .processgen import (
    BivariateLrdModel,
    ExtendedCovariance,
    extended_covariance,
    model_cross_correlation,
    segment_covariance,
)

MAX_HERMITE_DEGREE = 20
MAX_CONDITION = 1e12
PHI0_SQUARED = 1.0 / (2.0 * math.pi)
CHUNK = 1 << 16


def hermite_poly(j: int, x):
    """Probabilists' Hermite polynomial ``H_j(x)`` via the three-term recurrence.

    Examples
    --------
    >>> hermite_poly(3, 2.0)
    2.0
    """
    if isinstance(j, bool) or not isinstance(j, (int, np.integer)) or j < 0:
        raise UnsupportedOrderError(f"degree must be a non-negative integer, got {j!r}")
    if j > MAX_HERMITE_DEGREE:
        raise UnsupportedOrderError(f"degree {j} exceeds the guard {MAX_HERMITE_DEGREE}")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if j == 0:
        return float(prev) if prev.ndim == 0 else prev
    cur = x.copy()
    for k in range(1, j):
        prev, cur = cur, x * cur - k * prev
    return float(cur) if cur.ndim == 0 else cur


@dataclass(frozen=True)
class LimitWeights:
    """Second-order Hermite coefficients and derived limit weights.

    Attributes
    ----------
    h : int
        Pattern order.
    c_matrix : ndarray, shape (2h, 2h)
        ``E[Y (f - p) Y']``.
    mc_std_err : ndarray, shape (2h, 2h)
        Monte Carlo standard errors of ``c_matrix`` (zeros for closed forms).
    alpha_matrix : ndarray, shape (2h, 2h)
        ``Sigma^{-1} C Sigma^{-1}``.
    alpha_tilde : ndarray, shape (2, 2)
        Block sums of ``alpha_matrix``.
    alpha_tilde_std_err : ndarray, shape (2, 2)
        Standard errors of ``alpha_tilde`` propagated linearly from ``C``.
    p, p_std_err : float
        Coincidence probability estimated in the same pass, when available.
    reps : int
        Number of Monte Carlo draws (0 for closed forms).
    """

    h: int
    c_matrix: np.ndarray
    mc_std_err: np.ndarray
    alpha_matrix: np.ndarray
    alpha_tilde: np.ndarray
    alpha_tilde_std_err: np.ndarray
    alpha_tilde_cov: np.ndarray = field(repr=False, default=None)
    p: float | None = None
    p_std_err: float | None = None
    reps: int = 0
    first_order: np.ndarray | None = None
    first_order_std_err: np.ndarray | None = None

    def to_dict(self) -> dict:
        """JSON-ready record; matrices are nested lists in row-major order."""
        out = {
            "h": self.h,
            "reps": self.reps,
            "p": self.p,
            "p_std_err": self.p_std_err,
            "c_matrix": self.c_matrix.tolist(),
            "c_std_err": self.mc_std_err.tolist(),
            "alpha_matrix": self.alpha_matrix.tolist(),
            "alpha_tilde": self.alpha_tilde.tolist(),
            "alpha_tilde_std_err": self.alpha_tilde_std_err.tolist(),
        }
        if self.first_order is not None:
            out["first_order"] = self.first_order.tolist()
            out["first_order_std_err"] = self.first_order_std_err.tolist()
        return out


def _block_indicators(h: int) -> np.ndarray:
    ind = np.zeros((2, 2 * h))
    ind[0, :h] = 1.0
    ind[1, h:] = 1.0
    return ind


def alpha_weights(sigma: ExtendedCovariance, c, c_cov=None, **extra) -> LimitWeights:
    """Combine ``C`` with ``Sigma^{-1}`` into the limit weights.

    Parameters
    ----------
    sigma : ExtendedCovariance
    c : array_like, shape (2h, 2h)
        Second-order Hermite coefficient matrix.
    c_cov : array_like, shape ((2h)^2, (2h)^2), optional
        Covariance of ``vec(C)`` (row-major) for error propagation.
    **extra
        Stored on the result (``p``, ``p_std_err``, ``reps``, ...).

    Raises
    ------
    ConditioningError
        If the condition number of ``Sigma`` exceeds ``1e12``.
    """
    mat = np.asarray(sigma.matrix, dtype=float)
    c = np.asarray(c, dtype=float)
    dim = mat.shape[0]
    h = sigma.h
    if c.shape != (dim, dim):
        raise InvalidParameterError(f"C must be {dim}x{dim}, got {c.shape}")
    cond = float(np.linalg.cond(mat))
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise ConditioningError(f"covariance condition number {cond:.3e} exceeds {MAX_CONDITION:.0e}")
    factor = cho_factor(mat)
    inv = cho_solve(factor, np.eye(dim))
    inv = 0.5 * (inv + inv.T)
    alpha = inv @ c @ inv
    alpha = 0.5 * (alpha + alpha.T)
    g = _block_indicators(h) @ inv  # rows g_p = 1_p' Sigma^{-1}
    alpha_tilde = g @ c @ g.T
    alpha_tilde = 0.5 * (alpha_tilde + alpha_tilde.T)
    if c_cov is None:
        c_cov = np.zeros((dim * dim, dim * dim))
        c_err = np.zeros((dim, dim))
    else:
        c_cov = np.asarray(c_cov, dtype=float)
        c_err = np.sqrt(np.clip(np.diag(c_cov), 0.0, None)).reshape(dim, dim)
    # alpha_tilde[p, q] = kron(g_p, g_q) . vec(C)
    lin = np.stack([np.kron(g[p], g[q]) for p in range(2) for q in range(2)])
    at_cov = lin @ c_cov @ lin.T
    at_err = np.sqrt(np.clip(np.diag(at_cov), 0.0, None)).reshape(2, 2)
    return LimitWeights(
        h=h,
        c_matrix=c,
        mc_std_err=c_err,
        alpha_matrix=alpha,
        alpha_tilde=alpha_tilde,
        alpha_tilde_std_err=at_err,
        alpha_tilde_cov=at_cov,
        **extra,
    )


def _draw_factor(cov: np.ndarray) -> np.ndarray:
    """Matrix ``F`` with ``F F' = cov``; Cholesky, or a symmetric root if singular."""
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(cov)
        return v * np.sqrt(np.clip(w, 0.0, None))


class _MomentAccumulator:
    """Running sums for ``E[(f - p) V]`` and its covariance, with ``f`` binary."""

    def __init__(self, dim: int):
        self.n = 0
        self.sf = 0.0
        self.sv = np.zeros(dim)
        self.sfv = np.zeros(dim)
        self.svv = np.zeros((dim, dim))
        self.sfvv = np.zeros((dim, dim))

    def add(self, f: np.ndarray, v: np.ndarray) -> None:
        fv = v[f]
        self.n += f.size
        self.sf += float(np.count_nonzero(f))
        self.sv += v.sum(axis=0)
        self.sfv += fv.sum(axis=0)
        self.svv += v.T @ v
        self.sfvv += fv.T @ fv

    def merge(self, other: "_MomentAccumulator") -> None:
        self.n += other.n
        self.sf += other.sf
        self.sv += other.sv
        self.sfv += other.sfv
        self.svv += other.svv
        self.sfvv += other.sfvv

    def mean_and_cov(self, p: float) -> tuple[np.ndarray, np.ndarray]:
        """Mean of ``z = (f - p) v`` and the covariance of that mean."""
        n = self.n
        mean = (self.sfv - p * self.sv) / n
        second = ((1.0 - 2.0 * p) * self.sfvv + p * p * self.svv) / n
        cov = (second - np.outer(mean, mean)) / n
        return mean, 0.5 * (cov + cov.T)


def _coefficient_chunk(args) -> tuple[_MomentAccumulator, _MomentAccumulator]:
    factor, sigma, h, size, seq = args
    rng = np.random.Generator(np.random.Philox(seq))
    dim = 2 * h
    y = rng.standard_normal((size, dim)) @ factor.T
    f = increment_codes_batch(y[:, :h]) == increment_codes_batch(y[:, h:])
    v2 = (y[:, :, None] * y[:, None, :] - sigma).reshape(size, dim * dim)
    first = _MomentAccumulator(dim)
    first.add(f, y)
    second = _MomentAccumulator(dim * dim)
    second.add(f, v2)
    return first, second


def hermite_coeff_matrix(
    model: BivariateLrdModel,
    h: int,
    reps: int = 10**6,
    seed: int = 0,
    threads: int | None = None,
) -> LimitWeights:
    """Monte Carlo estimate of ``C = E[Y (f(Y) - p) Y']`` and the derived weights.

    Parameters
    ----------
    model : BivariateLrdModel
    h : int
        Pattern order, 1 to 3.
    reps : int
        Number of exact draws from ``N(0, Sigma)``; at least ``10**4``.
    seed : int
        Master seed; chunk ``i`` uses stream ``(seed, WEIGHTS, i)``.
    threads : int, optional
        Worker count. Results do not depend on it.

    Returns
    -------
    LimitWeights
        Includes first-order coefficients ``E[Y (f - p)]`` with their errors,
        which vanish for a rank-2 functional.
    """
    if h not in (1, 2, 3):
        raise UnsupportedOrderError(f"Hermite coefficients are supported for h in 1..3, got {h}")
    if reps < 10**4:
        raise InvalidParameterError(f"reps must be at least 10^4, got {reps}")
    sigma = extended_covariance(model, h)
    mat = np.asarray(sigma.matrix)
    factor = _draw_factor(mat)
    sizes = chunk_sizes(reps, CHUNK)
    jobs = [
        (factor, mat, h, size, seed_sequence(seed, STREAM_WEIGHTS, i))
        for i, size in enumerate(sizes)
    ]
    parts = ordered_map(_coefficient_chunk, jobs, threads)
    dim = 2 * h
    first = _MomentAccumulator(dim)
    second = _MomentAccumulator(dim * dim)
    for a, b in parts:
        first.merge(a)
        second.merge(b)
    p_hat = second.sf / second.n
    p_err = math.sqrt(p_hat * (1.0 - p_hat) / second.n)
    c_vec, c_cov = second.mean_and_cov(p_hat)
    c = c_vec.reshape(dim, dim)
    c = 0.5 * (c + c.T)
    f1, f1_cov = first.mean_and_cov(p_hat)
    return alpha_weights(
        sigma,
        c,
        c_cov,
        p=p_hat,
        p_std_err=p_err,
        reps=int(reps),
        first_order=f1,
        first_order_std_err=np.sqrt(np.clip(np.diag(f1_cov), 0.0, None)),
    )


def c_matrix_h1_closed_form(rho: float) -> np.ndarray:
    """Exact ``C`` for ``h = 1`` and lag-zero correlation ``rho``.

    Both patterns of order 1 contribute ``phi(0)^2 sqrt(1 - rho^2)`` times
    ``rho`` (diagonal) or ``1`` (off-diagonal).
    """
    theoretical_p_h1(rho)  # range check
    root = math.sqrt(1.0 - rho * rho)
    diag = 2.0 * PHI0_SQUARED * rho * root
    off = 2.0 * PHI0_SQUARED * root
    return np.array([[diag, off], [off, diag]])


def alpha_tilde_h1_closed_form(rho: float) -> tuple[float, float]:
    """``(-2 phi(0)^2 rho / sqrt(1 - rho^2), 2 phi(0)^2 / sqrt(1 - rho^2))``."""
    rho = float(rho)
    if not abs(rho) < 1.0:
        raise InvalidParameterError(f"|rho| must be below 1, got {rho}")
    root = math.sqrt(1.0 - rho * rho)
    return -2.0 * PHI0_SQUARED * rho / root, 2.0 * PHI0_SQUARED / root


def lag_covariance(model: BivariateLrdModel, h: int, lags) -> np.ndarray:
    """``Cov(Y_{0,h}, Y_{k,h})`` for each lag ``k``; shape ``(len(lags), 2h, 2h)``.

    Entry ``((p, i), (q, j))`` is ``r_pq(k + j - i)``.
    """
    lags = np.asarray(lags)
    offs = np.arange(h)[None, :] - np.arange(h)[:, None]
    shift = lags[:, None, None] + offs[None, :, :]
    blocks = [[model_cross_correlation(model, p, q, shift) for q in (1, 2)] for p in (1, 2)]
    top = np.concatenate(blocks[0], axis=2)
    bottom = np.concatenate(blocks[1], axis=2)
    return np.concatenate([top, bottom], axis=1)


def second_order_lag_covariance(alpha: np.ndarray, model: BivariateLrdModel, h: int, lags):
    """``1/2 tr(A G_k A G_k')``: rank-2 approximation of ``Cov(f(Y_0), f(Y_k))``."""
    g = lag_covariance(model, h, lags)
    ag = np.einsum("ab,kbc->kac", alpha, g)
    return 0.5 * np.einsum("kab,kba->k", ag, np.transpose(ag, (0, 2, 1)))


@dataclass(frozen=True)
class SrdVariance:
    """Short-memory limit variance estimate.

    Attributes
    ----------
    value : float
        ``Var(I_0) + 2 sum_{k=1..max_lag} Cov(I_0, I_k)``.
    std_err : float
        Monte Carlo standard error of ``value``.
    tail : float
        Estimate of the omitted terms ``|k| > max_lag`` from the rank-2
        approximation.
    partial_sums, partial_std_err : ndarray
        Truncated sums and their errors for every truncation lag ``0..max_lag``.
    """

    value: float
    std_err: float
    tail: float
    max_lag: int
    reps: int
    p: float
    partial_sums: np.ndarray = field(repr=False)
    partial_std_err: np.ndarray = field(repr=False)

    @property
    def total(self) -> float:
        return self.value + self.tail

    def __float__(self) -> float:
        return float(self.value)


def _srd_chunk(args):
    factor, h, max_lag, size, seq, sigma_h = args
    rng = np.random.Generator(np.random.Philox(seq))
    length = max_lag + h
    y = rng.standard_normal((size, factor.shape[0])) @ factor.T
    y1 = y[:, :length]
    y2 = y[:, length:]
    ind = np.empty((size, max_lag + 1))
    for k in range(max_lag + 1):
        ind[:, k] = increment_codes_batch(y1[:, k : k + h]) == increment_codes_batch(y2[:, k : k + h])
    weights = np.full(max_lag + 1, 2.0)
    weights[0] = 1.0
    s = np.cumsum(ind * weights, axis=1)  # S_K = sum_{k <= K} w_k I_k
    i0 = ind[:, 0]
    stats = np.stack(
        [
            i0 @ (s * s),
            i0 @ s,
            np.full(max_lag + 1, i0.sum()),
            (s * s).sum(axis=0),
            s.sum(axis=0),
        ]
    )
    window0 = np.concatenate([y1[:, :h], y2[:, :h]], axis=1)
    d = 2 * h
    v2 = (window0[:, :, None] * window0[:, None, :] - sigma_h).reshape(size, d * d)
    acc = _MomentAccumulator(d * d)
    acc.add(i0.astype(bool), v2)
    return ind.sum(axis=0), stats, acc


def srd_variance(
    model: BivariateLrdModel,
    h: int,
    max_lag: int = 50,
    reps: int = 200_000,
    seed: int = 0,
    threads: int | None = None,
    tail_horizon: int = 100_000,
) -> SrdVariance:
    """Monte Carlo estimate of the short-memory limit variance of ``sqrt(n) p_hat``.

    Each draw is an exact joint Gaussian segment of ``max_lag + h`` increments
    of both series; the coincidence indicators ``I_0, ..., I_max_lag`` of its
    windows give unbiased covariance terms. The omitted tail uses the rank-2
    approximation with ``C`` estimated from the same draws, summed explicitly
    to ``tail_horizon`` and extrapolated by a power law beyond.

    Raises
    ------
    RegimeError
        If the memory parameter is not below 1/4.
    """
    if model.d_star >= 0.25:
        raise RegimeError(
            f"d* = {model.d_star:.3f} is not below 1/4; the short-memory variance diverges"
        )
    if h not in (1, 2, 3):
        raise UnsupportedOrderError(f"h must be in 1..3, got {h}")
    if max_lag < h:
        raise InvalidParameterError(f"max_lag must be at least h = {h}, got {max_lag}")
    if reps < 1000:
        raise InvalidParameterError(f"reps must be at least 1000, got {reps}")
    length = max_lag + h
    factor = _draw_factor(segment_covariance(model, length))
    sigma = extended_covariance(model, h)
    sigma_h = np.asarray(sigma.matrix)
    chunk = max(1024, CHUNK // max(1, length // 8))
    jobs = [
        (factor, h, max_lag, size, seed_sequence(seed, STREAM_SRD, i), sigma_h)
        for i, size in enumerate(chunk_sizes(reps, chunk))
    ]
    parts = ordered_map(_srd_chunk, jobs, threads)
    counts = np.zeros(max_lag + 1)
    stats = np.zeros((5, max_lag + 1))
    acc = _MomentAccumulator(4 * h * h)
    for cnt, st, a in parts:
        counts += cnt
        stats += st
        acc.merge(a)
    n = float(reps)
    p = float(counts.sum() / (n * (max_lag + 1)))
    i0s2, i0s, i0, s2, s1 = stats / n
    w = 1.0 + 2.0 * np.arange(max_lag + 1)  # total weight W_K
    # z_K = (I_0 - p)(S_K - p W_K)
    partial = i0s - p * w * i0 - p * s1 + p * p * w
    second = (1.0 - 2.0 * p) * (i0s2 - 2.0 * p * w * i0s + p * p * w * w * i0) + p * p * (
        s2 - 2.0 * p * w * s1 + p * p * w * w
    )
    errs = np.sqrt(np.clip(second - partial**2, 0.0, None) / n)
    c_vec, _ = acc.mean_and_cov(p)
    dim = 2 * h
    c = c_vec.reshape(dim, dim)
    weights_obj = alpha_weights(sigma, 0.5 * (c + c.T))
    tail = _srd_tail(weights_obj.alpha_matrix, model, h, max_lag, tail_horizon)
    return SrdVariance(
        value=float(partial[-1]),
        std_err=float(errs[-1]),
        tail=tail,
        max_lag=int(max_lag),
        reps=int(reps),
        p=p,
        partial_sums=partial,
        partial_std_err=errs,
    )


def _srd_tail(alpha: np.ndarray, model: BivariateLrdModel, h: int, max_lag: int, horizon: int) -> float:
    if horizon <= max_lag:
        return 0.0
    lags = np.arange(max_lag + 1, horizon + 1)
    terms = second_order_lag_covariance(alpha, model, h, lags)
    explicit = 2.0 * float(terms.sum())
    # Beyond the horizon the terms behave like c k^{4d - 2}.
    d = max(model.d_star, 0.0)
    expo = 4.0 * d - 2.0
    if d > 0.0 and expo < -1.0:
        c = terms[-1] * float(horizon) ** (-expo)
        explicit += 2.0 * c * float(horizon) ** (expo + 1.0) / (-(expo + 1.0))
    return explicit
