"""Coincident-pattern probability, ordinal pattern dependence, and normalisations.

``p`` is the probability that both series show the same ordinal pattern in a
window, ``q`` the same probability for independent copies with the same
marginal pattern laws, and ``OPD = (p - q) / (1 - q)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import ndtr, ndtri
from scipy.stats import qmc

from .errors import (
    DegenerateMarginalsError,
    InvalidInputError,
    InvalidParameterError,
    RegimeError,
)
from .ordinal import _check_order, all_patterns, increment_window_codes, window_codes
from .processgen import BivariateLrdModel, extended_covariance

Q_CEILING = 1.0 - 1e-12


@dataclass(frozen=True)
class OpdEstimate:
    """Plug-in estimates of ``p``, ``q`` and ``OPD``.

    Attributes
    ----------
    n : int
        Number of windows that entered the averages.
    """

    p_hat: float
    q_hat: float
    opd: float
    h: int
    n: int

    def to_dict(self) -> dict:
        return asdict(self)


def _paired_codes(x1, x2, h: int, increments: bool) -> tuple[np.ndarray, np.ndarray]:
    h = _check_order(h)
    a = np.asarray(x1, dtype=float)
    b = np.asarray(x2, dtype=float)
    if a.ndim != 1 or b.ndim != 1:
        raise InvalidInputError("inputs must be one-dimensional")
    if a.shape != b.shape:
        raise InvalidInputError(f"length mismatch: {a.size} vs {b.size}")
    need = h if increments else h + 1
    if a.size < need:
        kind = "increments" if increments else "values"
        raise InvalidInputError(f"need at least {need} {kind} for order {h}, got {a.size}")
    encode = increment_window_codes if increments else window_codes
    return encode(a, h), encode(b, h)


def estimate_p(x1, x2, h: int, increments: bool = False) -> float:
    """Fraction of windows in which both series share the ordinal pattern.

    Parameters
    ----------
    x1, x2 : array_like
        Raw series of equal length ``N`` (``N - h`` windows), or increment
        series when ``increments`` is true (``N - h + 1`` windows).
    h : int
        Pattern order.
    """
    c1, c2 = _paired_codes(x1, x2, h, increments)
    return float(np.count_nonzero(c1 == c2) / c1.size)


def _q_from_codes(c1: np.ndarray, c2: np.ndarray, h: int) -> float:
    size = math.factorial(h + 1)
    f1 = np.bincount(c1, minlength=size) / c1.size
    f2 = np.bincount(c2, minlength=size) / c2.size
    return float(np.dot(f1, f2))


def estimate_q(x1, x2, h: int, increments: bool = False) -> float:
    """Sum over patterns of the product of the two empirical pattern frequencies."""
    c1, c2 = _paired_codes(x1, x2, h, increments)
    return _q_from_codes(c1, c2, h)


def estimate_opd(x1, x2, h: int, increments: bool = False) -> OpdEstimate:
    """Estimate ``p``, ``q`` and ``(p - q) / (1 - q)`` in one pass.

    Raises
    ------
    DegenerateMarginalsError
        If the estimated ``q`` is numerically one (both series are stuck on a
        single common pattern).
    """
    c1, c2 = _paired_codes(x1, x2, h, increments)
    p_hat = float(np.count_nonzero(c1 == c2) / c1.size)
    q_hat = _q_from_codes(c1, c2, h)
    if q_hat >= Q_CEILING:
        raise DegenerateMarginalsError(
            f"estimated q = {q_hat!r}: both series show a single common pattern"
        )
    opd = (p_hat - q_hat) / (1.0 - q_hat)
    return OpdEstimate(p_hat=p_hat, q_hat=q_hat, opd=opd, h=int(h), n=int(c1.size))


def signed_opd(x1, x2, h: int, increments: bool = False) -> float:
    """Positive minus negative dependence: ``OPD(x1, x2) - OPD(x1, -x2)``."""
    neg = -np.asarray(x2, dtype=float)
    return estimate_opd(x1, x2, h, increments).opd - estimate_opd(x1, neg, h, increments).opd


def theoretical_p_h1(rho: float) -> float:
    """``1/2 + arcsin(rho)/pi``: chance that two correlated normals share a sign."""
    rho = float(rho)
    if not abs(rho) < 1.0:
        raise InvalidParameterError(f"|rho| must be below 1, got {rho}")
    return 0.5 + math.asin(rho) / math.pi


def _pattern_difference_matrix(perm: tuple[int, ...]) -> np.ndarray:
    """Rows ``x[perm[i]] - x[perm[i+1]]`` expressed in terms of the increments."""
    h = len(perm) - 1
    cum = np.tril(np.ones((h + 1, h)), k=-1)
    rows = cum[list(perm[:-1])] - cum[list(perm[1:])]
    return rows


def orthant_probability(
    cov: np.ndarray, points_log2: int = 14, scrambles: int = 16, seed: int = 0
) -> tuple[float, float]:
    """``P(W > 0)`` for ``W ~ N(0, cov)`` by separation of variables.

    The integrand is evaluated on independently scrambled Sobol point sets;
    the spread across scrambles gives the standard error. Seeding is explicit,
    so the result is reproducible regardless of call order.

    Returns
    -------
    value, std_err : float
    """
    cov = np.asarray(cov, dtype=float)
    dim = cov.shape[0]
    if dim == 1:
        return 0.5, 0.0
    chol = np.linalg.cholesky(cov)
    estimates = np.empty(scrambles)
    for k, child in enumerate(np.random.SeedSequence(seed).spawn(scrambles)):
        engine = qmc.Sobol(d=dim - 1, scramble=True, seed=np.random.Generator(np.random.Philox(child)))
        w = engine.random_base2(points_log2)
        y = np.zeros((w.shape[0], dim - 1))
        lower = np.full(w.shape[0], 0.5)  # P(W_1 <= 0)
        value = 1.0 - lower
        for i in range(1, dim):
            u = lower + w[:, i - 1] * (1.0 - lower)
            y[:, i - 1] = ndtri(np.clip(u, 1e-16, 1.0 - 1e-16))
            shift = y[:, :i] @ chol[i, :i]
            lower = ndtr(-shift / chol[i, i])
            value = value * (1.0 - lower)
        estimates[k] = value.mean()
    return float(estimates.mean()), float(estimates.std(ddof=1) / math.sqrt(scrambles))


def coincidence_probability(model: BivariateLrdModel, h: int, seed: int = 0) -> tuple[float, float]:
    """Exact ``p`` for a Gaussian model as a sum of orthant probabilities.

    For each pattern the event "both windows show it" is ``A Y > 0`` for a
    linear map ``A`` of the stacked increments ``Y``, so its probability is a
    ``2h``-dimensional normal orthant probability.

    Returns
    -------
    p : float
    std_err : float
        Integration standard error (zero for the arcsine law at ``h = 1``).
    """
    h = _check_order(h)
    if h == 1:
        r = extended_covariance(model, 1).matrix
        return theoretical_p_h1(r[0, 1] / math.sqrt(r[0, 0] * r[1, 1])), 0.0
    sigma = extended_covariance(model, h).matrix
    total = 0.0
    var = 0.0
    for pat in all_patterns(h):
        b = _pattern_difference_matrix(pat.perm)
        a = np.zeros((2 * h, 2 * h))
        a[:h, :h] = b
        a[h:, h:] = b
        val, err = orthant_probability(a @ sigma @ a.T, seed=seed)
        total += val
        var += err * err
    return total, math.sqrt(var)


def pattern_distribution(model: BivariateLrdModel, h: int, component: int = 1) -> np.ndarray:
    """Marginal pattern probabilities of one component, in code order."""
    h = _check_order(h)
    block = extended_covariance(model, h).block(component, component)
    out = []
    for pat in all_patterns(h):
        b = _pattern_difference_matrix(pat.perm)
        cov = b @ block @ b.T
        out.append(orthant_probability(cov)[0])
    return np.asarray(out)


def theoretical_q(model: BivariateLrdModel, h: int) -> float:
    """``q = sum_pi P(pattern of Y1 = pi) P(pattern of Y2 = pi)``."""
    return float(np.dot(pattern_distribution(model, h, 1), pattern_distribution(model, h, 2)))


def lrd_constant(d_star: float) -> float:
    """``C2 = 1 / (2 d (4 d - 1))`` for ``d`` in ``(1/4, 1/2)``."""
    d_star = float(d_star)
    if not (0.25 < d_star < 0.5):
        raise RegimeError(
            f"d* = {d_star} is outside (1/4, 1/2); use the short-range normalisation instead"
        )
    return 1.0 / (2.0 * d_star * (4.0 * d_star - 1.0))


def normalize_lrd(p_hat: float, p: float, n: int, d_star: float) -> float:
    """Long-memory scaling ``n^{1 - 2d} C2^{-1/2} (p_hat - p)``.

    ``n`` is the number of windows over which ``p_hat`` was averaged.
    """
    c2 = lrd_constant(d_star)
    if n < 1:
        raise InvalidParameterError(f"n must be positive, got {n}")
    return float(n ** (1.0 - 2.0 * d_star) / math.sqrt(c2) * (p_hat - p))


def normalize_srd(p_hat: float, p: float, n: int) -> float:
    """Short-memory scaling ``sqrt(n) (p_hat - p)``."""
    if n < 1:
        raise InvalidParameterError(f"n must be positive, got {n}")
    return float(math.sqrt(n) * (p_hat - p))
