"""Rosenblatt variables from normalised quadratic partial sums of fGn.

For unit fGn ``X`` with ``d = H - 1/2`` in ``(1/4, 1/2)`` the centred sum
``sum_j (X_j^2 - 1)`` grows like ``n^{2d}`` and, once standardised, converges
to a unit-variance Rosenblatt law. Two standardisations are offered:

``"exact"`` (default)
    divide by the exact finite-``n`` standard deviation
    ``sqrt(2 sum_{j,k} gamma(j - k)^2)``;
``"asymptotic"``
    divide by ``n^{2d} sqrt(2 C2) L`` with ``L = d(2d + 1)``. Both agree in
    the limit; the asymptotic one is biased low at moderate ``n`` for ``d``
    close to 1/4 (about 5% in standard deviation at ``d = 0.3, n = 10^5``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._runtime import STREAM_LIMIT_REFERENCE, STREAM_ROSENBLATT, make_rng, ordered_map
from .errors import AssumptionError, InvalidParameterError, RegimeError
from .estimators import lrd_constant
from .hermite import LimitWeights
from .processgen import (
    BivariateLrdModel,
    _fgn_complex,
    fgn_tail_constant,
    model_cross_correlation,
    sum_squared_autocovariance,
)

MIN_INNER_N = 1000
STANDARDIZATIONS = ("exact", "asymptotic")


def _check_d_star(d_star: float) -> float:
    d_star = float(d_star)
    if not (0.25 < d_star < 0.5):
        raise RegimeError(f"d* must lie in (1/4, 1/2) for a Rosenblatt limit, got {d_star}")
    return d_star


def _check_inner_n(inner_n: int) -> int:
    if isinstance(inner_n, bool) or not isinstance(inner_n, (int, np.integer)):
        raise InvalidParameterError(f"inner_n must be an integer, got {inner_n!r}")
    if inner_n < MIN_INNER_N:
        raise InvalidParameterError(f"inner_n must be at least {MIN_INNER_N}, got {inner_n}")
    return int(inner_n)


def quadratic_sum_scale(d_star: float, inner_n: int, standardization: str = "exact") -> float:
    """Divisor that turns ``sum (X_j^2 - 1)`` into a unit-variance statistic."""
    d_star = _check_d_star(d_star)
    hurst = d_star + 0.5
    if standardization == "exact":
        return math.sqrt(2.0 * sum_squared_autocovariance(hurst, inner_n))
    if standardization == "asymptotic":
        return (
            inner_n ** (2.0 * d_star)
            * math.sqrt(2.0 * lrd_constant(d_star))
            * fgn_tail_constant(hurst)
        )
    raise InvalidParameterError(
        f"standardization must be one of {STANDARDIZATIONS}, got {standardization!r}"
    )


def _quadratic_sum(x: np.ndarray) -> float:
    return float(np.sum(x * x - 1.0))


def sample_rosenblatt(
    d_star: float, inner_n: int = 100_000, seed=0, standardization: str = "exact"
) -> float:
    """One approximately standard Rosenblatt draw.

    Parameters
    ----------
    d_star : float
        Memory parameter in (1/4, 1/2); the fGn has ``H = d_star + 1/2``.
    inner_n : int
        Partial-sum length, at least 1000.
    seed : int, SeedSequence or Generator
    standardization : {"exact", "asymptotic"}
    """
    d_star = _check_d_star(d_star)
    inner_n = _check_inner_n(inner_n)
    scale = quadratic_sum_scale(d_star, inner_n, standardization)
    x = _fgn_complex(d_star + 0.5, inner_n, make_rng(seed)).real
    return _quadratic_sum(x) / scale


@dataclass(frozen=True)
class RosenblattBatch:
    """Independent Rosenblatt draws with their provenance."""

    values: np.ndarray
    d_star: float
    inner_n: int
    master_seed: int
    standardization: str = "exact"

    @property
    def draws(self) -> int:
        return int(self.values.size)

    def sidecar(self) -> dict:
        return {
            "d_star": self.d_star,
            "inner_n": self.inner_n,
            "draws": self.draws,
            "master_seed": self.master_seed,
            "standardization": self.standardization,
        }


def sample_rosenblatt_batch(
    d_star: float,
    inner_n: int,
    draws: int,
    master_seed: int,
    threads: int | None = None,
    standardization: str = "exact",
) -> RosenblattBatch:
    """``draws`` independent Rosenblatt values.

    Draws ``2k`` and ``2k + 1`` are the real and imaginary parts of one
    complex circulant-embedding FFT seeded by ``(master_seed, ROSENBLATT, k)``,
    so the output depends only on the seed, never on the thread count.
    """
    d_star = _check_d_star(d_star)
    inner_n = _check_inner_n(inner_n)
    if draws < 1:
        raise InvalidParameterError(f"draws must be positive, got {draws}")
    scale = quadratic_sum_scale(d_star, inner_n, standardization)
    hurst = d_star + 0.5

    def block(k: int) -> tuple[float, float]:
        rng = make_rng(master_seed, STREAM_ROSENBLATT, k)
        z = _fgn_complex(hurst, inner_n, rng)
        return _quadratic_sum(z.real) / scale, _quadratic_sum(z.imag) / scale

    pairs = ordered_map(block, range((draws + 1) // 2), threads)
    values = np.asarray(pairs, dtype=float).reshape(-1)[:draws]
    return RosenblattBatch(
        values=values,
        d_star=d_star,
        inner_n=inner_n,
        master_seed=int(master_seed),
        standardization=standardization,
    )


def _pair_scales(model: BivariateLrdModel) -> tuple[float, float]:
    v1 = float(model_cross_correlation(model, 1, 1, 0))
    v2 = float(model_cross_correlation(model, 2, 2, 0))
    r12 = float(model_cross_correlation(model, 1, 2, 0))
    minus = v1 + v2 - 2.0 * r12
    plus = v1 + v2 + 2.0 * r12
    if minus <= 0.0 or plus <= 0.0:
        raise InvalidParameterError("components are perfectly (anti-)correlated at lag zero")
    return math.sqrt(minus), math.sqrt(plus)


def transformed_processes(model: BivariateLrdModel, y1, y2) -> tuple[np.ndarray, np.ndarray]:
    """Difference and sum processes, each scaled to unit variance.

    ``Y* = (Y2 - Y1) / sd`` and ``Y** = (Y1 + Y2) / sd`` with the model
    standard deviations; for unit-variance components the divisors are
    ``sqrt(2 -+ 2 r12(0))``.
    """
    s_minus, s_plus = _pair_scales(model)
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    return (y2 - y1) / s_minus, (y1 + y2) / s_plus


def _check_pair_model(model: BivariateLrdModel) -> None:
    if model.is_mixed:
        raise AssumptionError(
            "the Rosenblatt pair needs equal memory in both components; "
            "a white-noise innovation gives a mixed model"
        )
    _check_d_star(model.d_star)
    lm = model.l_matrix()
    if math.isclose(lm[0, 0] + lm[1, 1], lm[0, 1] + lm[1, 0], rel_tol=1e-12, abs_tol=1e-15):
        raise AssumptionError("tail constants violate L11 + L22 != L12 + L21")
    _pair_scales(model)


def _pair_from_path(model: BivariateLrdModel, z: np.ndarray, scale: float) -> tuple[float, float]:
    u1, u2 = z.real, z.imag
    y1 = u1
    y2 = model.psi * u1 + model.phi * u2
    ys, yss = transformed_processes(model, y1, y2)
    return _quadratic_sum(ys) / scale, _quadratic_sum(yss) / scale


def sample_rosenblatt_pair(
    model: BivariateLrdModel, inner_n: int = 100_000, seed=0, standardization: str = "exact"
) -> tuple[float, float]:
    """Standardised quadratic sums of the difference and sum processes.

    Both transformed processes are unit fGn with the model's Hurst parameter,
    so each coordinate is approximately standard Rosenblatt; their covariance
    tends to :func:`rosenblatt_cov` of the model's tail constants.
    """
    _check_pair_model(model)
    inner_n = _check_inner_n(inner_n)
    scale = quadratic_sum_scale(model.d_star, inner_n, standardization)
    z = _fgn_complex(model.hurst, inner_n, make_rng(seed))
    return _pair_from_path(model, z, scale)


def sample_rosenblatt_pairs(
    model: BivariateLrdModel,
    inner_n: int,
    draws: int,
    master_seed: int,
    threads: int | None = None,
    standardization: str = "exact",
    stream: int = STREAM_ROSENBLATT,
) -> np.ndarray:
    """Array of shape ``(draws, 2)``; row ``i`` uses seed ``(master_seed, stream, i)``."""
    _check_pair_model(model)
    inner_n = _check_inner_n(inner_n)
    if draws < 1:
        raise InvalidParameterError(f"draws must be positive, got {draws}")
    scale = quadratic_sum_scale(model.d_star, inner_n, standardization)

    def one(i: int) -> tuple[float, float]:
        z = _fgn_complex(model.hurst, inner_n, make_rng(master_seed, stream, i))
        return _pair_from_path(model, z, scale)

    return np.asarray(ordered_map(one, range(draws), threads), dtype=float)


def rosenblatt_cov(l_matrix) -> float:
    """``(L22 - L11)^2 / ((L11 + L22)^2 - (L12 + L21)^2)``."""
    lm = np.asarray(l_matrix, dtype=float)
    if lm.shape != (2, 2):
        raise InvalidParameterError(f"L must be 2x2, got shape {lm.shape}")
    denom = (lm[0, 0] + lm[1, 1]) ** 2 - (lm[0, 1] + lm[1, 0]) ** 2
    if denom == 0.0:
        raise AssumptionError("(L11 + L22)^2 equals (L12 + L21)^2; the covariance is undefined")
    return float((lm[1, 1] - lm[0, 0]) ** 2 / denom)


def limit_mixture_weights(weights: LimitWeights, model: BivariateLrdModel) -> tuple[float, float]:
    """Coefficients ``(w1, w2)`` with ``normalize_lrd(...) -> w1 Z* + w2 Z**``.

    With ``a = alpha_tilde`` (diagonal averaged) and tail constants ``L``::

        w1 = (a11 - a12) (L22 - L21 - L12 + L11) / (2 sqrt 2)
        w2 = (a11 + a12) (L22 + L21 + L12 + L11) / (2 sqrt 2)

    The ``1/sqrt 2`` comes from the factor 1/2 in the second-order Hermite
    projection ``f - p ~ 1/2 (Y'AY - E Y'AY)``.

    Raises
    ------
    AssumptionError
        If the two components do not share the same autocorrelation function,
        which the decomposition into difference and sum processes requires.
    """
    _check_pair_model(model)
    if not math.isclose(model.variance2, 1.0, rel_tol=0.0, abs_tol=1e-12):
        raise AssumptionError(
            f"the limit mixture needs equal autocorrelations (psi^2 + phi^2 = 1), "
            f"got {model.variance2}"
        )
    at = np.asarray(weights.alpha_tilde, dtype=float)
    a11 = 0.5 * (at[0, 0] + at[1, 1])
    a12 = 0.5 * (at[0, 1] + at[1, 0])
    lm = model.l_matrix()
    minus = lm[1, 1] - lm[1, 0] - lm[0, 1] + lm[0, 0]
    plus = lm[1, 1] + lm[1, 0] + lm[0, 1] + lm[0, 0]
    root2 = math.sqrt(2.0)
    return (a11 - a12) * minus / (2.0 * root2), (a11 + a12) * plus / (2.0 * root2)


def weighted_limit_sample(
    weights: LimitWeights,
    model: BivariateLrdModel,
    inner_n: int = 100_000,
    seed=0,
    standardization: str = "exact",
) -> float:
    """One draw of the long-memory limit ``w1 Z* + w2 Z**`` of the normalised estimator."""
    w1, w2 = limit_mixture_weights(weights, model)
    z1, z2 = sample_rosenblatt_pair(model, inner_n, seed, standardization)
    return w1 * z1 + w2 * z2


def weighted_limit_samples(
    weights: LimitWeights,
    model: BivariateLrdModel,
    inner_n: int,
    draws: int,
    master_seed: int,
    threads: int | None = None,
    standardization: str = "exact",
) -> np.ndarray:
    """Batch of limit draws; draw ``i`` uses seed ``(master_seed, LIMIT_REFERENCE, i)``."""
    w1, w2 = limit_mixture_weights(weights, model)
    pairs = sample_rosenblatt_pairs(
        model, inner_n, draws, master_seed, threads, standardization, stream=STREAM_LIMIT_REFERENCE
    )
    return w1 * pairs[:, 0] + w2 * pairs[:, 1]


__all__ = [
    "RosenblattBatch",
    "limit_mixture_weights",
    "quadratic_sum_scale",
    "rosenblatt_cov",
    "sample_rosenblatt",
    "sample_rosenblatt_batch",
    "sample_rosenblatt_pair",
    "sample_rosenblatt_pairs",
    "transformed_processes",
    "weighted_limit_sample",
    "weighted_limit_samples",
]
