"""Exact fractional Gaussian noise and the bivariate long-memory model.

Paths are generated by circulant embedding (Davies-Harte). The bivariate
model mixes two independent fGn sequences,

    Y1 = U1,    Y2 = psi * U1 + phi * U2,

so that all four auto- and cross-correlation functions are multiples of the
fGn autocovariance.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._runtime import make_rng
from .errors import (
    GenerationError,
    InvalidInputError,
    InvalidParameterError,
    ModelInconsistencyError,
)

EIGEN_TOLERANCE = 1e-9
PSD_TOLERANCE = 1e-10


def _check_hurst(hurst: float, name: str = "hurst") -> float:
    hurst = float(hurst)
    if not (0.0 < hurst < 1.0):
        raise InvalidParameterError(f"{name} must lie in the open interval (0, 1), got {hurst}")
    return hurst


def _check_length(n: int) -> int:
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidParameterError(f"n must be a positive integer, got {n!r}")
    return int(n)


def fgn_autocovariance(hurst: float, lag):
    """Autocovariance of unit-variance fractional Gaussian noise.

    Parameters
    ----------
    hurst : float
        Hurst parameter in (0, 1).
    lag : int or array_like of int
        Lag(s); negative lags are folded by symmetry.

    Returns
    -------
    float or numpy.ndarray
        ``0.5 * (|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H})``.
    """
    hurst = _check_hurst(hurst)
    k = np.abs(np.asarray(lag, dtype=float))
    two_h = 2.0 * hurst
    out = 0.5 * (np.abs(k + 1.0) ** two_h - 2.0 * k**two_h + np.abs(k - 1.0) ** two_h)
    out = np.where(k == 0, 1.0, out)
    return float(out) if out.ndim == 0 else out


def fgn_tail_constant(hurst: float) -> float:
    """Constant ``L`` in ``gamma(k) ~ L * k^{2H - 2}``, equal to ``d(2d + 1)``."""
    d = _check_hurst(hurst) - 0.5
    return d * (2.0 * d + 1.0)


@lru_cache(maxsize=32)
def _embedding_sqrt_eigenvalues(hurst: float, n: int) -> np.ndarray:
    """``sqrt(lambda / M)`` for the circulant embedding of size ``M = 2n``."""
    gamma = fgn_autocovariance(hurst, np.arange(n + 1))
    row = np.concatenate([gamma, gamma[-2:0:-1]])
    eig = np.fft.fft(row).real
    top = float(np.max(eig))
    low = float(np.min(eig))
    if low < -EIGEN_TOLERANCE * top:
        raise GenerationError(
            f"circulant embedding has eigenvalue {low:.3e} (max {top:.3e}) for H={hurst}, n={n}"
        )
    out = np.sqrt(np.clip(eig, 0.0, None) / row.size)
    out.setflags(write=False)
    return out


def _fgn_complex(hurst: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """One FFT whose real and imaginary parts are independent fGn paths."""
    scale = _embedding_sqrt_eigenvalues(hurst, n)
    m = scale.size
    z = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    return np.fft.fft(scale * z)[:n]


def simulate_fgn(hurst: float, n: int, seed) -> np.ndarray:
    """Exact unit-variance fractional Gaussian noise of length ``n``.

    Parameters
    ----------
    hurst : float
        Hurst parameter in (0, 1).
    n : int
        Path length.
    seed : int, SeedSequence or Generator
        Source of randomness; integers give reproducible output.
    """
    hurst = _check_hurst(hurst)
    n = _check_length(n)
    return _fgn_complex(hurst, n, make_rng(seed)).real.copy()


def simulate_fgn_pair(hurst: float, n: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """Two independent fGn paths obtained from a single complex FFT."""
    hurst = _check_hurst(hurst)
    n = _check_length(n)
    z = _fgn_complex(hurst, n, make_rng(seed))
    return z.real.copy(), z.imag.copy()


@dataclass(frozen=True)
class BivariateLrdModel:
    """Generative parameters of ``Y1 = U1, Y2 = psi U1 + phi U2``.

    Attributes
    ----------
    hurst : float
        Hurst parameter of ``U1`` (and of ``U2`` unless overridden).
    psi, phi : float
        Mixing coefficients; ``psi**2 + phi**2 = 1`` gives a unit-variance
        second component.
    innovation_hurst : float, optional
        Hurst parameter of ``U2``. Setting it to 0.5 makes the second
        innovation white noise, which yields a mixed memory model.
    """

    hurst: float
    psi: float
    phi: float
    innovation_hurst: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "hurst", _check_hurst(self.hurst))
        object.__setattr__(self, "psi", float(self.psi))
        object.__setattr__(self, "phi", float(self.phi))
        if not (math.isfinite(self.psi) and math.isfinite(self.phi)):
            raise InvalidParameterError("psi and phi must be finite")
        if self.phi == 0.0:
            raise InvalidParameterError(
                "phi must be non-zero; otherwise the components are perfectly correlated"
            )
        if self.innovation_hurst is not None:
            object.__setattr__(
                self, "innovation_hurst", _check_hurst(self.innovation_hurst, "innovation_hurst")
            )

    @classmethod
    def unit_variance(cls, hurst: float, psi: float) -> "BivariateLrdModel":
        """Model with ``phi = sqrt(1 - psi**2)`` so both components have unit variance."""
        if not abs(psi) < 1.0:
            raise InvalidParameterError(f"|psi| must be below 1 for unit variance, got {psi}")
        return cls(hurst=hurst, psi=psi, phi=math.sqrt(1.0 - psi * psi))

    @property
    def d_star(self) -> float:
        return self.hurst - 0.5

    @property
    def second_hurst(self) -> float:
        return self.hurst if self.innovation_hurst is None else self.innovation_hurst

    @property
    def is_mixed(self) -> bool:
        """True when the two innovations have different memory parameters."""
        return self.second_hurst != self.hurst

    @property
    def variance2(self) -> float:
        return self.psi**2 + self.phi**2

    def l_matrix(self) -> np.ndarray:
        """Tail constants ``L_pq`` with ``r_pq(k) ~ L_pq k^{2d - 1}``.

        For a mixed model the white-noise part of the second component does
        not contribute to the tail, so ``L_22 = psi^2 L_11``.
        """
        l11 = fgn_tail_constant(self.hurst)
        l22 = self.psi**2 * l11 if self.is_mixed else self.variance2 * l11
        return np.array([[l11, self.psi * l11], [self.psi * l11, l22]])

    def cross_correlation(self, p: int, q: int, k):
        """Shorthand for :func:`model_cross_correlation`."""
        return model_cross_correlation(self, p, q, k)

    def to_dict(self) -> dict:
        out = {"hurst": self.hurst, "psi": self.psi, "phi": self.phi}
        if self.innovation_hurst is not None:
            out["innovation_hurst"] = self.innovation_hurst
        return out


def model_cross_correlation(model: BivariateLrdModel, p: int, q: int, k):
    """Cross-covariance ``r_pq(k) = E[Y_p(j) Y_q(j + k)]`` for ``p, q`` in ``{1, 2}``."""
    if p not in (1, 2) or q not in (1, 2):
        raise InvalidParameterError(f"component indices must be 1 or 2, got ({p}, {q})")
    g1 = fgn_autocovariance(model.hurst, k)
    if (p, q) == (1, 1):
        return g1
    if p != q:
        return model.psi * g1
    g2 = fgn_autocovariance(model.second_hurst, k)
    return model.psi**2 * g1 + model.phi**2 * g2


@dataclass(frozen=True)
class BivariatePath:
    """A simulated pair of increment series."""

    y1: np.ndarray
    y2: np.ndarray
    model: BivariateLrdModel
    seed: int | None = None

    def __post_init__(self):
        if self.y1.shape != self.y2.shape or self.y1.ndim != 1 or self.y1.size < 1:
            raise InvalidInputError("y1 and y2 must be non-empty vectors of equal length")

    @property
    def n(self) -> int:
        return int(self.y1.size)

    def cumulative(self) -> tuple[np.ndarray, np.ndarray]:
        """Integrated series ``X_p(j) = sum_{i <= j} Y_p(i)``."""
        return np.cumsum(self.y1), np.cumsum(self.y2)


def simulate_bivariate(model: BivariateLrdModel, n: int, seed) -> BivariatePath:
    """Draw ``n`` steps of the bivariate model.

    When both innovations share a Hurst parameter a single complex FFT gives
    both of them; otherwise ``U2`` is generated separately.
    """
    n = _check_length(n)
    rng = make_rng(seed)
    if model.is_mixed:
        u1 = _fgn_complex(model.hurst, n, rng).real
        u2 = _fgn_complex(model.second_hurst, n, rng).real
    else:
        z = _fgn_complex(model.hurst, n, rng)
        u1, u2 = z.real, z.imag
    y1 = u1.copy()
    y2 = model.psi * u1 + model.phi * u2
    recorded = int(seed) if isinstance(seed, (int, np.integer)) else None
    return BivariatePath(y1=y1, y2=y2, model=model, seed=recorded)


@dataclass(frozen=True)
class ExtendedCovariance:
    """Covariance of the stacked increment vector of both series.

    The vector is ``(Y1(1), ..., Y1(h), Y2(1), ..., Y2(h))``; ``matrix`` is
    ``2h x 2h`` with Toeplitz blocks ``r_pq(i - k)``.
    """

    h: int
    matrix: np.ndarray
    d: int = field(default=2)

    def block(self, p: int, q: int) -> np.ndarray:
        """The ``h x h`` block for components ``p, q`` in ``{1, 2}``."""
        h = self.h
        return self.matrix[(p - 1) * h : p * h, (q - 1) * h : q * h]


def extended_covariance(model: BivariateLrdModel, h: int) -> ExtendedCovariance:
    """Assemble the ``2h x 2h`` covariance of the stacked increments.

    Entry ``(a, b)`` with ``a = (p-1) h + i`` and ``b = (q-1) h + k``
    (``0 <= i, k < h``) equals ``r_pq(k - i)``.
    """
    if isinstance(h, bool) or not isinstance(h, (int, np.integer)) or h < 1:
        raise InvalidParameterError(f"h must be a positive integer, got {h!r}")
    h = int(h)
    lags = np.arange(h)[None, :] - np.arange(h)[:, None]
    blocks = [[model_cross_correlation(model, p, q, lags) for q in (1, 2)] for p in (1, 2)]
    mat = np.block(blocks)
    mat = 0.5 * (mat + mat.T)
    low = float(np.linalg.eigvalsh(mat).min())
    if low < -PSD_TOLERANCE:
        raise ModelInconsistencyError(f"extended covariance is not PSD (min eigenvalue {low:.3e})")
    mat.setflags(write=False)
    return ExtendedCovariance(h=h, matrix=mat)


def segment_covariance(model: BivariateLrdModel, length: int) -> np.ndarray:
    """Covariance of ``(Y1(1..length), Y2(1..length))``; same layout as the extended covariance."""
    lags = np.arange(length)[None, :] - np.arange(length)[:, None]
    return np.block(
        [[model_cross_correlation(model, p, q, lags) for q in (1, 2)] for p in (1, 2)]
    )


def sum_squared_autocovariance(hurst: float, n: int) -> float:
    """``sum_{j,k=1..n} gamma(j - k)^2`` for unit fGn, in O(n)."""
    n = _check_length(n)
    k = np.arange(1, n)
    g = fgn_autocovariance(hurst, k) if n > 1 else np.zeros(0)
    return float(n + 2.0 * np.sum((n - k) * g * g))


def path_to_csv(path: BivariatePath, cumulative: bool = False) -> str:
    """CSV text with header ``j,y1,y2``; ``cumulative`` writes the integrated series."""
    from .io import format_float

    y1, y2 = path.cumulative() if cumulative else (path.y1, path.y2)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["j", "y1", "y2"])
    for j, (a, b) in enumerate(zip(y1.tolist(), y2.tolist())):
        writer.writerow([j, format_float(a), format_float(b)])
    return buf.getvalue()


def model_config(model: BivariateLrdModel, n: int, seed: int) -> dict:
    """JSON-ready ``{hurst, psi, phi, n, seed}`` record."""
    return {**model.to_dict(), "n": int(n), "seed": int(seed)}


def model_config_json(model: BivariateLrdModel, n: int, seed: int) -> str:
    return json.dumps(model_config(model, n, seed), sort_keys=True)


__all__ = [
    "BivariateLrdModel",
    "BivariatePath",
    "ExtendedCovariance",
    "extended_covariance",
    "fgn_autocovariance",
    "fgn_tail_constant",
    "model_config",
    "model_cross_correlation",
    "path_to_csv",
    "segment_covariance",
    "simulate_bivariate",
    "simulate_fgn",
    "simulate_fgn_pair",
    "sum_squared_autocovariance",
]
