"""Replicated limit experiments and distributional diagnostics."""

from __future__ import annotations

import math
import sys
import threading
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from ._runtime import (
    STREAM_NORMAL_REFERENCE,
    STREAM_PILOT,
    STREAM_REPLICATION,
    chunk_sizes,
    make_rng,
    ordered_map,
    seed_sequence,
)
from .errors import InvalidInputError, InvalidParameterError, OpdLabError, RegimeError
from .estimators import (
    coincidence_probability,
    estimate_p,
    lrd_constant,
    normalize_lrd,
    normalize_srd,
)
from .hermite import LimitWeights, _draw_factor, hermite_coeff_matrix
from .ordinal import increment_codes_batch
from .processgen import BivariateLrdModel, extended_covariance, simulate_bivariate
from .rosenblatt import weighted_limit_samples

KS_ALPHA = 0.01
PILOT_GUARD_RATIO = 0.1


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings of one replicated limit experiment.

    Attributes
    ----------
    model : BivariateLrdModel
    h : int
        Pattern order.
    path_n : int
        Number of increments per simulated path; ``path_n - h + 1`` windows.
    replications : int
        At least 2.
    regime : {"lrd", "srd"}
        Must agree with ``model.d_star``: ``"lrd"`` iff ``1/4 < d* < 1/2``.
    true_p : float, "auto" or "estimate"
        ``"auto"`` evaluates ``p`` exactly (arcsine law for ``h = 1``, Gaussian
        orthant integration otherwise); ``"estimate"`` uses a pilot Monte Carlo
        run of ``pilot_draws`` exact windows.
    master_seed : int
    """

    model: BivariateLrdModel
    h: int
    path_n: int
    replications: int
    regime: str
    master_seed: int
    true_p: float | str = "auto"
    pilot_draws: int = 10**7

    def __post_init__(self):
        if self.h not in (1, 2, 3):
            raise InvalidParameterError(f"h must be 1, 2 or 3, got {self.h}")
        if self.path_n < self.h + 1:
            raise InvalidParameterError(f"path_n must exceed h, got {self.path_n}")
        if self.replications < 2:
            raise InvalidParameterError(f"replications must be at least 2, got {self.replications}")
        if self.regime not in ("lrd", "srd"):
            raise InvalidParameterError(f"regime must be 'lrd' or 'srd', got {self.regime!r}")
        d = self.model.d_star
        if self.regime == "lrd" and not (0.25 < d < 0.5):
            raise RegimeError(f"regime 'lrd' needs 1/4 < d* < 1/2, but d* = {d:.4g}")
        if self.regime == "srd" and d >= 0.25:
            raise RegimeError(f"regime 'srd' needs d* < 1/4, but d* = {d:.4g}")
        if isinstance(self.true_p, str):
            if self.true_p not in ("auto", "estimate"):
                raise InvalidParameterError(f"true_p must be a number, 'auto' or 'estimate', got {self.true_p!r}")
        elif not (0.0 < float(self.true_p) < 1.0):
            raise InvalidParameterError(f"true_p must lie in (0, 1), got {self.true_p}")
        if self.pilot_draws < 10**4:
            raise InvalidParameterError(f"pilot_draws must be at least 10^4, got {self.pilot_draws}")
        if self.master_seed < 0:
            raise InvalidParameterError(f"master_seed must be non-negative, got {self.master_seed}")

    @property
    def windows(self) -> int:
        return self.path_n - self.h + 1

    def normalization_factor(self) -> float:
        """Multiplier applied to ``p_hat - p``."""
        n = self.windows
        if self.regime == "srd":
            return math.sqrt(n)
        d = self.model.d_star
        return n ** (1.0 - 2.0 * d) / math.sqrt(lrd_constant(d))

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "h": self.h,
            "path_n": self.path_n,
            "replications": self.replications,
            "regime": self.regime,
            "true_p": self.true_p,
            "master_seed": self.master_seed,
            "pilot_draws": self.pilot_draws,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {
            "model", "h", "path_n", "replications", "regime", "true_p",
            "master_seed", "pilot_draws",
        }
        unknown = set(data) - known
        if unknown:
            raise InvalidParameterError(f"unknown experiment keys: {sorted(unknown)}")
        missing = {"model", "h", "path_n", "replications", "regime", "master_seed"} - set(data)
        if missing:
            raise InvalidParameterError(f"missing experiment keys: {sorted(missing)}")
        model_data = data["model"]
        if not isinstance(model_data, dict):
            raise InvalidParameterError("'model' must be an object with hurst, psi, phi")
        try:
            model = BivariateLrdModel(**model_data)
        except TypeError as exc:
            raise InvalidParameterError(f"bad model parameters: {exc}") from exc
        kwargs = {k: data[k] for k in known - {"model"} if k in data}
        return cls(model=model, **kwargs)


@dataclass(frozen=True)
class TrueP:
    """Value of ``p`` used for centring, with its provenance."""

    value: float
    std_err: float
    source: str


def pilot_p(model: BivariateLrdModel, h: int, draws: int, seed, threads: int | None = None) -> TrueP:
    """Estimate ``p`` from independent exact draws of one window of both series."""
    mat = np.asarray(extended_covariance(model, h).matrix)
    factor = _draw_factor(mat)

    def chunk(args) -> int:
        i, size = args
        rng = make_rng(seed_sequence(seed, STREAM_PILOT, i))
        y = rng.standard_normal((size, 2 * h)) @ factor.T
        return int(np.count_nonzero(increment_codes_batch(y[:, :h]) == increment_codes_batch(y[:, h:])))

    hits = sum(ordered_map(chunk, list(enumerate(chunk_sizes(draws, 1 << 18))), threads))
    p = hits / draws
    return TrueP(value=p, std_err=math.sqrt(p * (1.0 - p) / draws), source="pilot")


def resolve_true_p(config: ExperimentConfig, threads: int | None = None) -> TrueP:
    """The centring constant requested by ``config.true_p``."""
    if not isinstance(config.true_p, str):
        return TrueP(float(config.true_p), 0.0, "supplied")
    if config.true_p == "estimate":
        return pilot_p(config.model, config.h, config.pilot_draws, config.master_seed, threads)
    p, err = coincidence_probability(config.model, config.h)
    return TrueP(p, err, "closed_form" if config.h == 1 else "orthant")


def moments(samples) -> dict:
    """Mean, unbiased variance, bias-corrected skewness and (non-excess) kurtosis.

    For a constant sample skewness and kurtosis are reported as ``None`` with
    ``degenerate = True``.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or x.size < 4:
        raise InvalidInputError(f"moments need at least 4 values, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("samples contain non-finite values")
    mean = float(np.mean(x))
    var = float(np.var(x, ddof=1))
    if var <= 1e-300 or np.ptp(x) == 0.0:
        return {"mean": mean, "variance": 0.0, "skewness": None, "kurtosis": None, "degenerate": True}
    return {
        "mean": mean,
        "variance": var,
        "skewness": float(stats.skew(x, bias=False)),
        "kurtosis": float(stats.kurtosis(x, fisher=False, bias=False)),
        "degenerate": False,
    }


def skewness_std_err(n: int) -> float:
    """Standard error of the bias-corrected sample skewness under normality."""
    return math.sqrt(6.0 * n * (n - 1) / ((n - 2) * (n + 1) * (n + 3)))


def ks_statistic(samples, reference) -> float:
    """Two-sample Kolmogorov-Smirnov statistic ``sup |F1 - F2|``."""
    a = np.sort(np.asarray(samples, dtype=float))
    b = np.sort(np.asarray(reference, dtype=float))
    if a.size < 10 or b.size < 10:
        raise InvalidInputError("both samples need at least 10 values")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def ks_critical(m: int, n: int, alpha: float = KS_ALPHA) -> float:
    """Asymptotic two-sample critical value ``c(alpha) sqrt((m + n) / (m n))``."""
    c = math.sqrt(-0.5 * math.log(alpha / 2.0))
    return c * math.sqrt((m + n) / (m * n))


def qq_data(samples, reference) -> np.ndarray:
    """Matched quantiles, shape ``(k, 2)`` with ``k = min(len(samples), len(reference))``."""
    a = np.asarray(samples, dtype=float)
    b = np.asarray(reference, dtype=float)
    if a.size == 0 or b.size == 0:
        raise InvalidInputError("qq_data needs two non-empty samples")
    k = min(a.size, b.size)
    levels = np.linspace(0.0, 1.0, k) if k > 1 else np.array([0.5])
    return np.column_stack([np.quantile(a, levels), np.quantile(b, levels)])


def compare(samples, reference, alpha: float = KS_ALPHA) -> dict:
    """KS statistic, its critical value and whether it stays below."""
    ks = ks_statistic(samples, reference)
    crit = ks_critical(len(samples), len(reference), alpha)
    return {"ks": ks, "critical": crit, "below_critical": bool(ks < crit)}


@dataclass(frozen=True)
class McSampleSet:
    """Replicated normalised statistics plus diagnostics."""

    values: np.ndarray
    config: ExperimentConfig
    diagnostics: dict
    normal_reference: np.ndarray = field(repr=False)

    def value_rows(self) -> list[tuple[int, float]]:
        return [(r, float(v)) for r, v in enumerate(self.values)]


def _replication(config: ExperimentConfig, p: float, r: int) -> float:
    try:
        path = simulate_bivariate(config.model, config.path_n, seed_sequence(config.master_seed, STREAM_REPLICATION, r))
        p_hat = estimate_p(path.y1, path.y2, config.h, increments=True)
    except OpdLabError as exc:
        raise type(exc)(f"replication {r}: {exc}") from exc
    if config.regime == "lrd":
        return normalize_lrd(p_hat, p, config.windows, config.model.d_star)
    return normalize_srd(p_hat, p, config.windows)


def run_limit_experiment(
    config: ExperimentConfig,
    threads: int | None = None,
    progress: Callable[[int, int], None] | None = None,
) -> McSampleSet:
    """Simulate ``config.replications`` paths and normalise each ``p_hat``.

    Replication ``r`` uses the seed stream ``(master_seed, REPLICATION, r)``;
    values are merged by index, so the result is independent of ``threads``.
    """
    truth = resolve_true_p(config, threads)
    total = config.replications
    done = [0]
    lock = threading.Lock()

    def work(r: int) -> float:
        val = _replication(config, truth.value, r)
        if progress is not None:
            with lock:
                done[0] += 1
                progress(done[0], total)
        return val

    values = np.asarray(ordered_map(work, range(total), threads), dtype=float)
    mom = moments(values)
    sd = math.sqrt(mom["variance"])
    normal_ref = make_rng(config.master_seed, STREAM_NORMAL_REFERENCE).normal(mom["mean"], sd, total)
    vs_normal = compare(values, normal_ref)
    skew_se = skewness_std_err(total)
    diag = {
        **mom,
        "replications": total,
        "windows": config.windows,
        "true_p": truth.value,
        "true_p_std_err": truth.std_err,
        "true_p_source": truth.source,
        "skewness_std_err": skew_se,
        "skewness_z": None if mom["skewness"] is None else mom["skewness"] / skew_se,
        "skewness_significant": bool(mom["skewness"] is not None and mom["skewness"] > 4.0 * skew_se),
        "ks_vs_normal": vs_normal["ks"],
        "ks_critical": vs_normal["critical"],
        "ks_vs_normal_below_critical": vs_normal["below_critical"],
    }
    if truth.source == "pilot":
        shift = truth.std_err * config.normalization_factor()
        diag["pilot_shift_std_err"] = shift
        diag["pilot_guard_ok"] = bool(sd > 0.0 and shift < PILOT_GUARD_RATIO * sd)
    return McSampleSet(values=values, config=config, diagnostics=diag, normal_reference=normal_ref)


def limit_reference(
    config: ExperimentConfig,
    draws: int | None = None,
    weights: LimitWeights | None = None,
    weight_reps: int = 10**6,
    inner_n: int | None = None,
    threads: int | None = None,
) -> tuple[np.ndarray, LimitWeights]:
    """Draws from the long-memory limit law of the experiment's statistic.

    The Hermite weights are estimated with seed ``master_seed`` (weights
    stream) unless supplied; the Rosenblatt pairs use the limit-reference
    stream. ``inner_n`` defaults to ``max(path_n, 10^5)``.
    """
    if config.regime != "lrd":
        raise RegimeError("a Rosenblatt-type reference exists only for the long-memory regime")
    if weights is None:
        weights = hermite_coeff_matrix(config.model, config.h, weight_reps, config.master_seed, threads)
    n_ref = config.replications if draws is None else int(draws)
    inner = max(config.path_n, 100_000) if inner_n is None else int(inner_n)
    ref = weighted_limit_samples(weights, config.model, inner, n_ref, config.master_seed, threads)
    return ref, weights


def default_progress(done: int, total: int) -> None:
    """Replication counter on standard error."""
    if done == total or done % max(1, total // 20) == 0:
        print(f"\rreplication {done}/{total}", end="\n" if done == total else "", file=sys.stderr, flush=True)


__all__ = [
    "ExperimentConfig",
    "McSampleSet",
    "TrueP",
    "compare",
    "default_progress",
    "ks_critical",
    "ks_statistic",
    "limit_reference",
    "moments",
    "pilot_p",
    "qq_data",
    "resolve_true_p",
    "run_limit_experiment",
    "skewness_std_err",
]
