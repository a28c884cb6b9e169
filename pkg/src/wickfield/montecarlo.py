"""Seeded Monte Carlo estimators for Wick-power moments, with exact
values from the combinatorial modules as the reference.

Sampling is sharded: the sample budget is cut into fixed batches, each
driven by its own counter-based substream derived from the master seed
by stream jumps. The shard layout depends only on the configuration,
never on the worker count, so estimates are bit-reproducible whether
shards run serially or on a thread pool. Standard errors come from a
delete-one-shard jackknife.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .wick import hermite_wick_value

HERMITE_DEGREE_CAP = 8


class UnstableEstimateWarning(UserWarning):
    """Raised when the jackknife error bar dominates the estimate."""


@dataclass(frozen=True)
class SampleConfig:
    seed: int
    n_samples: int
    batch_size: int = 1 << 14
    workers: int = 1

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValidationError("n_samples must be positive")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be positive")
        if self.workers < 1:
            raise ValidationError("workers must be positive")

    def shard_sizes(self) -> list[int]:
        """Deterministic decomposition of the budget into batches."""
        full, rem = divmod(self.n_samples, self.batch_size)
        sizes = [self.batch_size] * full
        if rem:
            sizes.append(rem)
        return sizes


@dataclass(frozen=True)
class MonteCarloEstimate:
    value: float
    stderr: float
    n_samples: int
    n_shards: int

    def within(self, exact: float, n_sigma: float = 4.0) -> bool:
        """Whether exact lies inside the n_sigma error band."""
        return abs(self.value - float(exact)) <= n_sigma * self.stderr


def _shard_generator(seed: int, shard_index: int) -> np.random.Generator:
    """Independent substream for one shard.

    Philox is counter-based; jumped(k) advances by k * 2^128 draws, so
    shards never overlap regardless of how much each consumes.
    """
    return np.random.Generator(np.random.Philox(key=seed).jumped(shard_index))


def _cholesky(G) -> np.ndarray:
    arr = np.asarray(G, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValidationError("covariance must be a square matrix")
    try:
        return np.linalg.cholesky(arr)
    except np.linalg.LinAlgError as exc:
        raise ValidationError(f"covariance is not positive definite: {exc}") from None


def sample_gaussian(G, config: SampleConfig):
    """Yield (shard_index, samples) with samples of shape (b, n).

    Exposed for tests; the estimators below consume the same stream
    layout through their shard workers.
    """
    L = _cholesky(G)
    n = L.shape[0]
    for idx, size in enumerate(config.shard_sizes()):
        rng = _shard_generator(config.seed, idx)
        yield idx, rng.standard_normal((size, n)) @ L.T


def _jackknife(shard_sums: np.ndarray, shard_counts: np.ndarray) -> tuple[float, float]:
    """Delete-one-shard jackknife mean and standard error."""
    S = shard_sums.sum()
    N = shard_counts.sum()
    mean = S / N
    B = len(shard_sums)
    if B < 2:
        return float(mean), float("inf")
    leave_out = (S - shard_sums) / (N - shard_counts)
    se = float(np.sqrt((B - 1) / B * np.sum((leave_out - leave_out.mean()) ** 2)))
    return float(mean), se


def _run_shards(worker, config: SampleConfig) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate worker(shard_index, size) for every shard, in order.

    The merge is indexed, so thread scheduling cannot permute results.
    """
    sizes = config.shard_sizes()
    sums = np.empty(len(sizes))
    if config.workers == 1:
        for idx, size in enumerate(sizes):
            sums[idx] = worker(idx, size)
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            for idx, value in enumerate(pool.map(worker, range(len(sizes)), sizes)):
                sums[idx] = value
    return sums, np.asarray(sizes, dtype=float)


def _finish(shard_sums, shard_counts, config) -> MonteCarloEstimate:
    mean, se = _jackknife(shard_sums, shard_counts)
    est = MonteCarloEstimate(mean, se, config.n_samples, len(shard_sums))
    if se > abs(mean) and abs(mean) > 0:
        warnings.warn(
            f"standard error {se:.3g} exceeds |estimate| {abs(mean):.3g}",
            UnstableEstimateWarning,
            stacklevel=3,
        )
    return est


def estimate_wick_moment(
    G, sites: Sequence[int], degrees: Sequence[int], config: SampleConfig
) -> MonteCarloEstimate:
    """Sample mean of prod_i He_{l_i}(X_{s_i}; G_{s_i s_i}).

    The variance-scaled Hermite polynomial He_l(x; v) realizes the Wick
    power :X^l: pathwise, so the product estimates the same moment the
    exact multigraph sum computes.
    """
    sites = list(sites)
    degrees = list(degrees)
    if len(sites) != len(degrees):
        raise ValidationError("sites and degrees must have equal length")
    if any(l < 1 for l in degrees):
        raise ValidationError("degrees must be positive")
    if any(l > HERMITE_DEGREE_CAP for l in degrees):
        raise ValidationError(f"sampled degrees capped at {HERMITE_DEGREE_CAP}")
    if len(set(sites)) != len(sites):
        raise ValidationError("sites must be distinct")
    arr = np.asarray(G, dtype=float)
    if any(not 0 <= s < arr.shape[0] for s in sites):
        raise ValidationError("site index out of range")
    L = _cholesky(arr)
    variances = [arr[s, s] for s in sites]

    def worker(idx: int, size: int) -> float:
        rng = _shard_generator(config.seed, idx)
        X = rng.standard_normal((size, arr.shape[0])) @ L.T
        prod = np.ones(size)
        for s, l, v in zip(sites, degrees, variances):
            prod *= hermite_wick_value(X[:, s], l, v)
        return float(prod.sum())

    sums, counts = _run_shards(worker, config)
    return _finish(sums, counts, config)


def estimate_complex_moment(
    G, A: Sequence[int], r: int, config: SampleConfig
) -> MonteCarloEstimate:
    """Sample mean of prod_{i in A} |Z_i|^{2r} for the circular complex
    field with relation matrix G.

    Z = X + iY with X, Y independent N(0, G/2), which gives
    E[Z_i conj(Z_j)] = G_ij and E[Z_i Z_j] = 0.
    """
    A = list(A)
    if not A:
        raise ValidationError("subset must be nonempty")
    if len(set(A)) != len(A):
        raise ValidationError("sites must be distinct")
    if r < 1:
        raise ValidationError("replication order r must be positive")
    arr = np.asarray(G, dtype=float)
    if any(not 0 <= s < arr.shape[0] for s in A):
        raise ValidationError("site index out of range")
    L = _cholesky(arr / 2.0)

    def worker(idx: int, size: int) -> float:
        rng = _shard_generator(config.seed, idx)
        X = rng.standard_normal((size, arr.shape[0])) @ L.T
        Y = rng.standard_normal((size, arr.shape[0])) @ L.T
        prod = np.ones(size)
        for s in A:
            prod *= (X[:, s] ** 2 + Y[:, s] ** 2) ** r
        return float(prod.sum())

    sums, counts = _run_shards(worker, config)
    return _finish(sums, counts, config)
