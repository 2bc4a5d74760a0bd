"""Global and local Moran statistics with permutation inference.

The global index for values x over weights W is

    I = (n / S0) * sum_ij w_ij (x_i - mu)(x_j - mu) / sum_i (x_i - mu)^2

and the local index for standardized values z is I_i = z_i * sum_j w_ij z_j.
Significance uses pseudo p-values (M+1)/(R+1) from seeded permutations;
an exhaustive mode enumerates every relabeling for small n so Monte Carlo
results can be checked exactly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ZeroVarianceError
from .weights import SpatialWeights

QUADRANTS = ("HH", "LL", "LH", "HL")
SIGNIFICANCE_TIERS = (0.05, 0.01, 0.001)


@dataclass
class ValueField:
    x: np.ndarray
    mean: float
    sigma: float  # population standard deviation
    z: np.ndarray
    zero_variance: bool


def standardize_values(x) -> ValueField:
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        raise ParameterError(f"need at least 2 values, got {len(x)}")
    mu = float(x.mean())
    sigma = float(x.std())  # population sigma, so (1/n) sum z^2 = 1
    if sigma == 0:
        return ValueField(x, mu, 0.0, np.zeros_like(x), zero_variance=True)
    return ValueField(x, mu, sigma, (x - mu) / sigma, zero_variance=False)


def _require_variance(field: ValueField) -> None:
    if field.zero_variance:
        raise ZeroVarianceError("value field is constant; Moran statistic undefined")


def _check_aligned(field: ValueField, W: SpatialWeights) -> None:
    if len(field.x) != W.n:
        raise ParameterError(f"field has {len(field.x)} values but weights cover {W.n} regions")


def spatial_lag(W: SpatialWeights, z) -> np.ndarray:
    """lag_i = sum_j w_ij z_j; islands get 0."""
    z = np.asarray(z, dtype=float)
    if len(z) != W.n:
        raise ParameterError(f"lag input length {len(z)} != {W.n} regions")
    lag = np.zeros(W.n)
    for i, (nbrs, wts) in enumerate(zip(W.neighbors, W.weights)):
        for j, w in zip(nbrs, wts):
            lag[i] += w * z[j]
    return lag


def expected_i(n: int) -> float:
    return -1.0 / (n - 1)


def _moran_stat(z: np.ndarray, W: SpatialWeights, Wmat: np.ndarray, s0: float) -> float:
    n = len(z)
    return float(n / s0 * (z @ Wmat @ z) / (z @ z))


def moran_global(field: ValueField, W: SpatialWeights) -> float:
    _require_variance(field)
    _check_aligned(field, W)
    z = field.x - field.mean
    return _moran_stat(z, W, W.dense(), W.s0)


@dataclass
class MoranGlobalResult:
    I: float
    expected: float
    permutations: int
    seed: int | None
    sided: str
    sim_mean: float
    sim_sd: float
    pseudo_p: float
    exhaustive: bool = False


def _pseudo_p(observed: float, sims: np.ndarray, reference: float, sided: str) -> float:
    """(M+1)/(R+1) with M counting simulations at least as extreme as the
    observed value on its side of the reference; a zero deviation counts
    every simulation."""
    R = len(sims)
    dev = observed - reference
    eps = 1e-12  # count float-order ties as "at least as extreme"
    if sided == "greater":
        M = int(np.sum(sims >= observed - eps))
    elif sided == "less":
        M = int(np.sum(sims <= observed + eps))
    elif sided == "one_sided_folded":
        if dev > 0:
            M = int(np.sum(sims >= observed - eps))
        elif dev < 0:
            M = int(np.sum(sims <= observed + eps))
        else:
            M = R
    else:
        raise ParameterError(f"unknown sidedness {sided!r}")
    return (M + 1) / (R + 1)


def moran_permutation(
    field: ValueField,
    W: SpatialWeights,
    permutations: int = 999,
    seed: int | None = 0,
    sided: str = "one_sided_folded",
    exhaustive: bool = False,
) -> MoranGlobalResult:
    """Permutation test of spatial independence for the global index.

    Values are shuffled across regions uniformly at random. With
    ``exhaustive=True`` every one of the n! relabelings is evaluated
    instead (n <= 9 only) and ``permutations``/``seed`` are ignored.
    """
    _require_variance(field)
    _check_aligned(field, W)
    n = W.n
    Wmat = W.dense()
    s0 = W.s0
    z = field.x - field.mean
    observed = _moran_stat(z, W, Wmat, s0)
    if exhaustive:
        if n > 9:
            raise ParameterError(f"exhaustive mode limited to n <= 9, got {n}")
        sims = np.array(
            [_moran_stat(z[list(p)], W, Wmat, s0) for p in itertools.permutations(range(n))]
        )
    else:
        if permutations < 1:
            raise ParameterError(f"permutations must be >= 1, got {permutations}")
        rng = np.random.default_rng(seed)
        sims = np.array(
            [_moran_stat(z[rng.permutation(n)], W, Wmat, s0) for _ in range(permutations)]
        )
    return MoranGlobalResult(
        I=observed,
        expected=expected_i(n),
        permutations=len(sims),
        seed=None if exhaustive else seed,
        sided=sided,
        sim_mean=float(sims.mean()),
        sim_sd=float(sims.std()),
        pseudo_p=_pseudo_p(observed, sims, expected_i(n), sided),
        exhaustive=exhaustive,
    )


def _quadrant(zi: float, lagi: float) -> str:
    if zi > 0:
        return "HH" if lagi > 0 else "HL"
    return "LH" if lagi > 0 else "LL"


@dataclass
class MoranScatter:
    z: np.ndarray
    lag: np.ndarray
    quadrants: list[str]
    slope: float


def moran_scatter(field: ValueField, W: SpatialWeights) -> MoranScatter:
    """(z_i, lag_i) points with the origin-regression slope.

    For row-standardized weights the slope equals the global index.
    """
    _require_variance(field)
    _check_aligned(field, W)
    lag = spatial_lag(W, field.z)
    slope = float((field.z @ lag) / (field.z @ field.z))
    quads = [_quadrant(zi, li) for zi, li in zip(field.z, lag)]
    return MoranScatter(field.z.copy(), lag, quads, slope)


def moran_local(field: ValueField, W: SpatialWeights) -> np.ndarray:
    """Local index I_i = z_i * lag_i; islands get 0."""
    _require_variance(field)
    _check_aligned(field, W)
    return field.z * spatial_lag(W, field.z)


def lisa_permutation(
    field: ValueField,
    W: SpatialWeights,
    permutations: int = 999,
    seed: int | None = 0,
    sided: str = "one_sided_folded",
    exhaustive: bool = False,
) -> np.ndarray:
    """Conditional permutation pseudo p-value per region.

    For each region i, z_i is held fixed and its |N(i)| neighbor values
    are drawn without replacement from the other n-1 values. Each
    region's random stream derives from (seed, i), so regions can be
    evaluated in parallel with identical results. Exhaustive mode
    enumerates every arrangement of neighbor values.
    """
    _require_variance(field)
    _check_aligned(field, W)
    n = W.n
    z = field.z
    p = np.ones(n)
    for i in range(n):
        k = len(W.neighbors[i])
        if k == 0:
            continue  # island: no lag, leave p = 1
        wts = np.asarray(W.weights[i])
        others = np.delete(z, i)
        observed = float(z[i] * np.dot(wts, z[W.neighbors[i]]))
        wsum = float(wts.sum())
        reference = -(z[i] ** 2) * wsum / (n - 1)
        if exhaustive:
            if math.perm(n - 1, k) > 500_000:
                raise ParameterError(
                    f"exhaustive conditional enumeration too large for region {i}"
                )
            sims = np.array(
                [z[i] * np.dot(wts, others[list(a)]) for a in itertools.permutations(range(n - 1), k)]
            )
        else:
            rng = np.random.default_rng((seed, i))
            sims = np.array(
                [
                    z[i] * np.dot(wts, others[rng.choice(n - 1, size=k, replace=False)])
                    for _ in range(permutations)
                ]
            )
        p[i] = _pseudo_p(observed, sims, reference, sided)
    return p


@dataclass
class LisaResult:
    ids: list[str]
    local_i: np.ndarray
    lag: np.ndarray
    pseudo_p: np.ndarray
    labels: list[str]  # HH/LL/LH/HL or ns
    tiers: list[float | None]  # finest tier met, None if ns
    alpha: float


def lisa_classify(
    field: ValueField,
    W: SpatialWeights,
    p: np.ndarray,
    alpha: float = 0.05,
) -> LisaResult:
    """Cluster/outlier labels and significance tiers per region."""
    if not 0 < alpha < 1:
        raise ParameterError(f"alpha must be in (0, 1), got {alpha}")
    local_i = moran_local(field, W)
    lag = spatial_lag(W, field.z)
    labels = []
    tiers: list[float | None] = []
    for i in range(W.n):
        if p[i] > alpha:
            labels.append("ns")
            tiers.append(None)
            continue
        labels.append(_quadrant(field.z[i], lag[i]))
        # finest tier: smallest threshold still satisfied
        tiers.append(min(t for t in SIGNIFICANCE_TIERS if p[i] <= t))
    return LisaResult(list(W.ids), local_i, lag, np.asarray(p, dtype=float), labels, tiers, alpha)
