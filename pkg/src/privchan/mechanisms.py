"""Concrete privacy channels and their calibration.

Randomized response, the discrete exponential channel, and the Gaussian
channel (closed-form bounds plus a finite-grid discretization), together with
the data-independent capacity bound that drives their calibration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats
from scipy.special import xlogy

from .capacity import DEFAULT_ENUM_CAP, SelectionMap, enumerate_selections, planes
from .core import (
    NATS,
    STOCHASTIC_TOL,
    ChannelMatrix,
    InfoUnit,
    QueryTable,
    RecordUniverse,
)
from .errors import DimensionError, DomainError, GridError

# -- randomized response ---------------------------------------------------


def randomized_response_channel(
    query: QueryTable, p: float, allow_endpoints: bool = False
) -> ChannelMatrix:
    """Binary channel that flips ``f(x)`` with probability ``p``."""
    if query.output_size != 2:
        raise DomainError(f"randomized response needs |Y| = 2, got {query.output_size}")
    p = float(p)
    lo_ok = 0.0 <= p if allow_endpoints else 0.0 < p
    hi_ok = p <= 1.0 if allow_endpoints else p < 1.0
    if not (lo_ok and hi_ok):
        raise DomainError(f"flip probability {p} outside the admissible interval")
    entries = np.empty((2, query.universe.size))
    entries[0] = np.where(query.table == 0, 1.0 - p, p)
    entries[1] = np.where(query.table == 1, 1.0 - p, p)
    return ChannelMatrix(query.universe, entries)


def binary_entropy(p: float) -> float:
    """``H(p)`` in nats."""
    return float(-xlogy(p, p) - xlogy(1.0 - p, 1.0 - p))


@dataclass(frozen=True)
class RRCalibration:
    p_star: float
    interval: tuple[float, float]


def rr_calibrate(epsilon: float, unit: InfoUnit | str = NATS) -> RRCalibration:
    """Flip probabilities keeping randomized response within ``epsilon``.

    ``p_star`` solves ``H(p) = log 2 - epsilon`` on ``[0, 1/2]``; every ``p``
    strictly between ``p_star`` and ``1 - p_star`` keeps the leakage bound
    ``log 2 - H(p)`` below ``epsilon``.
    """
    eps = InfoUnit.parse(unit).to_nats(float(epsilon))
    if not eps > 0:
        raise DomainError("epsilon must be positive")
    target = math.log(2) - eps
    if target <= 0:
        return RRCalibration(0.0, (0.0, 1.0))
    p_star = optimize.brentq(lambda p: binary_entropy(p) - target, 0.0, 0.5, xtol=1e-14)
    return RRCalibration(p_star, (p_star, 1.0 - p_star))


# -- data-independent channels --------------------------------------------


def is_data_independent(channel: ChannelMatrix, tol: float = STOCHASTIC_TOL) -> bool:
    """True when every column is a permutation of the first one."""
    cols = np.sort(channel.entries, axis=0)
    return bool(np.all(np.abs(cols - cols[:, :1]) <= tol))


def data_independent_capacity_bound(channel: ChannelMatrix, unit: InfoUnit | str = NATS) -> float:
    """``log|Y| - H(Z)``, with ``Z`` distributed as any column."""
    if not is_data_independent(channel):
        raise DomainError("channel is not data-independent")
    z = channel.entries[:, 0]
    bound = math.log(channel.output_size) + float(np.sum(xlogy(z, z)))
    return InfoUnit.parse(unit).from_nats(max(bound, 0.0))


def is_weakly_symmetric(
    channel: ChannelMatrix, tol: float = STOCHASTIC_TOL, enum_cap: int = DEFAULT_ENUM_CAP
) -> SelectionMap | None:
    """First selection map whose reduced channel has constant row sums.

    Searches individuals in order and, within each, the deduplicated
    selections in lexicographic order. The uniform input on that
    individual's alphabet then makes the output uniform, so the
    data-independent bound is attained.
    """
    if not is_data_independent(channel):
        raise DomainError("weak symmetry is defined for data-independent channels only")
    for i in range(channel.universe.n):
        R = planes(channel, i)
        s = R.shape[1]
        for sel in enumerate_selections(channel, i, enum_cap):
            rows = R[:, np.arange(s), list(sel.choices)].sum(axis=1)
            if np.ptp(rows) <= tol:
                return sel
    return None


# -- exponential channel ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class RankOrdering:
    """``ranks[x, y]`` is ``phi_x(y)``, the position of ``y`` sorted by distortion."""

    ranks: np.ndarray = field(repr=False)

    def __post_init__(self):
        ranks = np.array(self.ranks, dtype=np.int64, copy=True)
        k = ranks.shape[1]
        if not np.all(np.sort(ranks, axis=1) == np.arange(k)):
            raise DomainError("every rank row must be a permutation of 0..k-1")
        ranks.flags.writeable = False
        object.__setattr__(self, "ranks", ranks)


def default_distortion(k: int) -> np.ndarray:
    """``d(y, y') = |y - y'|`` on output indices."""
    idx = np.arange(k, dtype=float)
    return np.abs(idx[:, None] - idx[None, :])


def rank_ordering(query: QueryTable, distortion) -> RankOrdering:
    """Rank outputs by ``d(y, f(x))``; ties go to the smaller output index."""
    d = np.asarray(distortion, dtype=float)
    k = query.output_size
    if d.shape != (k, k):
        raise DimensionError(f"distortion must be {k}x{k}, got {d.shape}")
    if np.any(d < 0) or not np.all(np.isfinite(d)):
        raise DomainError("distortion entries must be finite and nonnegative")
    order = np.argsort(d[:, query.table].T, axis=1, kind="stable")
    ranks = np.empty_like(order)
    rows = np.arange(order.shape[0])[:, None]
    ranks[rows, order] = np.arange(k)
    return RankOrdering(ranks)


def exponential_channel(query: QueryTable, distortion, N: float) -> ChannelMatrix:
    """``p(y|x) = exp(-phi_x(y) / N) / alpha``."""
    if not N > 0:
        raise DomainError("N must be positive")
    ranks = rank_ordering(query, distortion).ranks
    weights = np.exp(-np.arange(query.output_size) / N)
    weights /= weights.sum()
    return ChannelMatrix(query.universe, weights[ranks].T)


def exponential_entropy(k: int, lam: float) -> float:
    """Entropy (nats) of ``p_j ∝ exp(-lam * j)``, ``j = 0..k-1``, in closed form."""
    k = int(k)
    if k < 1:
        raise DomainError("k must be at least 1")
    if not lam > 0:
        raise DomainError("lambda must be positive")
    if k == 1:
        return 0.0
    if lam < 1e-6:
        # KL to uniform is lam^2 Var/2 + O(lam^4); Var of uniform on 0..k-1 is (k^2-1)/12
        return math.log(k) - lam * lam * (k * k - 1) / 24.0
    kl = k * lam
    return (
        math.log(-math.expm1(-kl)) - math.log(-math.expm1(-lam))
        + lam / math.expm1(lam)
        - (kl / math.expm1(kl) if kl < 700 else 0.0)
    )


ALL_ADMISSIBLE = math.inf


def exponential_calibrate(epsilon: float, k: int) -> float:
    """Largest ``lambda = 1/N`` with ``log k - H(Z) <= epsilon`` (nats).

    Returns :data:`ALL_ADMISSIBLE` (``inf``) when ``epsilon >= log k``.
    """
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    if k < 2:
        raise DomainError("k must be at least 2")
    target = math.log(k) - epsilon
    if target <= 0:
        return ALL_ADMISSIBLE

    def excess(lam):
        h = math.log(k) if lam == 0.0 else exponential_entropy(k, lam)
        return h - target

    hi = 1.0
    while excess(hi) > 0:
        hi *= 2.0
    return optimize.brentq(excess, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


# -- Gaussian channel ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GaussianSpec:
    """Query values ``f(x)`` (clamped to ``[-T, T]``), range bound ``T``, variance ``N``."""

    values: np.ndarray = field(repr=False)
    T: float
    N: float

    def __post_init__(self):
        if not self.T > 0 or not self.N > 0:
            raise DomainError("T and N must be positive")
        values = np.clip(np.asarray(self.values, dtype=float), -self.T, self.T)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)


def gaussian_calibrate(epsilon: float, T: float) -> float:
    """Smallest noise variance ``N = T^2 / (exp(2 epsilon) - 1)``."""
    if not epsilon > 0 or not T > 0:
        raise DomainError("epsilon and T must be positive")
    return T * T / math.expm1(2.0 * epsilon)


def gaussian_capacity_bound(T: float, N: float) -> float:
    """``log(1 + T^2/N) / 2`` in nats."""
    if not T > 0 or not N > 0:
        raise DomainError("T and N must be positive")
    return 0.5 * math.log1p(T * T / N)


GRID_TAIL_TOL = 1e-6


def discretize_gaussian(
    spec: GaussianSpec, universe: RecordUniverse, lo: float, hi: float, step: float
) -> ChannelMatrix:
    """Channel of Gaussian-CDF masses on cells of ``[lo, hi]``.

    Mass beyond the grid is folded into the two boundary cells so that every
    column sums to one.
    """
    values = spec.values
    if values.size != universe.size:
        raise DimensionError(f"{values.size} query values for {universe.size} datasets")
    if not step > 0 or not hi > lo:
        raise GridError("grid needs lo < hi and step > 0")
    cells = int(round((hi - lo) / step))
    if cells < 1 or abs(cells * step - (hi - lo)) > 1e-9 * max(1.0, hi - lo):
        raise GridError(f"step {step} does not divide [{lo}, {hi}]")
    sd = math.sqrt(spec.N)
    tail = stats.norm.cdf(lo, loc=values, scale=sd) + stats.norm.sf(hi, loc=values, scale=sd)
    if np.max(tail) > GRID_TAIL_TOL:
        raise GridError(f"grid [{lo}, {hi}] leaves {np.max(tail):.3g} of the mass outside")
    inner = lo + step * np.arange(1, cells)
    cdf = stats.norm.cdf(inner[:, None], loc=values[None, :], scale=sd)
    edges = np.vstack([np.zeros((1, values.size)), cdf, np.ones((1, values.size))])
    return ChannelMatrix(universe, np.diff(edges, axis=0))


# -- noise scale comparison ------------------------------------------------


@dataclass(frozen=True)
class NoiseScaleReport:
    laplace_dp: float
    gaussian_dp: float
    gaussian_channel: float
    epsilon_dp: float
    delta_prime: float
    delta_f: float
    T: float
    epsilon_ip: float
    delta_balance: float


def noise_scale_report(
    epsilon_dp: float,
    delta_prime: float,
    delta_f: float,
    T: float,
    epsilon_ip: float,
    delta_balance: float = 0.0,
) -> NoiseScaleReport:
    """Noise scales of the Laplace and Gaussian DP mechanisms and the Gaussian channel.

    The DP epsilon and the information-privacy epsilon are separate inputs;
    the report compares magnitudes only.
    """
    if not (epsilon_dp > 0 and delta_f > 0 and T > 0 and epsilon_ip > 0):
        raise DomainError("epsilon_dp, delta_f, T and epsilon_ip must be positive")
    if not 0 < delta_prime < 1:
        raise DomainError("delta_prime must lie in (0, 1)")
    if delta_balance < 0:
        raise DomainError("delta_balance must be nonnegative")
    laplace = delta_f / epsilon_dp
    gauss_dp = math.sqrt(2.0 * math.log(1.25 / delta_prime)) * delta_f / epsilon_dp
    channel = T / math.sqrt(math.expm1(2.0 * (epsilon_ip + delta_balance)))
    return NoiseScaleReport(
        laplace, gauss_dp, channel, epsilon_dp, delta_prime, delta_f, T, epsilon_ip, delta_balance
    )
