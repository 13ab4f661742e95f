"""Lower bounds on capacity against adversaries with prior entropy at least ``b``.

The exact restricted capacity is not known in closed form; everything here is
a local search and every value it reports is a lower bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import xlogy

from .capacity import (
    DEFAULT_ENUM_CAP,
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    _capacities,
    enumerate_selections,
    individual_channel_capacity,
    planes,
)
from .core import ChannelMatrix
from .errors import DomainError

CROSSCHECK_TOL = 1e-4
_ENTROPY_SLACK = 1e-12


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.flatnonzero(u - css / k > 0)[-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def _entropy(p):
    return float(-np.sum(xlogy(p, p)))


class _Objective:
    """``I(X_i;Y)`` as a function of the joint prior, with its gradient."""

    def __init__(self, channel: ChannelMatrix, i: int):
        u = channel.universe
        self.W = channel.entries
        coords = np.indices(u.sizes).reshape(u.n, -1, order="F")
        self.group = coords[i]
        self.s = u.sizes[i]

    def value(self, p):
        a = np.bincount(self.group, weights=p, minlength=self.s)
        joint = np.stack(
            [np.bincount(self.group, weights=row * p, minlength=self.s) for row in self.W]
        )
        py = self.W @ p
        return max(_entropy(a) + _entropy(py) - _entropy(joint.ravel()), 0.0)

    def gradient(self, p):
        W = self.W
        a = np.bincount(self.group, weights=p, minlength=self.s)
        joint = np.stack([np.bincount(self.group, weights=row * p, minlength=self.s) for row in W])
        py = W @ p
        live = a > 0
        cond = np.empty_like(joint)
        cond[:, live] = joint[:, live] / a[live]
        # For an empty x_i the induced column is the channel column itself.
        cond_x = cond[:, self.group]
        empty = ~live[self.group]
        cond_x[:, empty] = W[:, empty]
        ratio = np.log(np.maximum(cond_x, 1e-300)) - np.log(np.maximum(py, 1e-300))[:, None]
        return np.sum(np.where(W > 0, W * ratio, 0.0), axis=0)


def _lift_entropy(p, b, uniform):
    """Smallest mix ``(1-t) p + t u`` with entropy at least ``b``.

    Entropy is concave along the segment and maximal at ``u``, so it is
    non-decreasing in ``t`` and bisection applies.
    """
    if _entropy(p) >= b - _ENTROPY_SLACK:
        return p
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _entropy((1 - mid) * p + mid * uniform) >= b - _ENTROPY_SLACK:
            hi = mid
        else:
            lo = mid
    return (1 - hi) * p + hi * uniform


def _ascend(obj, p, b, uniform, max_iter, step0=1.0):
    p = _lift_entropy(p, b, uniform)
    f = obj.value(p)
    step = step0
    for _ in range(max_iter):
        g = obj.gradient(p)
        g = g - g.mean()
        if not np.any(g):
            break
        improved = False
        while step > 1e-12:
            cand = _lift_entropy(project_simplex(p + step * g), b, uniform)
            fc = obj.value(cand)
            if fc > f + 1e-15:
                p, f, improved = cand, fc, True
                step *= 2.0
                break
            step *= 0.5
        if not improved:
            break
    return f, p


def selection_prior(channel: ChannelMatrix, i: int, enum_cap: int = DEFAULT_ENUM_CAP) -> np.ndarray:
    """Joint prior attaining the unrestricted capacity for individual ``i``.

    Puts the capacity-achieving mass ``r(x_i)`` of the best selection map on
    the dataset ``(x_i, selected complement)``.
    """
    u = channel.universe
    selections = enumerate_selections(channel, i, enum_cap)
    R = planes(channel, i)
    s = R.shape[1]
    choice = np.array([sel.choices for sel in selections], dtype=np.int64)
    kernels = R[:, np.arange(s)[None, :], choice].transpose(1, 0, 2)
    values, opts, _ = _capacities(kernels, DEFAULT_TOL, DEFAULT_MAX_ITER)
    k = int(np.argmax(values))
    index = np.moveaxis(np.arange(u.size).reshape(u.sizes, order="F"), i, 0)
    index = index.reshape((s, -1), order="F")
    joint = np.zeros(u.size)
    joint[index[np.arange(s), choice[k]]] = opts[k]
    return joint


def restricted_capacity_lower_bound(
    channel: ChannelMatrix,
    i: int,
    b: float,
    restarts: int = 8,
    seed: int = 0,
    max_iter: int = 500,
    warm_start: bool = True,
) -> float:
    """Lower bound on ``max I(X_i;Y)`` over joint priors with ``H(X) >= b`` (nats).

    Projected gradient ascent over the joint simplex from the uniform prior
    and ``restarts`` Dirichlet(1) draws; infeasible iterates are pulled back
    toward uniform until the entropy constraint holds. With ``warm_start``
    the search also starts from :func:`selection_prior`, which makes the
    ``b = 0`` estimate reproduce the unrestricted capacity; the objective is
    not concave in the joint prior, so random starts alone can stall.
    """
    u = channel.universe
    u._check_individual(i)
    log_size = math.log(u.size)
    if not 0.0 <= b <= log_size + _ENTROPY_SLACK:
        raise DomainError(f"b={b} outside [0, log|X|={log_size}]")
    if restarts < 1:
        raise DomainError("restarts must be at least 1")
    b = min(b, log_size)
    obj = _Objective(channel, i)
    uniform = np.full(u.size, 1.0 / u.size)
    if b >= log_size - _ENTROPY_SLACK:
        # only the uniform prior is feasible
        return obj.value(uniform)
    rng = np.random.default_rng(seed)
    starts = [uniform] + [rng.dirichlet(np.ones(u.size)) for _ in range(restarts)]
    if warm_start:
        starts.append(selection_prior(channel, i))
    best = 0.0
    for start in starts:
        f, _ = _ascend(obj, start, b, uniform, max_iter)
        best = max(best, f)
    return best


@dataclass(frozen=True)
class BalancePoint:
    b: float
    restricted: float
    delta: float
    envelope: float


@dataclass(frozen=True)
class BalanceReport:
    capacity: float
    points: tuple[BalancePoint, ...]
    crosscheck_ok: bool | None


def balance_delta_bound(
    channel: ChannelMatrix,
    b_grid: Sequence[float],
    restarts: int = 8,
    seed: int = 0,
    tol: float = DEFAULT_TOL,
    enum_cap: int = DEFAULT_ENUM_CAP,
) -> BalanceReport:
    """Upper estimates ``C_1 - (lower bound on C_1^b)`` of the balance gap.

    ``envelope`` is the running maximum of the raw estimates, so it is
    non-decreasing in ``b``. If ``b = 0`` is on the grid and its estimate
    agrees with ``C_1`` to ``CROSSCHECK_TOL``, its gap is pinned to 0;
    ``crosscheck_ok`` records the outcome (``None`` when 0 is not on the grid).
    """
    grid = [float(b) for b in b_grid]
    if not grid:
        raise DomainError("b_grid is empty")
    log_size = math.log(channel.universe.size)
    if any(b2 < b1 for b1, b2 in zip(grid, grid[1:])):
        raise DomainError("b_grid must be sorted ascending")
    if grid[0] < 0 or grid[-1] > log_size + _ENTROPY_SLACK:
        raise DomainError(f"b_grid must lie within [0, {log_size}]")

    capacity = individual_channel_capacity(channel, tol=tol, enum_cap=enum_cap).value
    crosscheck = None
    points = []
    envelope = 0.0
    for b in grid:
        restricted = max(
            restricted_capacity_lower_bound(channel, i, b, restarts=restarts, seed=seed)
            for i in range(channel.universe.n)
        )
        delta = max(capacity - restricted, 0.0)
        if b == 0.0:
            crosscheck = abs(capacity - restricted) <= CROSSCHECK_TOL
            if crosscheck:
                delta = 0.0
        envelope = max(envelope, delta)
        points.append(BalancePoint(b, restricted, delta, envelope))
    return BalanceReport(capacity, tuple(points), crosscheck)
