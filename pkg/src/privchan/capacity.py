"""Individual channel capacity through finitely many reduced channels.

For individual ``i``, every prior over the other records induces a reduced
channel ``p(y|x_i)`` whose ``j``-th column is a convex combination of the
columns of the channel with ``x_i = j``.  Mutual information is convex in the
kernel for a fixed input, so the largest capacity is reached at a selection
map: one complement assignment per value of ``x_i``.  The capacity of each
distinct selection is then a plain discrete memoryless channel capacity,
computed here with Blahut-Arimoto.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.special import xlogy

from .core import ChannelMatrix, InfoUnit, _kernel_array, validate_channel
from .errors import ConvergenceError, DomainError, EnumerationTooLargeError

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100_000
DEFAULT_ENUM_CAP = 10_000_000
DEDUP_DECIMALS = 12

_CONVERGED, _PRUNED, _EXHAUSTED = 0, 1, 2


@dataclass(frozen=True)
class SelectionMap:
    """Degenerate prior on the other records: ``x_(i) = choices[x_i]``.

    ``choices[j]`` is a joint index into the complement universe (every
    coordinate but ``individual``, first remaining coordinate fastest).
    """

    individual: int
    choices: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "choices", tuple(int(c) for c in self.choices))


@dataclass(frozen=True, eq=False)
class ReducedChannel:
    """Column-stochastic ``|Y| x |X_i|`` kernel ``p(y|x_i)``."""

    entries: np.ndarray = field(repr=False)
    selection: SelectionMap | None = None

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float, copy=True)
        validate_channel(entries)
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)

    @property
    def input_size(self) -> int:
        return self.entries.shape[1]

    @property
    def output_size(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True, eq=False)
class CapacityResult:
    """Capacity lower bound (nats) with its optimizing input.

    The true capacity lies in ``[value, value + gap]``.
    """

    value: float
    optimizer: np.ndarray = field(repr=False)
    gap: float
    iterations: int

    def to(self, unit: InfoUnit | str) -> float:
        return InfoUnit.parse(unit).from_nats(self.value)


@dataclass(frozen=True, eq=False)
class IndividualCapacityReport:
    value: float
    individual: int
    selection: SelectionMap
    optimizer: np.ndarray = field(repr=False)
    gap: float
    per_individual: tuple[float, ...]
    evaluated: tuple[int, ...]
    distinct: tuple[int, ...]

    def to(self, unit: InfoUnit | str) -> float:
        return InfoUnit.parse(unit).from_nats(self.value)


# -- reduction -------------------------------------------------------------


def planes(channel: ChannelMatrix, i: int) -> np.ndarray:
    """Channel regrouped as ``(|Y|, |X_i|, |X_(i)|)``.

    ``planes(ch, i)[:, j, c]`` is ``p(y | x_i = j, x_(i) = c)``.
    """
    channel.universe._check_individual(i)
    T = np.moveaxis(channel.tensor, i + 1, 1)
    return T.reshape((channel.output_size, channel.universe.sizes[i], -1), order="F")


def reduce_channel(channel: ChannelMatrix, selection: SelectionMap) -> ReducedChannel:
    i = selection.individual
    R = planes(channel, i)
    m, s, M = R.shape
    if len(selection.choices) != s:
        raise IndexError(f"selection needs {s} choices, got {len(selection.choices)}")
    for c in selection.choices:
        if not 0 <= c < M:
            raise IndexError(f"complement index {c} out of range [0, {M})")
    return ReducedChannel(R[:, np.arange(s), list(selection.choices)], selection)


def _distinct_columns(block: np.ndarray) -> list[int]:
    """Indices of first occurrences of distinct columns (after rounding)."""
    seen = set()
    keep = []
    rounded = np.round(block, DEDUP_DECIMALS) + 0.0
    for c in range(block.shape[1]):
        key = rounded[:, c].tobytes()
        if key not in seen:
            seen.add(key)
            keep.append(c)
    return keep


def selection_count(channel: ChannelMatrix, i: int) -> int:
    """Number of selection maps for individual ``i`` before deduplication."""
    return channel.universe.complement_size(i) ** channel.universe.sizes[i]


def enumerate_selections(
    channel: ChannelMatrix, i: int, cap: int = DEFAULT_ENUM_CAP
) -> list[SelectionMap]:
    """Selection maps for individual ``i``, one per distinct reduced channel.

    Representatives are the lexicographically first choice tuples, listed in
    lexicographic order. Two reductions are identical exactly when each
    column is, so deduplicating column-wise inside each plane and taking the
    product gives the same list as filtering the full enumeration.
    """
    channel.universe._check_individual(i)
    count = selection_count(channel, i)
    if count > cap:
        raise EnumerationTooLargeError(count, cap)
    R = planes(channel, i)
    reps = [_distinct_columns(R[:, j, :]) for j in range(R.shape[1])]
    return [SelectionMap(i, choice) for choice in itertools.product(*reps)]


# -- Blahut-Arimoto --------------------------------------------------------


def _divergences(W, wlogw, r):
    q = W @ r
    return wlogw - np.log(np.maximum(q, 1e-300)) @ W


def _polish(W, wlogw, r, tol, max_newton=60):
    """Active-set Newton refinement of a Blahut-Arimoto iterate.

    Maximizes the concave ``I(r)`` on the face of the simplex spanned by the
    current support. Directions of negligible curvature (nearly parallel
    columns) get a line step capped at the boundary, the rest a Newton step;
    inputs that reach zero leave the face and re-enter when their divergence
    exceeds ``I``. The result is only returned if the full capacity bracket
    certifies it to ``tol``; otherwise ``None``.
    """
    K = W.shape[1]
    active = np.ones(K, dtype=bool)
    x = r.copy()
    for _ in range(max_newton):
        S = np.flatnonzero(active)
        k = S.size
        Ws, xs = W[:, S], x[S]
        q = Ws @ xs
        if np.any(q[np.any(Ws > 0, axis=1)] <= 0):
            return None
        grad = _divergences(Ws, wlogw[S], xs)
        if k > 1:
            # orthonormal basis of the face's tangent space
            Z = linalg.null_space(np.ones((1, k)))
            curv = (Ws.T * (1.0 / np.maximum(q, 1e-300))) @ Ws
            lam, V = np.linalg.eigh(Z.T @ curv @ Z)
            gr = V.T @ (Z.T @ grad)
            flat = lam <= 1e-9 * max(lam[-1], 1e-300)
            lin = Z @ (V[:, flat] @ gr[flat])
            if np.max(np.abs(lin), initial=0.0) > 1e-14:
                d = lin
                c = float(d @ curv @ d)
                t_opt = (grad @ d) / c if c > 0 else np.inf
            else:
                d = Z @ (V[:, ~flat] @ (gr[~flat] / lam[~flat]))
                t_opt = 1.0
            neg = d < 0
            ratios = np.where(neg, -xs / np.where(neg, d, -1.0), np.inf)
            hit = int(np.argmin(ratios))
            if ratios[hit] <= t_opt:
                x[S] = np.maximum(xs + ratios[hit] * d, 0.0)
                x[S[hit]] = 0.0
                active[S[hit]] = False
                x /= x.sum()
                continue
            x[S] = np.maximum(xs + t_opt * d, 0.0)
            x /= x.sum()
            if np.max(np.abs(t_opt * d)) >= 1e-13:
                continue
        # converged on the face: bring back the most violated input, if any
        D = _divergences(W, wlogw, x)
        lo = float(x @ D)
        out = np.where(active, -np.inf, D)
        j = int(np.argmax(out))
        if out[j] - lo <= 0.5 * tol:
            break
        active[j] = True
        x[j] = 1e-3
        x /= x.sum()
    D = _divergences(W, wlogw, x)
    lo = float(x @ D)
    g = float(D.max()) - lo
    if g <= tol:
        return x, lo, g
    return None


_POLISH_START = 100
_POLISH_EVERY = 100


def _blahut_arimoto_batch(W, tol, max_iter, floor=None):
    """Run Blahut-Arimoto on a stack of kernels ``W`` of shape ``(B, |Y|, K)``.

    Kernels still running after ``_POLISH_START`` iterations periodically get
    a Newton refinement (see :func:`_polish`); it is accepted only when the
    capacity bracket certifies it, so the stopping rule is unchanged.

    With ``floor`` set, a kernel is dropped as soon as its capacity upper
    bound falls to the running maximum of ``floor`` and the lower bounds of
    finished kernels; such a kernel cannot raise that maximum.

    Returns ``(lower, optimizer, gap, iterations, status)``.
    """
    W = np.asarray(W, dtype=float)
    B, _, K = W.shape
    wlogw = xlogy(W, W).sum(axis=1)
    lower = np.full(B, np.nan)
    gap = np.full(B, np.inf)
    iters = np.zeros(B, dtype=np.int64)
    status = np.full(B, -1)
    optimizer = np.full((B, K), 1.0 / K)
    best = -math.inf if floor is None else float(floor)

    idx = np.arange(B)
    Wa, wa = W, wlogw
    r = optimizer.copy()
    for it in range(max_iter + 1):
        q = np.einsum("bmk,bk->bm", Wa, r)
        logq = np.log(np.maximum(q, 1e-300))
        D = wa - np.einsum("bmk,bm->bk", Wa, logq)
        lo = np.einsum("bk,bk->b", r, D)
        up = D.max(axis=1)
        g = up - lo
        done = g <= tol
        if it >= _POLISH_START and it % _POLISH_EVERY == 0:
            for k in np.flatnonzero(~done):
                polished = _polish(Wa[k], wa[k], r[k], tol)
                if polished is not None:
                    r[k], lo[k], g[k] = polished
                    done[k] = True
        finish = done.copy()
        if floor is not None:
            if np.any(done):
                best = max(best, float(lo[done].max()))
            pruned = ~done & (up <= best)
            finish |= pruned
        if it == max_iter:
            finish[:] = True
        if np.any(finish):
            sel = idx[finish]
            lower[sel] = lo[finish]
            gap[sel] = g[finish]
            optimizer[sel] = r[finish]
            iters[sel] = it
            st = np.where(done[finish], _CONVERGED, _EXHAUSTED)
            if floor is not None:
                st = np.where(pruned[finish], _PRUNED, st)
            status[sel] = st
            keep = ~finish
            if not np.any(keep):
                break
            idx, Wa, wa, r, D = idx[keep], Wa[keep], wa[keep], r[keep], D[keep]
        r = r * np.exp(D - D.max(axis=1, keepdims=True))
        r /= r.sum(axis=1, keepdims=True)
    return lower, optimizer, gap, iters, status


def blahut_arimoto(
    kernel, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER
) -> CapacityResult:
    """Capacity of a discrete memoryless channel ``p(y|x)`` (columns = inputs).

    Starts from the uniform input and stops once the bracket
    ``max_x D(p(.|x) || p(y)) - I(p)`` is at most ``tol`` nats.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    W = _kernel_array(kernel)
    validate_channel(W)
    lower, opt, gap, iters, status = _blahut_arimoto_batch(W[None], tol, int(max_iter))
    result = CapacityResult(max(float(lower[0]), 0.0), opt[0], float(gap[0]), int(iters[0]))
    if status[0] == _EXHAUSTED:
        raise ConvergenceError(
            f"Blahut-Arimoto gap {result.gap:.3g} > {tol:g} after {max_iter} iterations", result
        )
    return result


# -- selection-map pipeline ------------------------------------------------


def _capacities(kernels: np.ndarray, tol: float, max_iter: int):
    lower, opt, gap, iters, status = _blahut_arimoto_batch(kernels, tol, max_iter)
    if np.any(status == _EXHAUSTED):
        k = int(np.argmax(status == _EXHAUSTED))
        partial = CapacityResult(float(lower[k]), opt[k], float(gap[k]), int(iters[k]))
        raise ConvergenceError(
            f"Blahut-Arimoto gap {gap[k]:.3g} > {tol:g} after {max_iter} iterations", partial
        )
    return np.maximum(lower, 0.0), opt, gap


def individual_channel_capacity(
    channel: ChannelMatrix,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    enum_cap: int = DEFAULT_ENUM_CAP,
) -> IndividualCapacityReport:
    """Largest ``max_{p(x_i)} I(X_i;Y)`` over individuals and selection maps.

    ``value`` is the exact maximum of the computed capacities. The reported
    argmax is the first ``(i, selection)`` in enumeration order whose
    capacity is within ``tol`` of it, so near-ties resolve toward the
    smallest individual and then the lexicographically smallest selection.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    n = channel.universe.n
    # Fail before doing any work if some individual exceeds the cap.
    for i in range(n):
        count = selection_count(channel, i)
        if count > enum_cap:
            raise EnumerationTooLargeError(count, enum_cap)

    candidates = []
    per_individual, evaluated, distinct = [], [], []
    for i in range(n):
        selections = enumerate_selections(channel, i, enum_cap)
        R = planes(channel, i)
        s = R.shape[1]
        choice = np.array([sel.choices for sel in selections], dtype=np.int64)
        kernels = R[:, np.arange(s)[None, :], choice].transpose(1, 0, 2)
        values, opts, gaps = _capacities(kernels, tol, max_iter)
        per_individual.append(float(values.max()))
        evaluated.append(selection_count(channel, i))
        distinct.append(len(selections))
        candidates.extend(zip(values, selections, opts, gaps))

    best = max(per_individual)
    for value, selection, opt, gap in candidates:
        if value >= best - tol:
            break
    return IndividualCapacityReport(
        value=best,
        individual=selection.individual,
        selection=selection,
        optimizer=opt,
        gap=float(gap),
        per_individual=tuple(per_individual),
        evaluated=tuple(evaluated),
        distinct=tuple(distinct),
    )


def corner_kernels(complement_size: int, input_size: int) -> np.ndarray:
    """Every degenerate ``p(x_(i)|x_i)`` as a stack ``(count, |X_(i)|, |X_i|)``."""
    count = complement_size**input_size
    out = np.zeros((count, complement_size, input_size))
    for b, choice in enumerate(itertools.product(range(complement_size), repeat=input_size)):
        out[b, list(choice), np.arange(input_size)] = 1.0
    return out


def brute_force_capacity_oracle(
    channel: ChannelMatrix,
    i: int,
    samples: int,
    seed: int,
    include_corners: bool = True,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    chunk: int = 2048,
) -> float:
    """Sampled lower estimate of ``max_{Q_i} max_{p(x_i)} I(X_i;Y)`` in nats.

    Draws ``samples`` priors ``p(x_(i)|x_i)`` with Dirichlet(1) columns, mixes
    the channel through each, and keeps the best capacity. When
    ``include_corners`` is set and there are at most ``samples`` degenerate
    priors, all of them are evaluated too. Kernels whose capacity upper
    bound cannot beat the running maximum are abandoned early.
    """
    if samples < 1:
        raise DomainError("samples must be at least 1")
    R = planes(channel, i)
    _, s, M = R.shape
    rng = np.random.default_rng(seed)

    def mix(priors):
        return np.einsum("yjc,bcj->byj", R, priors)

    best = -math.inf
    if include_corners and M**s <= samples:
        corners = corner_kernels(M, s)
        for start in range(0, len(corners), chunk):
            best = _oracle_step(mix(corners[start : start + chunk]), best, tol, max_iter)
    drawn = 0
    while drawn < samples:
        b = min(chunk, samples - drawn)
        priors = rng.dirichlet(np.ones(M), size=(b, s)).transpose(0, 2, 1)
        best = _oracle_step(mix(priors), best, tol, max_iter)
        drawn += b
    return max(best, 0.0)


def _oracle_step(kernels, best, tol, max_iter):
    floor = None if best == -math.inf else best
    lower, opt, gap, iters, status = _blahut_arimoto_batch(kernels, tol, max_iter, floor=floor)
    if np.any(status == _EXHAUSTED):
        k = int(np.argmax(status == _EXHAUSTED))
        partial = CapacityResult(float(lower[k]), opt[k], float(gap[k]), int(iters[k]))
        raise ConvergenceError("oracle Blahut-Arimoto did not converge", partial)
    finished = status == _CONVERGED
    if np.any(finished):
        best = max(best, float(lower[finished].max()))
    return best
