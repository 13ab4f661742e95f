"""Dataset universes, channel matrices and finite information measures.

Datasets are tuples ``(x_1, ..., x_n)`` with ``x_i in range(sizes[i])``. A
dataset is addressed by a mixed-radix joint index in which the first
coordinate varies fastest, so a channel matrix of shape ``(|Y|, |X|)`` can be
viewed as an ``(n + 1)``-dimensional tensor ``(|Y|, |X_1|, ..., |X_n|)`` with a
Fortran-order reshape.

All quantities are computed in nats; :class:`InfoUnit` converts at the edges.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import xlogy

from .errors import DimensionError, DomainError, NonStochasticError

STOCHASTIC_TOL = 1e-9
_MAX_JOINT = 2**62


class InfoUnit(enum.Enum):
    NATS = "nats"
    BITS = "bits"

    @classmethod
    def parse(cls, value: "InfoUnit | str") -> "InfoUnit":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise DomainError(f"unknown unit {value!r}; expected 'nats' or 'bits'") from None

    def from_nats(self, value: float) -> float:
        return value / math.log(2) if self is InfoUnit.BITS else value

    def to_nats(self, value: float) -> float:
        return value * math.log(2) if self is InfoUnit.BITS else value


NATS = InfoUnit.NATS
BITS = InfoUnit.BITS


@dataclass(frozen=True)
class RecordUniverse:
    """Per-individual alphabet sizes ``(|X_1|, ..., |X_n|)``."""

    sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        if not sizes:
            raise DomainError("a universe needs at least one individual")
        if any(s < 1 for s in sizes):
            raise DomainError(f"alphabet sizes must be positive, got {sizes}")
        if math.prod(sizes) >= _MAX_JOINT:
            raise DomainError(f"joint universe {sizes} is too large to index")
        object.__setattr__(self, "sizes", sizes)

    @property
    def n(self) -> int:
        return len(self.sizes)

    @property
    def size(self) -> int:
        return math.prod(self.sizes)

    def complement_size(self, i: int) -> int:
        """Number of joint assignments to every coordinate except ``i``."""
        self._check_individual(i)
        return math.prod(s for k, s in enumerate(self.sizes) if k != i)

    def complement(self, i: int) -> tuple[int, ...]:
        self._check_individual(i)
        return tuple(s for k, s in enumerate(self.sizes) if k != i)

    def encode(self, coords: Sequence[int]) -> int:
        return encode_index(self, coords)

    def decode(self, index: int) -> tuple[int, ...]:
        return decode_index(self, index)

    def _check_individual(self, i: int):
        if not 0 <= i < self.n:
            raise IndexError(f"individual {i} out of range for n={self.n}")


def encode_index(universe: RecordUniverse, coords: Sequence[int]) -> int:
    """Mixed-radix index of ``coords``, first coordinate fastest."""
    coords = tuple(coords)
    if len(coords) != universe.n:
        raise IndexError(f"expected {universe.n} coordinates, got {len(coords)}")
    index, stride = 0, 1
    for c, s in zip(coords, universe.sizes):
        c = int(c)
        if not 0 <= c < s:
            raise IndexError(f"coordinate {c} out of range [0, {s})")
        index += c * stride
        stride *= s
    return index


def decode_index(universe: RecordUniverse, index: int) -> tuple[int, ...]:
    index = int(index)
    if not 0 <= index < universe.size:
        raise IndexError(f"joint index {index} out of range [0, {universe.size})")
    coords = []
    for s in universe.sizes:
        index, c = divmod(index, s)
        coords.append(c)
    return tuple(coords)


# -- stochasticity ---------------------------------------------------------


@dataclass(frozen=True)
class ValidationReport:
    column_deviation: np.ndarray
    min_entry: float
    passed: bool

    @property
    def max_deviation(self) -> float:
        return float(np.max(self.column_deviation)) if self.column_deviation.size else 0.0


def validate_channel(channel, tol: float = STOCHASTIC_TOL) -> ValidationReport:
    """Check that every column is a probability distribution.

    Accepts a :class:`ChannelMatrix` or any 2-D array-like. Raises
    :class:`NonStochasticError` naming the first offending column.
    """
    entries = np.asarray(getattr(channel, "entries", channel), dtype=float)
    if entries.ndim != 2:
        raise DimensionError(f"channel must be 2-D, got shape {entries.shape}")
    if not np.all(np.isfinite(entries)):
        bad = int(np.argwhere(~np.isfinite(entries))[0][1])
        raise NonStochasticError(f"column {bad} has a non-finite entry")
    deviation = np.abs(entries.sum(axis=0) - 1.0)
    min_entry = float(entries.min()) if entries.size else 0.0
    if min_entry < 0:
        bad = int(np.argwhere(entries < 0)[0][1])
        raise NonStochasticError(f"column {bad} has a negative entry {entries[:, bad].min():.17g}")
    if np.any(deviation > tol):
        bad = int(np.argmax(deviation > tol))
        raise NonStochasticError(f"column {bad} sums to {entries[:, bad].sum():.17g}, not 1")
    return ValidationReport(deviation, min_entry, True)


def check_distribution(weights, name: str = "distribution") -> np.ndarray:
    """Return ``weights`` as a float array after checking it lies on the simplex."""
    p = np.asarray(weights, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise DimensionError(f"{name} must be a non-empty vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)) or p.min() < 0:
        raise NonStochasticError(f"{name} has a negative or non-finite weight")
    if abs(p.sum() - 1.0) > STOCHASTIC_TOL:
        raise NonStochasticError(f"{name} sums to {p.sum():.17g}, not 1")
    return p


def normalize(weights) -> np.ndarray:
    """Explicit renormalization; never applied implicitly."""
    p = np.asarray(weights, dtype=float)
    total = p.sum()
    if total <= 0 or p.min() < 0:
        raise NonStochasticError("cannot normalize a vector with no positive mass")
    return p / total


def _kernel_array(kernel) -> np.ndarray:
    W = np.asarray(getattr(kernel, "entries", kernel), dtype=float)
    if W.ndim != 2:
        raise DimensionError(f"kernel must be 2-D, got shape {W.shape}")
    return W


# -- domain values ---------------------------------------------------------


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class ChannelMatrix:
    """Column-stochastic ``|Y| x |X|`` transition matrix ``p(y|x)``."""

    universe: RecordUniverse
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not isinstance(self.universe, RecordUniverse):
            object.__setattr__(self, "universe", RecordUniverse(tuple(self.universe)))
        entries = _readonly(self.entries)
        if entries.ndim != 2 or entries.shape[1] != self.universe.size:
            raise DimensionError(
                f"channel shape {entries.shape} does not match universe of size {self.universe.size}"
            )
        validate_channel(entries)
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_tensor(cls, universe: RecordUniverse, tensor) -> "ChannelMatrix":
        tensor = np.asarray(tensor, dtype=float)
        return cls(universe, tensor.reshape((tensor.shape[0], universe.size), order="F"))

    @property
    def output_size(self) -> int:
        return self.entries.shape[0]

    @property
    def tensor(self) -> np.ndarray:
        """View as ``(|Y|, |X_1|, ..., |X_n|)``."""
        return self.entries.reshape((self.output_size, *self.universe.sizes), order="F")

    def column(self, coords: Sequence[int]) -> np.ndarray:
        return self.entries[:, encode_index(self.universe, coords)]

    def __eq__(self, other):
        if not isinstance(other, ChannelMatrix):
            return NotImplemented
        return self.universe == other.universe and np.array_equal(self.entries, other.entries)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class QueryTable:
    """Total map ``f`` from joint dataset index to output symbol index."""

    universe: RecordUniverse
    output_size: int
    table: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not isinstance(self.universe, RecordUniverse):
            object.__setattr__(self, "universe", RecordUniverse(tuple(self.universe)))
        table = np.array(self.table, copy=True)
        if table.ndim != 1 or table.size != self.universe.size:
            raise DimensionError(
                f"query table has {table.size} entries, universe has {self.universe.size} datasets"
            )
        if table.size and not np.issubdtype(table.dtype, np.integer):
            if not np.all(np.equal(np.mod(table, 1), 0)):
                raise DomainError("query table entries must be integers")
        table = table.astype(np.int64)
        if int(self.output_size) < 1:
            raise DomainError("output_size must be positive")
        if table.size and (table.min() < 0 or table.max() >= int(self.output_size)):
            raise DomainError(f"query outputs must lie in [0, {self.output_size})")
        table.flags.writeable = False
        object.__setattr__(self, "output_size", int(self.output_size))
        object.__setattr__(self, "table", table)

    @classmethod
    def from_function(cls, universe: RecordUniverse, output_size: int, fn) -> "QueryTable":
        """Tabulate ``fn(*coords)`` over every dataset of ``universe``."""
        table = [fn(*decode_index(universe, k)) for k in range(universe.size)]
        return cls(universe, output_size, np.asarray(table, dtype=np.int64))

    def __call__(self, coords: Sequence[int]) -> int:
        return int(self.table[encode_index(self.universe, coords)])

    def deterministic_channel(self) -> ChannelMatrix:
        entries = np.zeros((self.output_size, self.universe.size))
        entries[self.table, np.arange(self.universe.size)] = 1.0
        return ChannelMatrix(self.universe, entries)


# -- information measures --------------------------------------------------


def entropy(dist, unit: InfoUnit | str = NATS) -> float:
    """Shannon entropy with ``0 log 0 = 0``."""
    p = check_distribution(dist)
    return InfoUnit.parse(unit).from_nats(_entropy(p))


def _entropy(p: np.ndarray) -> float:
    return float(-np.sum(xlogy(p, p)))


def output_distribution(input_dist, kernel) -> np.ndarray:
    """Output marginal ``p(y) = sum_x p(y|x) p(x)``."""
    W = _kernel_array(kernel)
    p = check_distribution(input_dist, "input")
    if W.shape[1] != p.size:
        raise DimensionError(f"input has {p.size} symbols, kernel has {W.shape[1]} columns")
    validate_channel(W)
    return W @ p


def mutual_information(input_dist, kernel, unit: InfoUnit | str = NATS) -> float:
    """``I(X;Y)`` for input distribution ``p(x)`` and kernel ``p(y|x)``."""
    W = _kernel_array(kernel)
    p = check_distribution(input_dist, "input")
    if W.shape[1] != p.size:
        raise DimensionError(f"input has {p.size} symbols, kernel has {W.shape[1]} columns")
    validate_channel(W)
    return InfoUnit.parse(unit).from_nats(_mutual_information(p, W))


def _mutual_information(p: np.ndarray, W: np.ndarray) -> float:
    q = W @ p
    # sum_x p(x) sum_y W log W  -  sum_y q log q, with 0 log 0 = 0
    value = float(np.dot(p, np.sum(xlogy(W, W), axis=0)) + _entropy(q))
    return max(value, 0.0)


def _max_information(p: np.ndarray, W: np.ndarray) -> float:
    q = W @ p
    support = p > 0
    Ws = W[:, support]
    live = q > 0
    if not np.any(Ws[live] > 0):
        return -math.inf
    with np.errstate(divide="ignore"):
        ratios = np.log(Ws[live]) - np.log(q[live])[:, None]
    return float(np.max(ratios))


def max_mutual_information(joint, channel, unit: InfoUnit | str = NATS) -> float:
    """``I_inf(X;Y) = max log p(y|x)/p(y)`` over the support of ``p(x)`` and ``p(y)``.

    ``channel`` may be a :class:`ChannelMatrix` or a plain kernel array.
    """
    W = _kernel_array(channel)
    p = check_distribution(joint, "joint")
    if W.shape[1] != p.size:
        raise DimensionError(f"joint has {p.size} symbols, channel has {W.shape[1]} columns")
    validate_channel(W)
    return InfoUnit.parse(unit).from_nats(_max_information(p, W))


def individual_kernel(channel: ChannelMatrix, joint, i: int) -> tuple[np.ndarray, np.ndarray]:
    """Marginal ``p(x_i)`` and induced kernel ``p(y|x_i)`` under a joint prior.

    Columns for values of ``x_i`` with zero prior mass are filled with the
    unweighted average of their plane; they never affect a measure.
    """
    universe = channel.universe
    universe._check_individual(i)
    p = check_distribution(joint, "joint")
    if p.size != universe.size:
        raise DimensionError(f"joint has {p.size} symbols, universe has {universe.size}")
    P = np.moveaxis(p.reshape(universe.sizes, order="F"), i, 0).reshape(
        (universe.sizes[i], -1), order="F"
    )
    T = np.moveaxis(channel.tensor, i + 1, 1).reshape(
        (channel.output_size, universe.sizes[i], -1), order="F"
    )
    marginal = P.sum(axis=1)
    joint_yx = np.einsum("yjc,jc->yj", T, P)
    kernel = T.mean(axis=2)
    live = marginal > 0
    kernel[:, live] = joint_yx[:, live] / marginal[live]
    return marginal, kernel
