"""Differential-privacy audits of channel matrices.

A channel is epsilon-DP exactly when, along every line of the transition
tensor parallel to one record axis, any two entries have ratio at most
``exp(epsilon)``. Two datasets on such a line differ in one record, with
arbitrary values for that record.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .capacity import planes
from .core import ChannelMatrix, _max_information, individual_kernel
from .errors import DomainError

DP_SLACK = 1e-12
FORWARD_SLACK = 1e-9


@dataclass(frozen=True)
class DpWitness:
    individual: int
    y: int
    x: tuple[int, ...]
    x_prime: tuple[int, ...]
    p: float
    p_prime: float


@dataclass(frozen=True)
class DpAuditReport:
    epsilon_star: float
    witness: DpWitness | None
    epsilon: float | None = None
    passed: bool | None = None


def dp_epsilon(channel: ChannelMatrix) -> DpAuditReport:
    """Smallest epsilon (nats) for which ``channel`` is epsilon-DP.

    A positive entry facing a zero on the same line gives ``inf``; lines of
    zeros contribute nothing. Ties resolve toward the smallest individual,
    then output symbol, then complement index. The witness is ``None``
    when the channel is constant along every line.
    """
    u = channel.universe
    best, witness = 0.0, None
    for i in range(u.n):
        R = planes(channel, i)
        m, s, M = R.shape
        if s < 2:
            continue
        lines = R.transpose(0, 2, 1).reshape(m * M, s)
        hi = lines.max(axis=1)
        lo = lines.min(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(hi == 0, 0.0, np.where(lo == 0, np.inf, np.log(hi / lo)))
        k = int(np.argmax(ratio))
        if ratio[k] > best:
            y, c = divmod(k, M)
            a, b = int(np.argmax(lines[k])), int(np.argmin(lines[k]))
            best = float(ratio[k])
            witness = DpWitness(
                i, y, _coords(u, i, a, c), _coords(u, i, b, c),
                float(lines[k, a]), float(lines[k, b]),
            )
    return DpAuditReport(best, witness)


def _coords(universe, i, value, complement):
    rest = list(_decode_complement(universe, i, complement))
    rest.insert(i, value)
    return tuple(rest)


def _decode_complement(universe, i, complement):
    sizes = universe.complement(i)
    coords = []
    for s in sizes:
        complement, c = divmod(complement, s)
        coords.append(c)
    return tuple(coords)


def check_dp(channel: ChannelMatrix, epsilon: float) -> DpAuditReport:
    if epsilon < 0:
        raise DomainError("epsilon must be nonnegative")
    report = dp_epsilon(channel)
    passed = report.epsilon_star <= epsilon + DP_SLACK
    return DpAuditReport(report.epsilon_star, report.witness, float(epsilon), passed)


@dataclass(frozen=True)
class CrosscheckReport:
    epsilon: float
    epsilon_star: float
    dp_passed: bool
    direction: str
    trials: int
    max_information: float
    violations: int
    consistent: bool


def product_prior(marginals) -> np.ndarray:
    """Joint prior of independent records, in joint-index order."""
    return reduce(lambda acc, p: np.kron(p, acc), marginals[1:], np.asarray(marginals[0]))


def individual_max_information(channel: ChannelMatrix, joint) -> float:
    """``max_i I_inf(X_i;Y)`` under the joint prior (nats)."""
    values = []
    for i in range(channel.universe.n):
        marginal, kernel = individual_kernel(channel, joint, i)
        values.append(_max_information(marginal, kernel))
    return max(values)


def prop1_crosscheck(
    channel: ChannelMatrix, epsilon: float, trials: int = 100, seed: int = 0
) -> CrosscheckReport:
    """Sample the equivalence of epsilon-DP and max-information privacy under independent priors.

    If the channel is epsilon-DP, ``trials`` random product priors (Dirichlet(1)
    marginals) must all keep ``max_i I_inf(X_i;Y) <= epsilon``; any excess is
    counted in ``violations`` and makes the report inconsistent. Otherwise the
    DP witness pair ``(x, x')`` is turned into priors that fix the other
    records and put mass ``t`` on ``x_i`` and ``1 - t`` on ``x'_i``. As
    ``t -> 0`` the information approaches ``log p(y|x)/p(y|x')``; it is
    reported as ``inf`` when ``p(y|x') = 0``.
    """
    if trials < 1:
        raise DomainError("trials must be at least 1")
    audit = check_dp(channel, epsilon)
    sizes = channel.universe.sizes
    if audit.passed:
        rng = np.random.default_rng(seed)
        worst, violations = -math.inf, 0
        for _ in range(trials):
            marginals = [rng.dirichlet(np.ones(s)) for s in sizes]
            value = individual_max_information(channel, product_prior(marginals))
            worst = max(worst, value)
            if value > epsilon + FORWARD_SLACK:
                violations += 1
        return CrosscheckReport(
            epsilon, audit.epsilon_star, True, "forward", trials, worst, violations, violations == 0
        )

    w = audit.witness
    worst = -math.inf
    for t in 2.0 ** -np.arange(1, trials + 1):
        marginals = []
        for j, s in enumerate(sizes):
            p = np.zeros(s)
            if j == w.individual:
                p[w.x[j]] += t
                p[w.x_prime[j]] += 1.0 - t
            else:
                p[w.x[j]] = 1.0
            marginals.append(p)
        worst = max(worst, individual_max_information(channel, product_prior(marginals)))
    if w.p_prime == 0.0:
        worst = math.inf
    return CrosscheckReport(
        epsilon, audit.epsilon_star, False, "converse", trials, worst, 0, worst > epsilon
    )
