import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq
from scipy.special import xlogy

from privchan import (
    BITS,
    ChannelMatrix,
    ConvergenceError,
    EnumerationTooLargeError,
    RecordUniverse,
    SelectionMap,
    blahut_arimoto,
    brute_force_capacity_oracle,
    enumerate_selections,
    individual_channel_capacity,
    mutual_information,
    reduce_channel,
)
from privchan.capacity import corner_kernels, planes, selection_count

from conftest import random_channel


def h2(p):
    return -(p * math.log2(p) + (1 - p) * math.log2(1 - p))


def grid_capacity(W, points=20001):
    """Capacity of a two-input kernel by exhaustive search over p(x=0)."""
    a = np.linspace(0.0, 1.0, points)
    P = np.stack([a, 1 - a])
    Q = W @ P
    hq = -xlogy(Q, Q).sum(axis=0)
    hyx = -(xlogy(W, W).sum(axis=0) @ P)
    return float(np.max(hq - hyx))


def test_reduce_first_plane(rr25):
    red = reduce_channel(rr25, SelectionMap(0, (0, 0, 0)))
    np.testing.assert_array_equal(red.entries, rr25.tensor[:, :, 0])


def test_reduce_single_individual_is_identity():
    rng = np.random.default_rng(0)
    ch = random_channel(rng, (4,), 3)
    red = reduce_channel(ch, SelectionMap(0, (0, 0, 0, 0)))
    np.testing.assert_array_equal(red.entries, ch.entries)


def test_reduce_rejects_bad_selection(rr25):
    with pytest.raises(IndexError):
        reduce_channel(rr25, SelectionMap(0, (0, 2, 0)))
    with pytest.raises(IndexError):
        reduce_channel(rr25, SelectionMap(0, (0, 0)))


def test_reduction_columns_match_joint_index(rr25):
    sel = SelectionMap(1, (2, 0))
    red = reduce_channel(rr25, sel)
    # x_2 = j, x_1 = choices[j]
    for j, c in enumerate(sel.choices):
        np.testing.assert_array_equal(red.entries[:, j], rr25.column((c, j)))


def test_selection_counts(rr25):
    assert selection_count(rr25, 0) == 8
    assert selection_count(rr25, 1) == 9
    assert len(enumerate_selections(rr25, 0)) == 4
    assert len(enumerate_selections(rr25, 1)) == 4


def test_query_ignoring_complement_dedups_to_one():
    u = RecordUniverse((3, 3))
    table = np.array([u.decode(k)[0] % 2 for k in range(u.size)])
    entries = np.where(table == 0, [[0.8], [0.2]], [[0.3], [0.7]])
    ch = ChannelMatrix(u, entries)
    assert len(enumerate_selections(ch, 0)) == 1


def _full_filtered(channel, i):
    R = planes(channel, i)
    s, M = R.shape[1], R.shape[2]
    seen, keep = set(), []
    for choice in itertools.product(range(M), repeat=s):
        key = (np.round(R[:, np.arange(s), list(choice)], 12) + 0.0).tobytes()
        if key not in seen:
            seen.add(key)
            keep.append(choice)
    return keep


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 1))
def test_dedup_equals_filtered_full_enumeration(seed, i):
    rng = np.random.default_rng(seed)
    u = RecordUniverse((3, 3))
    # a few repeated columns so deduplication has something to do
    base = rng.dirichlet(np.ones(2), size=3).T
    ch = ChannelMatrix(u, base[:, rng.integers(0, 3, size=u.size)])
    got = [sel.choices for sel in enumerate_selections(ch, i)]
    assert got == _full_filtered(ch, i)


def test_enumeration_cap(rr25):
    with pytest.raises(EnumerationTooLargeError):
        enumerate_selections(rr25, 1, cap=8)
    with pytest.raises(EnumerationTooLargeError):
        individual_channel_capacity(rr25, enum_cap=8)


def test_individual_out_of_range(rr25):
    with pytest.raises(IndexError):
        enumerate_selections(rr25, 2)


def test_identity_capacity():
    res = blahut_arimoto(np.eye(2))
    assert res.value == pytest.approx(math.log(2), abs=1e-10)
    assert res.gap <= 1e-10


def test_identical_columns_capacity_zero():
    res = blahut_arimoto(np.array([[0.3, 0.3], [0.7, 0.7]]))
    assert res.value == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("p", [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45])
def test_binary_symmetric_bracket(p):
    res = blahut_arimoto(np.array([[1 - p, p], [p, 1 - p]]))
    closed = 1 - h2(p)
    assert res.to(BITS) <= closed + 1e-12
    assert closed * math.log(2) <= res.value + res.gap + 1e-12
    assert res.to(BITS) == pytest.approx(closed, abs=1e-8)


def test_binary_symmetric_half_bit():
    # independent root of H2(p) = 0.5 bits
    p = brentq(lambda t: h2(t) - 0.5, 1e-9, 0.5, xtol=1e-15)
    assert p == pytest.approx(0.110028, abs=1e-6)
    res = blahut_arimoto(np.array([[1 - p, p], [p, 1 - p]]))
    assert res.to(BITS) == pytest.approx(0.5, abs=1e-6)


@pytest.mark.parametrize("seed", range(10))
def test_blahut_arimoto_matches_grid_search(seed):
    rng = np.random.default_rng(seed)
    W = rng.dirichlet(np.ones(3), size=2).T
    res = blahut_arimoto(W)
    assert res.value == pytest.approx(grid_capacity(W), abs=1e-7)
    assert mutual_information(res.optimizer, W) == pytest.approx(res.value, abs=1e-12)


def test_convergence_error_carries_partial():
    W = np.array([[0.9, 0.5, 0.1], [0.1, 0.5, 0.9]])
    with pytest.raises(ConvergenceError) as info:
        blahut_arimoto(W, tol=1e-14, max_iter=3)
    assert info.value.partial is not None
    assert info.value.partial.gap > 1e-14


def test_example1_rr(rr25):
    report = individual_channel_capacity(rr25)
    assert report.to(BITS) == pytest.approx(1 - h2(0.25), abs=1e-6)
    assert report.value == max(report.per_individual)
    assert report.individual == 0
    assert report.evaluated == (8, 9)
    assert report.distinct == (4, 4)


def test_constant_channel_capacity_zero():
    u = RecordUniverse((2, 3))
    ch = ChannelMatrix(u, np.tile([[0.7], [0.3]], (1, u.size)))
    assert individual_channel_capacity(ch).value == pytest.approx(0.0, abs=1e-12)


def test_single_individual_equals_plain_capacity():
    rng = np.random.default_rng(7)
    ch = random_channel(rng, (3,), 3)
    assert individual_channel_capacity(ch).value == pytest.approx(
        blahut_arimoto(ch.entries).value, abs=1e-10
    )
    for samples in (1, 10):
        assert brute_force_capacity_oracle(ch, 0, samples, seed=1) == pytest.approx(
            blahut_arimoto(ch.entries).value, abs=1e-10
        )


def test_oracle_attains_on_example1(rr25):
    value = brute_force_capacity_oracle(rr25, 0, samples=50, seed=0)
    assert value / math.log(2) == pytest.approx(1 - h2(0.25), abs=1e-6)


def test_oracle_deterministic(rr25):
    a = brute_force_capacity_oracle(rr25, 1, samples=30, seed=4, include_corners=False)
    b = brute_force_capacity_oracle(rr25, 1, samples=30, seed=4, include_corners=False)
    assert a == b


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_oracle_never_exceeds_selection_value(seed):
    rng = np.random.default_rng(seed)
    sizes = tuple(rng.integers(1, 4, size=2))
    ch = random_channel(rng, sizes, int(rng.integers(2, 4)))
    report = individual_channel_capacity(ch)
    for i in range(2):
        oracle = brute_force_capacity_oracle(ch, i, samples=50, seed=seed)
        assert oracle <= report.per_individual[i] + 1e-9


def test_corner_kernels_are_degenerate():
    K = corner_kernels(3, 2)
    assert K.shape == (9, 3, 2)
    np.testing.assert_array_equal(K.sum(axis=1), 1.0)
    assert set(np.unique(K)) == {0.0, 1.0}


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.25, 0.5, 0.75]))
def test_mutual_information_convex_in_kernel(seed, lam):
    rng = np.random.default_rng(seed)
    K0 = rng.dirichlet(np.ones(3), size=3).T
    K1 = rng.dirichlet(np.ones(3), size=3).T
    p = rng.dirichlet(np.ones(3))
    mixed = mutual_information(p, lam * K0 + (1 - lam) * K1)
    assert mixed <= lam * mutual_information(p, K0) + (1 - lam) * mutual_information(p, K1) + 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_relabeling_invariance(seed):
    rng = np.random.default_rng(seed)
    ch = random_channel(rng, (3, 2), 3)
    T = ch.tensor
    T = T[rng.permutation(3)]
    T = T[:, rng.permutation(3)]
    T = T[:, :, rng.permutation(2)]
    other = ChannelMatrix.from_tensor(ch.universe, T)
    a = individual_channel_capacity(ch).value
    b = individual_channel_capacity(other).value
    assert a == pytest.approx(b, abs=1e-9)


def test_argmax_tie_break_prefers_smaller_individual():
    # symmetric in the two records, so both individuals reach the maximum
    u = RecordUniverse((2, 2))
    ch = ChannelMatrix(u, [[0.9, 0.5, 0.5, 0.1], [0.1, 0.5, 0.5, 0.9]])
    report = individual_channel_capacity(ch)
    assert report.per_individual[0] == pytest.approx(report.per_individual[1], abs=1e-12)
    assert report.individual == 0


def test_nearly_parallel_columns_converge():
    # two almost identical inputs; the optimum drops one of them
    W = np.array([[0.2285648, 0.56875535, 0.56863456], [0.7714352, 0.43124465, 0.43136544]])
    res = blahut_arimoto(W)
    assert res.gap <= 1e-10
    assert res.iterations <= 1000
    assert res.value == pytest.approx(grid_capacity(W[:, :2], 200001), abs=1e-9)


def test_polish_certifies_near_duplicate_columns():
    rng = np.random.default_rng(11)
    for _ in range(200):
        m, k = int(rng.integers(2, 5)), int(rng.integers(2, 6))
        W = rng.dirichlet(np.ones(m), size=k).T
        j, l = rng.integers(k, size=2)
        W[:, l] = np.abs(W[:, j] + rng.normal(scale=10 ** -rng.uniform(2, 12), size=m))
        W[:, l] /= W[:, l].sum()
        res = blahut_arimoto(W, max_iter=20_000)
        assert res.gap <= 1e-10
