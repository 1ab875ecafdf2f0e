import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vortexgas.errors import BadRange, NotMeanZero, NTooLarge
from vortexgas.expansion import (TestFunction, check_complex_taylor,
                                 check_even_power_inequality, e_plus_batch,
                                 even_power_margin_closed_form, expansion_identity_suite,
                                 field_grids, g_non_increasing, inequality_suite,
                                 proof_step_check, random_dyadic_function,
                                 regular_partition_check, remainder_direct, remainder_expand,
                                 remainder_expanded, remainder_moment_study,
                                 sine_gordon_table, yukawa_partition_check)
from vortexgas.field import e_factor, sample_field
from vortexgas.kernels import KernelSpec


def brute_expansion(e, W, k, n):
    """The order-n expansion summed literally over index sets (1-based)."""
    N = len(e)
    D = {j: e[j - 1] - W for j in range(1, N + 1)}
    idx = range(k + 1, N + 1)
    total = 0j
    for ell in range(1, n):
        for c in itertools.combinations(idx, ell):
            total += W ** (N - k - ell) * np.prod([D[j] for j in c])
    for c in itertools.combinations(idx, n):
        k1 = c[0]
        between = np.prod([e[j - 1] for j in range(k + 1, k1)]) if k1 > k + 1 else 1.0
        total += W ** (N - n - k1 + 1) * np.prod([D[j] for j in c]) * between
    return total


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 9), st.integers(1, 4))
def test_expansion_matches_brute_force_and_product(seed, N, n):
    rng = np.random.default_rng(seed)
    e = np.sqrt(rng.random(N)) * np.exp(2j * math.pi * rng.random(N))
    W = float(rng.uniform(0.01, 1.0))
    k = int(rng.integers(0, N))
    fast = remainder_expanded(e, W, k, n)
    assert abs(fast - brute_expansion(e, W, k, n)) < 1e-12
    assert abs(fast - remainder_direct(e, W, k)) < 1e-12


def test_remainder_examples():
    e = np.full(6, 0.7 + 0j)
    assert remainder_direct(e, 0.7, 1) == pytest.approx(0.0, abs=1e-15)
    assert remainder_expand(e, 0.7, 0, 3).expanded == pytest.approx(0.0, abs=1e-15)
    assert remainder_direct(e, 0.3, 6) == 0
    assert remainder_expanded(e, 0.3, 7, 2) == 0
    with pytest.raises(BadRange):
        remainder_expand(np.array([1.5]), 0.5, 0, 1)
    with pytest.raises(BadRange):
        remainder_expand(e, 0.0, 0, 1)
    with pytest.raises(BadRange):
        remainder_expanded(e, 0.5, 0, 0)


def test_identity_suite():
    _, verdict = expansion_identity_suite(200, seed=4)
    assert verdict.passed and verdict.instances == 800


def test_inequalities_on_zero_function():
    f = TestFunction(np.zeros(16))
    for n in (1, 2, 3):
        assert check_even_power_inequality(f, n) == 0.0
    assert check_complex_taylor(f) == 0.0
    with pytest.raises(NotMeanZero):
        TestFunction(np.ones(4))
    with pytest.raises(NotMeanZero):
        check_complex_taylor(TestFunction(np.ones(4), mean_zero=False))
    with pytest.raises(BadRange):
        check_even_power_inequality(f, 0)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_inequalities_hold_on_dyadic_functions(seed):
    rng = np.random.default_rng(seed)
    f = random_dyadic_function(rng, 4.0)
    assert abs(f.values.mean()) < 1e-12 and np.abs(f.values).max() <= 4.0 + 1e-12
    for n in (1, 2, 3):
        scale = float(np.mean(np.exp(-2 * n * f.values)))
        assert check_even_power_inequality(f, n) >= -1e-13 * max(1.0, scale) * 2 ** (2 * n)
    assert check_complex_taylor(random_dyadic_function(rng, 2.0)) >= -1e-12
    assert abs(even_power_margin_closed_form(f) - check_even_power_inequality(f, 1)) < 1e-12


def test_inequality_suite_reproducible():
    rows_a, verdicts = inequality_suite(50, seed=7)
    rows_b, _ = inequality_suite(50, seed=7)
    assert rows_a == rows_b
    assert all(v.passed for v in verdicts)


def test_batched_grids_match_single_samples():
    spec = KernelSpec(6.0, 24, 50)
    grids = field_grids(spec, [3, 4])
    for g, s in zip(grids, (3, 4)):
        assert np.array_equal(g, sample_field(spec, s).grid_values)
    ep = e_plus_batch(grids, 0.5)
    assert ep[0] == pytest.approx(e_factor(sample_field(spec, 3), 1, 1.0, 2), abs=1e-14)


def test_sine_gordon_small():
    spec = KernelSpec(4.0, 16, 34)
    res = sine_gordon_table([0.0, 2.0], [2, 4], spec, n_field_samples=4000, seed=1,
                            n_tuples=100_000)
    for r in res:
        if r.beta == 0:
            assert r.lhs.value == r.rhs.value == 1.0
        else:
            assert r.passed, r.as_row()
            # flipping every sign leaves the product unchanged
            assert r.rhs_flipped.value == pytest.approx(r.rhs.value, rel=1e-12)
    with pytest.raises(NTooLarge):
        sine_gordon_table([1.0], [6], spec, 10, 0)


def test_proof_step_bound():
    _, v = proof_step_check(2.0, 4, KernelSpec(6.0, 24, 50), n_samples=100, seed=0)
    assert v.passed


def test_remainder_study_small():
    zero = remainder_moment_study(0.0, [8, 16], n_samples=10)
    assert all(r["mean_abs_R"] == 0 for r in zero.rows)
    st_ = remainder_moment_study(1.0, [8, 16], n_samples=20, seed=2)
    assert all(r["mean_abs_R"] > 0 for r in st_.rows)


def test_partitions_small():
    rows, _ = yukawa_partition_check(0.0, 4, [4, 8, 16], 10, 0)
    assert all(r.estimate.value == 1.0 for r in rows)
    rows, fit = yukawa_partition_check(1.0, 4, [4, 8, 16], 20_000, 0)
    assert all(r.estimate.value >= 1.0 for r in rows)  # Jensen: E H_W = 0
    assert fit is not None and g_non_increasing(rows, 3.0)
    reg = regular_partition_check(1.0, [4, 8], n_samples=2000)
    for r in reg:
        assert abs(r.estimate.value - 1.0) < 0.05
