import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vortexgas.errors import BadRange, InvalidSpec
from vortexgas.field import (analytic_exp_moment, e_factor, exp_moment_diff_check,
                             exp_moment_study, functionals, gauss_weight, l2_moment_study,
                             lp_norm, sample_field, synthesize, zero_field)
from vortexgas.expansion import field_grids
from vortexgas.kernels import KernelSpec, mode_variances, vm_diag

SPEC = KernelSpec(4.0, 16, 64)


def test_sample_is_deterministic():
    a, b = sample_field(SPEC, 11), sample_field(SPEC, 11)
    assert np.array_equal(a.coeffs, b.coeffs)
    assert np.array_equal(a.grid_values, b.grid_values)
    assert not np.array_equal(a.coeffs, sample_field(SPEC, 12).coeffs)


def test_grid_is_real_mean_zero_and_matches_direct_sum():
    s = sample_field(SPEC, 3)
    g = s.grid_values
    assert g.dtype == float and abs(g.mean()) < 1e-12
    n = SPEC.grid_n
    coeffs = s.full_coeffs()
    for (i, j) in [(0, 0), (5, 17), (40, 63)]:
        x = np.array([i / n, j / n])
        direct = sum(c * np.exp(2j * math.pi * (k[0] * x[0] + k[1] * x[1]))
                     for k, c in coeffs.items())
        assert abs(direct.imag) < 1e-10
        assert abs(direct.real - g[i, j]) < 1e-10


def test_hermitian_symmetry():
    c = sample_field(SPEC, 5).full_coeffs()
    for k, v in c.items():
        assert c[(-k[0], -k[1])] == v.conjugate()


def test_parseval():
    s = sample_field(SPEC, 9)
    assert s.l2_squared() == pytest.approx(float(np.mean(s.grid_values**2)), rel=1e-12)
    assert lp_norm(s, 2) ** 2 == pytest.approx(s.l2_squared(), rel=1e-14)


def test_grid_must_resolve_cutoff():
    with pytest.raises(InvalidSpec):
        sample_field(KernelSpec(4.0, 16, 32), 0)
    with pytest.raises(InvalidSpec):
        synthesize(KernelSpec(4.0, 16, 32), np.zeros(10))


def test_pointwise_variance_matches_diagonal():
    spec = KernelSpec(10.0, 64, 130)
    vals = np.concatenate([field_grids(spec, range(s, s + 500))[:, 7, 3]
                           for s in range(0, 10_000, 500)])
    target = vm_diag(spec)
    # the variance of a sample variance of Gaussians is 2 sigma^4 / n
    assert abs(np.mean(vals**2) - target) < 3 * target * math.sqrt(2 / len(vals))


def test_mode_variance_calibration():
    spec = KernelSpec(10.0, 8, 18)
    c = np.array([sample_field(spec, s).coeffs for s in range(10_000)])
    emp = np.mean(np.abs(c) ** 2, axis=0)
    v = mode_variances(spec)
    # |c_k|^2 is exponential with mean v_k, so its standard error is v_k / sqrt(n)
    assert np.max(np.abs(emp - v) / (v / math.sqrt(len(c)))) < 5


def test_mode_variances_are_half_plane_smooth_multiplier():
    v = mode_variances(SPEC)
    assert 2 * v.sum() == pytest.approx(vm_diag(SPEC), rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.0, 20.0), st.sampled_from([2, 4, 8, 32]))
def test_e_factor_bounds(seed, beta, n):
    s = sample_field(SPEC, seed)
    f = functionals(s, beta, n)
    assert abs(f.e_plus) <= 1 + 1e-12
    assert f.e_minus == f.e_plus.conjugate()
    assert 0 < f.gauss_weight <= 1
    assert e_factor(s, -1, beta, n) == pytest.approx(f.e_minus, abs=1e-15)


def test_zero_field_and_argument_checks():
    z = zero_field(SPEC)
    assert e_factor(z, 1, 3.0, 4) == 1
    assert gauss_weight(z, 3.0, 4) == 1
    s = sample_field(SPEC, 1)
    with pytest.raises(ValueError):
        e_factor(s, 0, 1.0, 4)
    with pytest.raises(ValueError):
        e_factor(s, 1, 1.0, 3)
    with pytest.raises(ValueError):
        lp_norm(s, 0.5)
    ws = [gauss_weight(s, b, 4) for b in (0.0, 0.5, 1.0, 2.0)]
    assert all(b < a for a, b in zip(ws, ws[1:]))


def test_lp_norms_monotone_in_p():
    s = sample_field(SPEC, 2)
    vals = [lp_norm(s, p) for p in (1, 2, 3, 4)]
    assert all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))


def test_analytic_moment_against_jensen_and_mc():
    for alpha in (0.1, 0.5, 1.0):
        a = analytic_exp_moment(alpha, SPEC)
        assert math.exp(-alpha * vm_diag(SPEC)) <= a <= 1
    rows, _ = exp_moment_study([4.0, 8.0], 0.5, 4000, seed=1)
    for r in rows:
        assert r.mc.within(r.analytic, 4)
    with pytest.raises(ValueError):
        analytic_exp_moment(0.0, SPEC)


def test_l2_moment_study_matches_diagonal():
    rows, _ = l2_moment_study([4.0, 8.0], 3000, seed=2)
    for m, est, diag in rows:
        assert est.within(diag, 4)


def test_exp_moment_difference():
    specs = [KernelSpec.for_mass(m) for m in (8, 16, 32)]
    rep = exp_moment_diff_check(1.0, 1.5, specs)
    assert all(d >= 0 for d in rep.differences)
    assert rep.bounded
    same = exp_moment_diff_check(1.0, 1.0, specs)
    assert same.differences == [0.0, 0.0, 0.0]
    with pytest.raises(BadRange):
        exp_moment_diff_check(1.0, 0.5, specs)
    with pytest.raises(BadRange):
        exp_moment_diff_check(0.0, 0.5, specs)


def test_coeff_csv(tmp_path):
    s = sample_field(KernelSpec(2.0, 4, 10), 0)
    lines = s.to_csv(tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "k1,k2,re,im" and len(lines) == 1 + s.coeffs.size
