"""Position measurement layer: symbols, density series, POVM elements, grids."""

import math

import numpy as np
import pytest

from ncqm import (
    ConvergenceError,
    GridSpec,
    MeasurementImpossibleError,
    ModelParams,
    QuantumState,
    TruncationError,
    TruncationWarning,
    UsageError,
    build_fock,
    coherent_state_op,
    coherent_tail,
    coherent_vector,
    deriv_z,
    deriv_zbar,
    ground_probability,
    ground_state,
    plane_wave,
    position_probability,
    post_measurement,
    povm_identity_residual,
    povm_matrix,
    probability_grid,
    rotate,
    symbol,
    vec,
)
from conftest import full_state, interior_state

THETA = 0.1


@pytest.fixture(scope="module")
def ctx16():
    return build_fock(ModelParams(theta=THETA, cutoff=16))


def unit_matrix_state(n, a, b):
    op = np.zeros((n, n), dtype=complex)
    op[a, b] = 1.0
    return QuantumState(op)


# ---------------------------------------------------------------- coherent pieces

def test_coherent_vector_matches_factorials():
    z = 0.7 - 0.3j
    v = coherent_vector(20, z)
    pref = math.exp(-0.5 * abs(z) ** 2)
    for n in range(20):
        want = pref * z**n / math.sqrt(math.factorial(n))
        assert v[n] == pytest.approx(want, rel=1e-13)


def test_coherent_tail_is_poisson_upper_tail():
    z = 1.3 + 0.4j
    mu = abs(z) ** 2
    for level in (1, 3, 8):
        brute = 1.0 - sum(math.exp(-mu) * mu**k / math.factorial(k) for k in range(level))
        assert coherent_tail(40, z, level) == pytest.approx(brute, rel=1e-10)
    assert coherent_tail(40, z, 0) == 1.0
    assert coherent_tail(40, z, -2) == 1.0
    assert coherent_tail(40, 0.0, 5) == 0.0


def test_coherent_state_op_is_normalized_rank_one(ctx16):
    psi = coherent_state_op(ctx16, 1.1 - 0.2j)
    assert psi.is_normalized(tol=1e-12)
    evals = np.linalg.eigvalsh(np.asarray(psi.op) @ np.asarray(psi.op).conj().T)
    assert evals[-1] == pytest.approx(1.0, rel=1e-12)
    assert np.all(evals[:-1] < 1e-13)


def test_coherent_state_op_truncation_gate():
    ctx = build_fock(ModelParams(theta=THETA, cutoff=12))
    with pytest.raises(TruncationError, match="raise the cutoff"):
        coherent_state_op(ctx, 3.0)


# ---------------------------------------------------------------- symbols

def test_symbol_closed_forms(ctx16):
    zs = (0.0, 0.8, -0.4 + 1.1j)
    vac = unit_matrix_state(16, 0, 0)
    for z in zs:
        assert symbol(vac)(z) == pytest.approx(math.exp(-abs(z) ** 2), rel=1e-13)
    for m, n in ((1, 0), (2, 3)):
        s = symbol(unit_matrix_state(16, m, n))
        for z in zs:
            want = (
                np.conj(z) ** m
                * z**n
                * math.exp(-abs(z) ** 2)
                / math.sqrt(math.factorial(m) * math.factorial(n))
            )
            assert s(z) == pytest.approx(want, abs=1e-14)
    w = 0.9 + 0.1j
    s = symbol(coherent_state_op(ctx16, w))
    for z in zs:
        assert s(z) == pytest.approx(math.exp(-abs(z - w) ** 2), rel=1e-10)


def test_plane_wave_symbol_is_a_ripple_free_phase():
    ctx = build_fock(ModelParams(theta=THETA, cutoff=40))
    kappa = 0.2
    psi, _ = plane_wave(ctx, kappa)
    s = symbol(psi)
    pref = math.exp(-abs(kappa) ** 2)
    for z in (0.0, 1.5, -0.7 + 2.0j):
        want = pref * np.exp(1j * (kappa * z + np.conj(kappa) * np.conj(z)))
        assert s(z) == pytest.approx(want, rel=1e-12)


def eval_two_sided(table, u, v):
    # the symbol with conj(z) replaced by an independent variable u
    a_dim, b_dim = table.shape
    out = 0.0
    for a in range(a_dim):
        for b in range(b_dim):
            if table[a, b] != 0.0:
                out += table[a, b] * u**a * v**b / math.sqrt(
                    math.factorial(a) * math.factorial(b)
                )
    return out * np.exp(-u * v)


def test_derivatives_match_finite_differences(ctx16):
    rng = np.random.default_rng(12)
    psi = interior_state(rng, 16, 10)
    s = symbol(psi)
    h = 1e-5
    for z in (0.3, -0.6 + 0.4j):
        u, v = np.conj(z), z
        dz = (eval_two_sided(s.table, u, v + h) - eval_two_sided(s.table, u, v - h)) / (2 * h)
        dzbar = (eval_two_sided(s.table, u + h, v) - eval_two_sided(s.table, u - h, v)) / (2 * h)
        assert deriv_z(s)(z) == pytest.approx(dz, rel=1e-8, abs=1e-10)
        assert deriv_zbar(s)(z) == pytest.approx(dzbar, rel=1e-8, abs=1e-10)


def test_mixed_derivatives_commute(ctx16):
    rng = np.random.default_rng(13)
    s = symbol(full_state(rng, 16))
    ab = deriv_z(deriv_zbar(s)).table
    ba = deriv_zbar(deriv_z(s)).table
    assert np.max(np.abs(ab - ba)) < 1e-14


def test_vacuum_derivative_closed_form():
    s = deriv_z(symbol(unit_matrix_state(8, 0, 0)))
    for z in (0.2, 1.0 - 0.5j):
        assert s(z) == pytest.approx(-np.conj(z) * math.exp(-abs(z) ** 2), rel=1e-13)


# ---------------------------------------------------------------- density series

def test_vacuum_density_sums_the_whole_chain(ctx16):
    # the derivative chain of |0><0| resums to a Gaussian exactly
    vac = unit_matrix_state(16, 0, 0)
    c = 2.0 * math.pi * THETA
    for z in (0.0, 0.5, 1.2 - 0.3j):
        want = math.exp(-abs(z) ** 2) / c
        assert position_probability(ctx16, vac, z) == pytest.approx(want, rel=1e-12)


def test_ground_density_matches_closed_form():
    ctx = build_fock(ModelParams(theta=THETA, cutoff=80))
    psi0 = ground_state(ctx)
    for z in (0.0, 0.7, 1.4 + 0.9j):
        got = position_probability(ctx, psi0, z)
        assert got == pytest.approx(ground_probability(ctx.params, z), rel=1e-6)


def test_density_rotation_covariance(ctx16):
    rng = np.random.default_rng(14)
    psi = interior_state(rng, 16, 8)
    phi = 0.6
    rotated = rotate(psi, phi)
    for z in (0.4, 0.9 - 0.2j):
        a = position_probability(ctx16, rotated, z)
        b = position_probability(ctx16, psi, np.exp(-1j * phi) * z)
        assert a == pytest.approx(b, rel=1e-10)


def test_density_warns_outside_safe_region():
    ctx = build_fock(ModelParams(theta=THETA, cutoff=12))
    vac = unit_matrix_state(12, 0, 0)
    with pytest.warns(TruncationWarning, match="truncation-unsafe"):
        p = position_probability(ctx, vac, 4.0)
    assert p >= 0.0


def test_density_series_cap_raises(ctx16):
    rng = np.random.default_rng(15)
    psi = full_state(rng, 16)
    with pytest.raises(ConvergenceError, match="cap"):
        position_probability(ctx16, psi, 1.0, max_terms=3)


# ---------------------------------------------------------------- grids

def test_grid_spec_validation():
    with pytest.raises(UsageError, match="points"):
        GridSpec((-1.0, 1.0), (-1.0, 1.0), (1, 10))
    with pytest.raises(UsageError, match="increasing"):
        GridSpec((1.0, -1.0), (-1.0, 1.0))


def test_grid_matches_pointwise_density():
    # corner coherent tail above level N-3 stays under 1e-8: all points safe
    ctx = build_fock(ModelParams(theta=THETA, cutoff=36))
    psi = coherent_state_op(ctx, 0.5)
    grid = GridSpec((-0.9, 0.9), (-0.9, 0.9), (21, 21))
    res = probability_grid(ctx, psi, grid)
    assert res.warnings == ()
    assert res.values.shape == (21, 21)
    assert np.all(res.values >= 0.0)
    for i in (0, 7, 16):
        for j in (3, 11):
            z = (res.x1[i] + 1j * res.x2[j]) / math.sqrt(2.0 * THETA)
            assert res.values[i, j] == pytest.approx(
                position_probability(ctx, psi, z), rel=1e-12
            )
    # the window clips Gaussian tails, so the quadrature undershoots 1 a little
    assert 0.8 < res.normalization_estimate < 1.0


def test_grid_determinism(ctx16):
    psi = coherent_state_op(ctx16, 0.4 + 0.3j)
    grid = GridSpec((-1.0, 1.0), (-1.0, 1.0), (15, 15))
    a = probability_grid(ctx16, psi, grid)
    b = probability_grid(ctx16, psi, grid)
    assert np.array_equal(a.values, b.values)


def test_grid_flags_unsafe_points():
    ctx = build_fock(ModelParams(theta=THETA, cutoff=10))
    vac = unit_matrix_state(10, 0, 0)
    grid = GridSpec((-3.0, 3.0), (-3.0, 3.0), (7, 7))
    res = probability_grid(ctx, vac, grid)
    assert len(res.warnings) == 1 and "truncation-unsafe" in res.warnings[0]
    assert np.all(res.values >= 0.0)


# ---------------------------------------------------------------- POVM

def test_povm_matrix_is_hermitian_psd(ctx16):
    pi_z = povm_matrix(ctx16, 0.8 - 0.5j)
    assert pi_z.shape == (256, 256)
    assert np.max(np.abs(pi_z - pi_z.conj().T)) < 1e-14
    evals = np.linalg.eigvalsh(pi_z)
    assert evals[0] >= -1e-12 * evals[-1]


def test_povm_quadratic_form_matches_series(ctx16):
    rng = np.random.default_rng(16)
    psi = interior_state(rng, 16, 8)
    for z in (0.0, 0.6 + 0.2j):
        pi_z = povm_matrix(ctx16, z)
        v = vec(psi.op)
        quad = float(np.real(v.conj() @ pi_z @ v))
        assert quad == pytest.approx(position_probability(ctx16, psi, z), rel=1e-12)


def test_povm_vacuum_expectation_at_origin(ctx16):
    vac = unit_matrix_state(16, 0, 0)
    v = vec(vac.op)
    quad = float(np.real(v.conj() @ povm_matrix(ctx16, 0.0) @ v))
    assert quad == pytest.approx(1.0 / (2.0 * math.pi * THETA), rel=1e-13)


def test_povm_kernel_cap_raises(ctx16):
    with pytest.raises(ConvergenceError, match="decay"):
        povm_matrix(ctx16, 1.5, max_terms=2)


def test_post_measurement_normalizes(ctx16):
    psi = coherent_state_op(ctx16, 0.5)
    out = post_measurement(ctx16, psi, 0.5)
    assert out.is_normalized(tol=1e-12)


def test_post_measurement_impossible_detection():
    ctx = build_fock(ModelParams(theta=THETA, cutoff=30))
    top = unit_matrix_state(30, 29, 29)
    with pytest.raises(MeasurementImpossibleError):
        post_measurement(ctx, top, 0.0)


def test_povm_resolves_identity_on_low_levels():
    ctx = build_fock(ModelParams(theta=THETA, cutoff=12))
    res = povm_identity_residual(ctx, 5.0 * math.sqrt(THETA), points=31, span=3)
    assert res < 1e-3
    with pytest.raises(UsageError, match="span"):
        povm_identity_residual(ctx, 1.0, span=13)
