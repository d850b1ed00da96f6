import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import unitary_group

from src.braid import (
    A_theta,
    B_theta,
    BraidError,
    Rapidity,
    SpectralAngles,
    braid_A,
    braid_B,
    braid_generators,
    braid_limit_phases,
    braid_relations_residual,
    canonical_angle,
    hadamard_conjugate,
    kauffman_braid,
    temperley_lieb_4d,
    theta2_consistent,
    theta_from_rapidity,
    tl_generators,
    tl_r_matrix,
    tl_residuals,
    yang_baxter_coefficients,
    yang_baxterize,
    ybe2d_residual,
    ybe_additive_residual,
    ybe_multiplicative_residual,
)
from src.linalg import I2, SWAP, is_unitary

angles = st.floats(min_value=-2 * math.pi, max_value=2 * math.pi, allow_nan=False)


def test_constant_braid_matrices_satisfy_braid_relation():
    a, b = braid_A(), braid_B()
    assert np.linalg.norm(a @ b @ a - b @ a @ b) <= 1e-12
    assert is_unitary(a, 1e-12) and is_unitary(b, 1e-12)


def test_perturbed_braid_matrix_breaks_relation():
    a = braid_A()
    a[0, 0] += 1e-3
    assert braid_relations_residual([a, braid_B()]) > 1e-6


def test_braid_matrices_are_limits_of_parametric_family():
    phases = braid_limit_phases()
    assert abs(phases["A"] - cmath.exp(1j * math.pi / 8)) < 1e-12
    assert abs(phases["B"] - cmath.exp(1j * math.pi / 8)) < 1e-12


def test_temperley_lieb_identities():
    residuals = tl_residuals(*tl_generators())
    assert max(residuals.values()) <= 1e-12


@given(angles)
def test_yang_baxterization_reproduces_parametric_operators(theta):
    assert np.allclose(yang_baxterize(theta, 12), A_theta(theta), atol=1e-12)
    assert np.allclose(yang_baxterize(theta, 23), B_theta(theta), atol=1e-12)


def test_yang_baxterize_rejects_unknown_generator():
    with pytest.raises(BraidError):
        yang_baxterize(0.1, 13)


@given(angles)
def test_hadamard_conjugation_swaps_families(theta):
    assert np.allclose(hadamard_conjugate(theta), B_theta(theta), atol=1e-12)


@given(st.floats(min_value=-50, max_value=50, allow_nan=False), st.sampled_from([-1, 1]))
def test_rapidity_coefficients_match_angle(w, zeta):
    r = Rapidity(w, zeta)
    theta = theta_from_rapidity(r).theta
    a, b = yang_baxter_coefficients(r)
    t1, t2, _ = tl_generators()
    assert np.allclose(a * I2 + b * t1, A_theta(theta), atol=1e-10)
    assert np.allclose(a * I2 + b * t2, B_theta(theta), atol=1e-10)


def test_zero_rapidity_gives_identity():
    assert theta_from_rapidity(Rapidity(0.0)).theta == 0.0


def test_rapidity_rejects_bad_zeta():
    with pytest.raises(BraidError):
        Rapidity(1.0, zeta=0)


def test_consistency_grid_solves_the_ybe():
    grid = np.linspace(0.0, 2 * math.pi, 100, endpoint=False)
    worst = max(ybe2d_residual((t1, theta2_consistent(t1, t3), t3)) for t1 in grid for t3 in grid)
    assert worst <= 1e-10


@given(angles, angles)
def test_theta2_shift_by_pi_still_solves(t1, t3):
    try:
        t2 = theta2_consistent(t1, t3)
    except BraidError:
        return
    assert ybe2d_residual((t1, t2 + math.pi, t3)) <= 1e-9


def test_theta2_indeterminate_point_raises():
    with pytest.raises(BraidError, match="indeterminate"):
        theta2_consistent(math.pi / 4, -math.pi / 4)


def test_trivial_angles_solve_the_ybe():
    assert ybe2d_residual((0.0, 0.0, 0.0)) == 0.0


def test_canonical_angle_range():
    assert 0.0 <= canonical_angle(-1e-18) < 2 * math.pi
    assert canonical_angle(2 * math.pi) == 0.0
    assert SpectralAngles(-math.pi, 3 * math.pi, 0.5).canonical().as_tuple() == pytest.approx((math.pi, math.pi, 0.5))


def test_spectral_angles_reject_nan():
    with pytest.raises(BraidError):
        SpectralAngles(float("nan"), 0.0, 0.0)


def test_swap_and_diagonal_phase_solve_additive_ybe():
    def constant_swap(_u, _v):
        return SWAP

    def diagonal_phase(u, v):
        return np.diag([1, cmath.exp(1j * (u - v)), cmath.exp(1j * (u - v)), 1])

    assert ybe_additive_residual(constant_swap, 0.1, 0.7, -1.3) <= 1e-12
    assert ybe_additive_residual(diagonal_phase, 0.1, 0.7, -1.3) <= 1e-12


def test_random_unitaries_fail_additive_ybe():
    failures = 0
    for seed in range(100):
        r = unitary_group.rvs(4, random_state=seed)
        if ybe_additive_residual(lambda _u, _v: r, 0.0, 0.0, 0.0) > 1e-3:
            failures += 1
    assert failures >= 99


def test_tl_r_matrix_solves_multiplicative_ybe():
    assert ybe_multiplicative_residual(tl_r_matrix(2.0), 1.5, 0.7) <= 1e-12
    assert ybe_multiplicative_residual(tl_r_matrix(2.0), 1.5, 1.5) <= 1e-12


def test_tl_r_matrix_pole_raises():
    with pytest.raises(BraidError, match="pole"):
        tl_r_matrix(2.0)(4.0)


def test_four_dimensional_temperley_lieb_fixture():
    q = 1.7
    e = temperley_lieb_4d(q)
    assert np.allclose(e @ e, (q + 1 / q) * e)
    e1, e2 = braid_generators(e, 3)
    assert np.allclose(e1 @ e2 @ e1, e1)


def test_kauffman_braid_generates_braid_group():
    sigmas = braid_generators(kauffman_braid(1.5), 4)
    assert braid_relations_residual(sigmas) <= 1e-12


def test_kauffman_braid_at_q_one_is_scaled_swap():
    assert np.allclose(kauffman_braid(1.0), 1j * SWAP)


def test_braid_relations_residual_rejects_singular_generator():
    with pytest.raises(BraidError, match="singular"):
        braid_relations_residual([np.zeros((2, 2)), I2])


def test_quarter_turn_residual():
    assert ybe2d_residual((math.pi / 2, 0.0, 0.0)) == pytest.approx(2.0, abs=1e-12)


@given(angles, angles, angles)
def test_residual_is_invariant_under_reversal_with_roles_exchanged(t1, t2, t3):
    forward = ybe2d_residual((t1, t2, t3))
    assert ybe2d_residual((t3, t2, t1), first=B_theta, second=A_theta) == forward


@pytest.mark.parametrize("w, expected", [(1.0, -math.pi / 4), (-1.0, math.pi / 4)])
def test_unit_rapidity_gives_quarter_angle(w, expected):
    assert theta_from_rapidity(Rapidity(w)).theta == pytest.approx(expected, abs=1e-12)
