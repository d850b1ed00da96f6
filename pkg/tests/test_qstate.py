import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import unitary_group

from src.linalg import HADAMARD, ry
from src.qstate import (
    DensityMatrix,
    Polarization,
    PureState,
    StateError,
    apply_unitary,
    basis_state,
    bloch_vector,
    dephase,
    maximally_mixed,
    overlap,
    partial_trace,
    plus_state,
    pps,
    purity,
    random_pure_state,
    tensor,
    thermal_deviation_state,
    xy_magnetization,
)


def test_basis_state_places_qubit_one_high():
    psi = basis_state("100")
    assert psi.amplitudes[4] == 1.0


def test_pure_state_rejects_unnormalized():
    with pytest.raises(StateError, match="normalized"):
        PureState(n=1, amplitudes=np.array([1.0, 1.0]))


def test_pure_state_amplitudes_are_read_only():
    psi = plus_state()
    with pytest.raises(ValueError):
        psi.amplitudes[0] = 0.0


def test_density_matrix_rejects_negative_eigenvalue():
    with pytest.raises(StateError, match="negative eigenvalue"):
        DensityMatrix(n=1, matrix=np.diag([1.5, -0.5]))


def test_density_matrix_rejects_wrong_trace():
    with pytest.raises(StateError, match="trace"):
        DensityMatrix(n=1, matrix=np.eye(2))


def test_polarization_bounds():
    with pytest.raises(StateError):
        Polarization(1.5)
    assert Polarization.of(0.2).epsilon == 0.2


def test_pps_satisfies_density_invariants():
    rho = pps(basis_state("000"), 1e-5)
    assert abs(np.trace(rho.matrix) - 1.0) < 1e-12
    assert np.linalg.eigvalsh(rho.matrix).min() >= 0.0
    assert np.allclose(rho.matrix, np.diag(np.diag(rho.matrix)))


@given(st.floats(min_value=1e-6, max_value=1.0))
def test_pps_magnetization_is_linear_in_epsilon(eps):
    rho = pps(tensor(plus_state(), basis_state("0")), eps)
    mag = xy_magnetization(rho, 1)
    assert abs(mag / eps - 1.0) < 1e-9


def test_thermal_deviation_state_population_excess():
    rho = thermal_deviation_state(3, 1e-3)
    diag = np.diag(rho.matrix).real
    assert diag[0] == pytest.approx((1 + 3e-3) / 8)
    assert diag[7] == pytest.approx((1 - 3e-3) / 8)


def test_thermal_deviation_state_rejects_large_polarization():
    with pytest.raises(StateError):
        thermal_deviation_state(3, 0.5)


def test_apply_unitary_rotates_population():
    rho = DensityMatrix.from_pure(basis_state("0"))
    flipped = apply_unitary(rho, ry(math.pi))
    assert np.allclose(flipped.matrix, np.diag([0, 1]), atol=1e-12)


def test_apply_unitary_rejects_non_unitary():
    with pytest.raises(StateError, match="not unitary"):
        apply_unitary(maximally_mixed(1), 2 * HADAMARD)


def test_bloch_vector_of_plus_state():
    x, y, z = bloch_vector(DensityMatrix.from_pure(plus_state()))
    assert (x, y, z) == pytest.approx((1.0, 0.0, 0.0))


def test_partial_trace_of_product_state():
    psi = tensor(plus_state(), basis_state("1"))
    reduced = partial_trace(DensityMatrix.from_pure(psi), [2])
    assert np.allclose(reduced.matrix, np.diag([0, 1]))


def test_dephase_decays_only_coherences():
    rho = DensityMatrix.from_pure(plus_state())
    out = dephase(rho, 1, 0.1, 0.1)
    assert out.matrix[0, 1] == pytest.approx(0.5 * math.exp(-1))
    assert out.matrix[0, 0] == pytest.approx(0.5)
    assert np.allclose(dephase(rho, 1, math.inf, 0.1).matrix, np.eye(2) / 2)


def test_dephase_rejects_negative_time():
    with pytest.raises(StateError):
        dephase(maximally_mixed(1), 1, -1.0, 0.1)


def test_purity_and_overlap(rng):
    a = random_pure_state(2, rng)
    assert purity(DensityMatrix.from_pure(a)) == pytest.approx(1.0)
    assert purity(maximally_mixed(2)) == pytest.approx(0.25)
    assert overlap(a, a) == pytest.approx(1.0)
    assert overlap(basis_state("0"), basis_state("1")) == 0.0


seeds = st.integers(min_value=0, max_value=2**32 - 1)


def _random_density(rng, n, terms=3):
    weights = rng.dirichlet(np.ones(terms))
    mix = sum(w * random_pure_state(n, rng).projector() for w in weights)
    return DensityMatrix(n=n, matrix=mix)


@given(seeds, st.floats(min_value=0.0, max_value=1.0))
def test_pps_of_random_state_keeps_density_invariants(seed, eps):
    psi = random_pure_state(3, np.random.default_rng(seed))
    rho = pps(psi, eps)
    assert abs(np.trace(rho.matrix) - 1.0) < 1e-12
    assert np.allclose(rho.matrix, rho.matrix.conj().T, atol=1e-14)
    assert np.linalg.eigvalsh(rho.matrix).min() >= -1e-12
    assert np.allclose(rho.matrix @ psi.amplitudes, ((1 - eps) / 8 + eps) * psi.amplitudes, atol=1e-12)


@given(seeds)
def test_apply_unitary_preserves_the_spectrum(seed):
    rng = np.random.default_rng(seed)
    rho = _random_density(rng, 2)
    u = unitary_group.rvs(4, random_state=rng)
    out = apply_unitary(rho, u)
    assert np.allclose(np.linalg.eigvalsh(out.matrix), np.linalg.eigvalsh(rho.matrix), atol=1e-12)
    assert abs(np.trace(out.matrix) - 1.0) < 1e-12


@given(seeds, st.integers(min_value=1, max_value=3), st.floats(min_value=0.0, max_value=1.0), st.floats(min_value=1e-3, max_value=1.0))
def test_dephase_keeps_populations_and_shrinks_coherences(seed, q, t, t2):
    rho = _random_density(np.random.default_rng(seed), 3)
    out = dephase(rho, q, t, t2)
    assert np.allclose(np.diag(out.matrix), np.diag(rho.matrix), atol=1e-15)
    assert np.all(np.abs(out.matrix) <= np.abs(rho.matrix) + 1e-15)
    assert np.linalg.eigvalsh(out.matrix).min() >= -1e-12


def test_xy_magnetization_of_minus_i_state():
    minus_i = PureState.from_amplitudes(np.array([1, -1j]) / math.sqrt(2))
    assert xy_magnetization(DensityMatrix.from_pure(minus_i), 1) == pytest.approx(-1j, abs=1e-12)
