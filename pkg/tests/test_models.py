import logging

import numpy as np
import pytest

from Modules.exceptions import ConfigError, DimensionError, ModelValidationError
from Modules.utils import (PAULI_X, PAULI_Y, PAULI_Z, block_j, canonical_theta, hermitian_defect, ito_matrix,
                           min_eigenvalue)
from models import (assemble_lindbladian, build_finite_level, build_model, build_oqho,
                    build_oqho_raw, model_to_config)

from functionals import delta

from conftest import random_finite_level, random_hermitian


def test_damped_pair(damped_pair):
    assert damped_pair.n == 2
    assert damped_pair.m == 2
    assert not damped_pair.physical
    np.testing.assert_allclose(damped_pair.bbt, 2 * np.eye(2))
    with pytest.raises(ValueError):
        damped_pair.drift[0, 0] = 0.0


def test_physical_drift_and_dispersion(oscillator):
    np.testing.assert_allclose(oscillator.drift, -np.eye(2), atol=1e-15)
    np.testing.assert_allclose(oscillator.dispersion, block_j(2), atol=1e-15)
    assert oscillator.physical


def test_odd_dimension_rejected():
    with pytest.raises(ModelValidationError) as e:
        build_oqho(np.zeros((3, 3)), np.zeros((3, 3)), np.zeros((2, 3)), np.eye(3), np.eye(3))
    assert e.value.field == 'theta'


@pytest.mark.parametrize("field, kwargs", [
    ('theta', dict(theta=np.eye(2))),
    ('R', dict(R=np.array([[0.0, 1.0], [0.0, 0.0]]))),
    ('F', dict(F=np.array([[1.0, 1.0], [1.0, 1.0]]))),
    ('P', dict(P=-np.eye(2))),
    ('R', dict(R=np.array([[np.inf, 0.0], [0.0, 0.0]]))),
])
def test_physical_validation(field, kwargs):
    args = dict(theta=canonical_theta(2), R=np.zeros((2, 2)), M=np.eye(2), F=np.eye(2), P=0.5 * np.eye(2))
    args.update(kwargs)
    with pytest.raises(ModelValidationError) as e:
        build_oqho(**args)
    assert e.value.field == field


def test_odd_noise_channels_rejected():
    with pytest.raises(ModelValidationError):
        build_oqho(canonical_theta(2), np.zeros((2, 2)), np.ones((1, 2)), np.eye(2), 0.5 * np.eye(2))


def test_uncertainty_warning(caplog):
    with caplog.at_level(logging.WARNING, logger='models'):
        build_oqho(canonical_theta(2), np.zeros((2, 2)), np.eye(2), np.eye(2), 0.1 * np.eye(2))
    assert 'uncertainty' in caplog.text


def test_raw_shape_mismatch():
    with pytest.raises(DimensionError):
        build_oqho_raw(-np.eye(2), np.ones((3, 1)), np.eye(2), np.eye(2))
    with pytest.raises(DimensionError):
        build_oqho_raw(-np.eye(2), np.ones((2, 1)), np.eye(3), np.eye(2))


def test_raw_mode_allows_odd_dimension():
    model = build_oqho_raw(-np.eye(3), np.zeros((3, 0)), np.eye(3), np.eye(3))
    assert model.n == 3
    assert model.m == 0


def test_ito_matrix():
    W = ito_matrix(4)
    np.testing.assert_array_equal(W, W.conj().T)
    np.testing.assert_allclose(np.linalg.eigvalsh(W), [0.0, 0.0, 2.0, 2.0], atol=1e-14)


@pytest.mark.parametrize("field, kwargs", [
    ('L[0]', dict(couplings=[np.array([[0.0, 1.0], [0.0, 0.0]]), np.zeros((2, 2))])),
    ('L', dict(couplings=[PAULI_Z])),
    ('sigma0', dict(sigma0=np.eye(2))),
    ('sigma0', dict(sigma0=np.diag([1.5, -0.5]))),
    ('H0', dict(H0=np.array([[0.0, 1.0], [0.0, 0.0]]))),
])
def test_finite_level_validation(field, kwargs):
    args = dict(H0=np.zeros((2, 2)), couplings=[PAULI_Z, np.zeros((2, 2))], sigma0=np.diag([1.0, 0.0]))
    args.update(kwargs)
    with pytest.raises(ModelValidationError) as e:
        build_finite_level(**args)
    assert e.value.field == field


def test_dephasing_generator(dephasing):
    lind = assemble_lindbladian(dephasing)
    np.testing.assert_allclose(lind.apply(PAULI_X), -2 * PAULI_X, atol=1e-14)
    np.testing.assert_allclose(lind.apply(PAULI_Y), -2 * PAULI_Y, atol=1e-14)
    np.testing.assert_allclose(lind.apply(PAULI_Z), 0.0, atol=1e-14)


def test_hamiltonian_generator():
    model = build_finite_level(PAULI_Z, [np.zeros((2, 2)), np.zeros((2, 2))], np.diag([1.0, 0.0]))
    lind = assemble_lindbladian(model)
    X = 0.5 * (np.eye(2) + PAULI_X)
    np.testing.assert_allclose(lind.apply(X), -1j * (PAULI_Z @ X - X @ PAULI_Z), atol=1e-14)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_lindbladian_properties(rng, d):
    model = random_finite_level(rng, d)
    lind = assemble_lindbladian(model)
    np.testing.assert_allclose(lind.adjoint_matrix, lind.matrix.conj().T, atol=1e-12)
    # trace preservation: the adjoint annihilates the identity
    np.testing.assert_allclose(lind.apply_adjoint(np.eye(d)), 0.0, atol=1e-12)
    # Hermiticity preservation
    L_sigma = lind.apply(model.sigma0)
    np.testing.assert_allclose(L_sigma, L_sigma.conj().T, atol=1e-12)


def test_build_model_kinds(damped_pair_config, dephasing_config, family_config):
    raw = build_model(damped_pair_config['model'])
    assert not raw.physical
    physical = build_model(family_config['model'])
    np.testing.assert_allclose(physical.theta, canonical_theta(2))
    finite = build_model(dephasing_config['model'])
    assert finite.d == 2 and finite.m == 2


def test_build_model_complex_entries():
    sigma_y = {'complex': True, 'data': [[[0.0, 0.0], [0.0, -1.0]], [[0.0, 1.0], [0.0, 0.0]]]}
    model = build_model({'kind': 'finite-level', 'H0': sigma_y, 'L': [sigma_y, [[0.0, 0.0], [0.0, 0.0]]],
                         'sigma0': [[1.0, 0.0], [0.0, 0.0]]})
    np.testing.assert_array_equal(model.hamiltonian, PAULI_Y)


def test_build_model_errors():
    with pytest.raises(ConfigError) as e:
        build_model({'kind': 'spin-chain'})
    assert e.value.field == 'model.kind'
    with pytest.raises(ConfigError) as e:
        build_model({'kind': 'oqho-raw', 'A': [[-1.0]]})
    assert e.value.field == 'model'
    with pytest.raises(ConfigError) as e:
        build_model({'kind': 'oqho-raw', 'A': [['x']], 'B': [[1.0]], 'F': [[1.0]], 'P': [[1.0]]})
    assert e.value.field == 'A'


@pytest.mark.parametrize("fixture", ['damped_pair', 'oscillator', 'dephasing'])
def test_model_config_round_trip(request, fixture):
    model = request.getfixturevalue(fixture)
    rebuilt = build_model(model_to_config(model))
    assert type(rebuilt) is type(model)
    for name in ('drift', 'dispersion', 'p0', 'sigma0', 'hamiltonian'):
        if hasattr(model, name):
            np.testing.assert_array_equal(getattr(rebuilt, name), getattr(model, name))


def test_physical_and_raw_agree_on_delta():
    R = np.array([[1.0, 0.2], [0.2, 0.5]])
    M = np.array([[0.8, 0.1], [0.0, 0.6]])
    P = np.array([[0.6, 0.1], [0.1, 0.7]])
    physical = build_oqho(canonical_theta(2), R, M, np.eye(2), P)
    raw = build_oqho_raw(physical.drift, physical.dispersion, physical.weight, physical.p0)
    for t in np.linspace(0.0, 5.0, 26):
        assert delta(raw, t) == pytest.approx(delta(physical, t), rel=1e-12, abs=1e-14)


def test_lindbladian_preserves_trace_and_hermiticity(rng):
    model = random_finite_level(rng, 3)
    lind = assemble_lindbladian(model)
    for _ in range(100):
        X = random_hermitian(rng, 3)
        Y = lind.apply(X)
        tol = 1e-12 * max(1.0, np.abs(Y).max())
        assert abs(np.trace(Y)) <= tol
        np.testing.assert_allclose(Y, Y.conj().T, rtol=0, atol=tol)


def test_hermitian_helpers():
    M = np.array([[2.0, 1.0 + 1j], [1.0 - 1j, 3.0]])
    assert hermitian_defect(M) == 0.0
    assert hermitian_defect(PAULI_Y @ PAULI_X) == pytest.approx(2.0)
    assert min_eigenvalue(M) == pytest.approx(1.0)
    assert min_eigenvalue(np.zeros((0, 0))) == 0.0
