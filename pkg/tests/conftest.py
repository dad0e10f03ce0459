import json

import numpy as np
import pytest

from Modules.matops import spectral_abscissa
from Modules.utils import PAULI_X, PAULI_Z, canonical_theta
from models import build_finite_level, build_oqho, build_oqho_raw
from optimizers import ParamMap

SQRT2 = np.sqrt(2.0)


@pytest.fixture
def damped_pair():
    """A = -I, B = sqrt(2) I, F = I, P = I/2: Delta(t) = (1 - e^-t)^2 + 2(1 - e^-2t)."""
    return build_oqho_raw(-np.eye(2), SQRT2 * np.eye(2), np.eye(2), 0.5 * np.eye(2))


@pytest.fixture
def dephasing():
    """Qubit dephasing with L_1 = sigma_z, L_2 = 0 from the |+> state."""
    return build_finite_level(np.zeros((2, 2)), [PAULI_Z, np.zeros((2, 2))],
                              0.5 * (np.eye(2) + PAULI_X))


@pytest.fixture
def oscillator():
    """Physical-mode oscillator with A = -I and B = J."""
    return build_oqho(canonical_theta(2), np.zeros((2, 2)), np.eye(2), np.eye(2), 0.5 * np.eye(2))


@pytest.fixture
def damped_family(oscillator):
    """R(p) = p_0 I + p_1 diag(1, -1); tau(0.5, .) has a strong maximum at p = 0."""
    return ParamMap.from_model(oscillator, directions_R=[np.eye(2), np.diag([1.0, -1.0])])


@pytest.fixture
def damping_family(oscillator):
    """M(p) = (1 + p) I, so A = -(1 + p)^2 I."""
    return ParamMap.from_model(oscillator, directions_M=[np.eye(2)])


@pytest.fixture
def zero_family(oscillator):
    return ParamMap.from_model(oscillator, directions_R=[np.zeros((2, 2))])


def random_hurwitz_oqho(rng, n, m):
    X = rng.standard_normal((n, n))
    A = X - (spectral_abscissa(X) + rng.uniform(0.2, 1.0)) * np.eye(n)
    B = rng.standard_normal((n, m))
    F = rng.standard_normal((n, n)) + n * np.eye(n)
    C = rng.standard_normal((n, n))
    P = C @ C.T / n + 0.1 * np.eye(n)
    return build_oqho_raw(A, B, F, P)


def random_hermitian(rng, d, scale=1.0):
    X = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return scale * 0.5 * (X + X.conj().T)


def random_finite_level(rng, d):
    H0 = random_hermitian(rng, d)
    couplings = [random_hermitian(rng, d, 0.5), random_hermitian(rng, d, 0.5)]
    C = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    sigma0 = C @ C.conj().T
    sigma0 /= np.trace(sigma0).real
    return build_finite_level(H0, couplings, sigma0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def write_config(tmp_path):
    def write(payload, name='config.json'):
        path = tmp_path / name
        path.write_text(json.dumps(payload), encoding='utf-8')
        return str(path)
    return write


@pytest.fixture
def damped_pair_config():
    return {
        'model': {
            'kind': 'oqho-raw',
            'A': [[-1.0, 0.0], [0.0, -1.0]],
            'B': [[SQRT2, 0.0], [0.0, SQRT2]],
            'F': [[1.0, 0.0], [0.0, 1.0]],
            'P': [[0.5, 0.0], [0.0, 0.5]],
        }
    }


@pytest.fixture
def dephasing_config():
    return {
        'model': {
            'kind': 'finite-level',
            'H0': [[0.0, 0.0], [0.0, 0.0]],
            'L': [[[1.0, 0.0], [0.0, -1.0]], [[0.0, 0.0], [0.0, 0.0]]],
            'sigma0': [[0.5, 0.5], [0.5, 0.5]],
        }
    }


@pytest.fixture
def family_config():
    return {
        'model': {
            'kind': 'oqho-physical',
            'theta': 'canonical',
            'R': [[0.0, 0.0], [0.0, 0.0]],
            'M': [[1.0, 0.0], [0.0, 1.0]],
            'F': [[1.0, 0.0], [0.0, 1.0]],
            'P': [[0.5, 0.0], [0.0, 0.5]],
        },
        'param_map': {
            'directions_R': [[[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, -1.0]]],
        },
        'optimizer': {'objective': 'tau-max', 'epsilon': 0.5, 'p0': [0.3, -0.2]},
    }
