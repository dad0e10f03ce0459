#coding:utf-8
"""Mean-square deviation functionals.

Heisenberg picture (OQHO closed form)::

    Delta(t) = <Sigma, alpha(t) P alpha(t)^T + G(t)>_F,   alpha(t) = e^{tA} - I,

with G(t) the finite-horizon controllability Gramian of (A, B).

Schrodinger picture (any finite-level system)::

    Gamma(t) = ||sigma(t) - sigma0||_HS^2,   sigma(t) = e^{tL}(sigma0).
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List

import numpy as np
import scipy.optimize

from Modules.exceptions import DegenerateScaleError
from Modules.matops import expm, frobenius_inner, hermitize, symmetrize, unvec, vec

logger = logging.getLogger(__name__)

HEISENBERG_DELTA = 'heisenberg-delta'
SCHRODINGER_GAMMA = 'schrodinger-gamma'


@dataclass
class DeviationTrace:
    times: List[float]
    values: List[float]
    kind: str
    meta: dict = field(default_factory=dict)


def _van_loan(model, t):
    """Return (e^{tA}, G(t)).

    One exponential of h [[-A, BB^T], [0, A^T]] at h = t / 2^s with h |A| <= 1,
    then s doublings G(2h) = G(h) + e^{hA} G(h) e^{hA^T}, so the e^{-hA} block
    stays bounded for large t.
    """
    A = model.drift
    n = model.n
    norm = float(np.linalg.norm(A, 1)) * t
    s = max(0, math.ceil(math.log2(norm))) if norm > 1 else 0
    h = t / 2 ** s

    C = np.zeros((2 * n, 2 * n))
    C[:n, :n] = -A
    C[:n, n:] = model.bbt
    C[n:, n:] = A.T
    E = expm(h * C)
    eA = E[n:, n:].T
    G = symmetrize(eA @ E[:n, n:])
    for _ in range(s):
        G = symmetrize(G + eA @ G @ eA.T)
        eA = eA @ eA
    return eA, G


def gramian(model, t):
    """G(t) = int_0^t e^{vA} BB^T e^{vA^T} dv."""
    if t == 0:
        return np.zeros((model.n, model.n))
    return _van_loan(model, t)[1]


def second_moment_deviation(model, t):
    """Second-moment matrix of xi(t) = X(t) - X0: alpha P alpha^T + G."""
    if t == 0:
        return np.zeros((model.n, model.n))
    eA, G = _van_loan(model, t)
    alpha = eA - np.eye(model.n)
    return symmetrize(alpha @ model.p0 @ alpha.T) + G


def delta(model, t):
    if t == 0:
        return 0.0
    return max(frobenius_inner(model.sigma_weight, second_moment_deviation(model, t)), 0.0)


def delta_eval(model, t):
    """(Delta, dDelta/dt, d2Delta/dt2) from a single exponential."""
    A = model.drift
    P = model.p0
    S = model.sigma_weight
    Q = model.bbt
    if t == 0:
        eA, G = np.eye(model.n), np.zeros_like(A)
    else:
        eA, G = _van_loan(model, t)
    alpha = eA - np.eye(model.n)
    AeA = A @ eA

    G_dot = A @ G + G @ A.T + Q
    value = frobenius_inner(S, alpha @ P @ alpha.T + G) if t else 0.0
    first = frobenius_inner(S, 2 * symmetrize(AeA @ P @ alpha.T) + G_dot)
    second = frobenius_inner(S, 2 * symmetrize(A @ AeA @ P @ alpha.T)
                             + 2 * AeA @ P @ AeA.T + A @ G_dot + G_dot @ A.T)
    return max(value, 0.0), first, second


def delta_derivatives(model, t):
    _, first, second = delta_eval(model, t)
    return first, second


def delta_star(model):
    """Reference scale Delta_* = Tr(F P F^T)."""
    value = float(np.trace(model.weight @ model.p0 @ model.weight.T))
    if value <= 1e-14:
        raise DegenerateScaleError(f"reference scale Delta_* = {value:.3e} is degenerate")
    return value


def delta_sup(model, T, n_grid=512):
    """(max_{0<=t<=T} Delta(t), argmax) by grid scan plus golden-section refinement."""
    times = np.linspace(0.0, T, n_grid)
    values = np.array([delta(model, t) for t in times])
    i = int(np.argmax(values))
    best_t, best = float(times[i]), float(values[i])
    if 0 < i < n_grid - 1:
        try:
            res = scipy.optimize.minimize_scalar(
                lambda t: -delta(model, min(max(t, 0.0), T)),
                bracket=(times[i - 1], times[i], times[i + 1]),
                method='golden', tol=1e-8)
            t_ref = float(np.clip(res.x, times[i - 1], times[i + 1]))
            v_ref = delta(model, t_ref)
            if v_ref > best:
                best_t, best = t_ref, v_ref
        except ValueError:
            # flat top: the grid point is already a maximiser
            pass
    return best, best_t


def delta_trace(model, times):
    times = [float(t) for t in times]
    return DeviationTrace(times=times, values=[delta(model, t) for t in times], kind=HEISENBERG_DELTA)


def evolve_state(lind, sigma0, t, return_drift=False):
    """sigma(t) = e^{tL}(sigma0), Hermitized."""
    d = lind.dim
    if t == 0:
        sigma = np.array(sigma0, dtype=complex)
    else:
        sigma = unvec(expm(t * lind.matrix) @ vec(sigma0), d)
    drift = 0.5 * float(np.linalg.norm(sigma - sigma.conj().T))
    if drift > 1e-12:
        logger.debug("Hermitization drift %.3e at t=%g", drift, t)
    sigma = hermitize(sigma)
    if return_drift:
        return sigma, drift
    return sigma


def gamma_components(model, lind, t):
    """(||sigma0||^2, <sigma0, sigma(t)>, ||sigma(t)||^2)."""
    sigma0 = model.sigma0
    sigma = evolve_state(lind, sigma0, t)
    return (frobenius_inner(sigma0, sigma0).real,
            frobenius_inner(sigma0, sigma).real,
            frobenius_inner(sigma, sigma).real)


def gamma(model, lind, t):
    if t == 0:
        return 0.0
    gam = evolve_state(lind, model.sigma0, t) - model.sigma0
    return max(float(np.real(np.trace(gam @ gam))), 0.0)


def gamma_eval(model, lind, t):
    """(Gamma, dGamma/dt, d2Gamma/dt2)."""
    sigma = evolve_state(lind, model.sigma0, t)
    gam = sigma - model.sigma0
    L_sigma = lind.apply(sigma)
    LL_sigma = lind.apply(L_sigma)
    value = max(float(np.real(np.trace(gam @ gam))), 0.0) if t else 0.0
    first = 2 * frobenius_inner(gam, L_sigma).real
    second = 2 * frobenius_inner(gam, LL_sigma).real + 2 * frobenius_inner(L_sigma, L_sigma).real
    return value, float(first), float(second)


def gamma_derivatives(model, lind, t):
    _, first, second = gamma_eval(model, lind, t)
    return first, second


def gamma_star(model):
    """Reference scale Gamma_* = Tr(sigma0^2)."""
    return float(np.real(np.trace(model.sigma0 @ model.sigma0)))


def gamma_trace(model, lind, times):
    times = [float(t) for t in times]
    return DeviationTrace(times=times, values=[gamma(model, lind, t) for t in times], kind=SCHRODINGER_GAMMA)
