#coding:utf-8
"""Discounted (exponentially weighted) performance criteria.

M_T f = (1/T) int_0^inf e^{-t/T} f(t) dt is the average of f over an
exponentially distributed storage time with mean T. Closed forms reduce it
to algebraic Lyapunov equations; the quadrature path serves as an
independent oracle.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import scipy.linalg

from Modules.exceptions import ConvergenceError, HorizonError, RegularityError
from Modules.matops import frobenius_inner, solve_lyapunov, spectral_abscissa, symmetrize, unvec, vec
from decoherence import NEVER_REACHED, decoherence_time

logger = logging.getLogger(__name__)

ALE_CLOSED_FORM = 'ale-closed-form'
SUPEROP_CLOSED_FORM = 'superop-closed-form'
QUADRATURE = 'quadrature'

ADMISSIBILITY_MARGIN = 1e-10
TAIL_LEVEL = 1e-8


@dataclass
class DiscountedResult:
    horizon: float
    value: float
    path: str
    admissibility_margin: float
    error_estimate: Optional[float] = None
    refinements: int = 0


@dataclass
class BoundCheck:
    horizon: float
    lhs: float
    rhs: float
    holds: bool
    eps_max: float
    tail_bound: float
    n_eps: int


@dataclass
class AsymptoticRow:
    horizon: float
    discounted: float
    linear: float
    r1: float
    r2: float


def max_admissible_horizon(abscissa):
    growth = max(0.0, abscissa)
    return math.inf if growth == 0 else 1.0 / (2.0 * growth)


def admissibility_margin(T, abscissa):
    return 1.0 / T - 2.0 * max(0.0, abscissa)


def _check_horizon(T, abscissa):
    margin = admissibility_margin(T, abscissa) if T > 0 else -math.inf
    if not margin > ADMISSIBILITY_MARGIN:
        raise HorizonError(T, max_admissible_horizon(abscissa))
    return margin


def discounted_delta_ale(model, T):
    """M_T Delta = <Sigma, P_T + P - 2 S((I - TA)^{-1} P)> with A_T P_T + P_T A_T^T + P/T + BB^T = 0."""
    A = model.drift
    P = model.p0
    n = model.n
    margin = _check_horizon(T, spectral_abscissa(A))

    A_T = A - np.eye(n) / (2 * T)
    P_T = solve_lyapunov(A_T, P / T + model.bbt)
    resolvent = scipy.linalg.solve(np.eye(n) - T * A, P)
    value = frobenius_inner(model.sigma_weight, P_T + P - 2 * symmetrize(resolvent))
    return DiscountedResult(horizon=T, value=float(value), path=ALE_CLOSED_FORM,
                            admissibility_margin=margin)


def discounted_gramian(model, T):
    """Discounted controllability Gramian G_T: A_T G_T + G_T A_T^T + BB^T = 0."""
    _check_horizon(T, spectral_abscissa(model.drift))
    A_T = model.drift - np.eye(model.n) / (2 * T)
    return solve_lyapunov(A_T, model.bbt)


def superop_gramian(lind, T):
    """Q_T solving Q_T L_T + L_T^+ Q_T + I/T = 0 in vectorized form."""
    N = lind.matrix.shape[0]
    _check_horizon(T, spectral_abscissa(lind.matrix))
    adjoint_T = lind.adjoint_matrix - np.eye(N) / (2 * T)
    # A_h X + X A_h^* + Q = 0 with A_h = L_T^+, whose conjugate transpose is L_T
    return solve_lyapunov(adjoint_T, np.eye(N, dtype=complex) / T)


def discounted_gamma_superop(model, lind, T):
    """M_T Gamma = <sigma0, K_T(sigma0)>, K_T = Q_T - (I + TL)(I - TL)^{-1}."""
    N = lind.matrix.shape[0]
    margin = _check_horizon(T, spectral_abscissa(lind.matrix))
    Q_T = superop_gramian(lind, T)
    eye = np.eye(N)
    cayley = scipy.linalg.solve(eye - T * lind.matrix, eye + T * lind.matrix)
    K_T = Q_T - cayley

    v = vec(model.sigma0)
    value = np.vdot(v, K_T @ v)
    if abs(value.imag) > 1e-10 * max(1.0, abs(value.real)):
        raise ConvergenceError(f"discounted Hilbert-Schmidt criterion has imaginary residue {value.imag:.3e}")
    return DiscountedResult(horizon=T, value=float(value.real), path=SUPEROP_CLOSED_FORM,
                            admissibility_margin=margin)


def discounted_sigma(lind, sigma0, T):
    """Discounted reduced state M_T sigma = (I - TL)^{-1}(sigma0)."""
    _check_horizon(T, spectral_abscissa(lind.matrix))
    N = lind.matrix.shape[0]
    sigma = unvec(scipy.linalg.solve(np.eye(N) - T * lind.matrix, vec(sigma0)), lind.dim)
    return 0.5 * (sigma + sigma.conj().T)


def _gauss_panels(f, a, b, panels, nodes, weights):
    edges = np.linspace(a, b, panels + 1)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        ts = lo + half * (nodes + 1.0)
        total += half * sum(w * f(t) for w, t in zip(weights, ts))
    return total


def discounted_quadrature(curve, T, t_max=None, n_points=20, growth_rate=0.0,
                          t_max_factor=40.0, rtol=1e-9, max_refinements=20):
    """M_T f by composite Gauss-Legendre with panel doubling on [0, t_max]."""
    margin = 1.0 / T - growth_rate if T > 0 else -math.inf
    if not margin > 0:
        raise HorizonError(T, math.inf if growth_rate <= 0 else 1.0 / growth_rate)
    if t_max is None:
        t_max = t_max_factor / margin

    nodes, weights = np.polynomial.legendre.leggauss(n_points)
    integrand = lambda t: math.exp(-t / T) * curve(t) / T

    panels = 4
    previous = _gauss_panels(integrand, 0.0, t_max, panels, nodes, weights)
    for refinement in range(1, max_refinements + 1):
        panels *= 2
        current = _gauss_panels(integrand, 0.0, t_max, panels, nodes, weights)
        change = abs(current - previous)
        if change <= rtol * abs(current) or change <= 1e-300:
            tail = abs(integrand(t_max)) / margin
            return DiscountedResult(horizon=T, value=float(current), path=QUADRATURE,
                                    admissibility_margin=margin, error_estimate=change + tail,
                                    refinements=refinement)
        previous = current
    raise ConvergenceError(f"discounted quadrature did not converge after {max_refinements} refinements (T={T:g})")


def _curve_sup(curve, t_end, n_grid=512):
    return max(curve(t) for t in np.linspace(0.0, t_end, n_grid))


def tau_discount_integral(curve, T, eps_max, n_eps=256, t_cap=50.0):
    """int_0^eps_max e^{-tau(eps)/T} d eps by composite 16-point Gauss-Legendre.

    Integrated in u with eps = eps_max u^2: tau grows like sqrt(eps) when the
    curve starts with zero slope.
    """
    if eps_max <= 0:
        return 0.0
    n_eps = max(int(n_eps), 256)
    nodes, weights = np.polynomial.legendre.leggauss(16)

    def integrand(u):
        tau = decoherence_time(curve, eps_max * u * u, t_cap=t_cap).tau
        return 0.0 if tau == NEVER_REACHED else 2 * eps_max * u * math.exp(-tau / T)

    return _gauss_panels(integrand, 0.0, 1.0, -(-n_eps // 16), nodes, weights)


def check_discount_bound(curve, T, eps_max=None, n_eps=256, t_cap=None, growth_rate=0.0):
    """Compare M_T value with scale * int_0^inf e^{-tau(eps)/T} d eps."""
    t_tail = T * math.log(1.0 / TAIL_LEVEL)
    t_cap = max(50.0, 2.0 * t_tail) if t_cap is None else t_cap
    lhs = discounted_quadrature(curve, T, growth_rate=growth_rate).value

    if eps_max is None:
        # beyond this level tau(eps) > t_tail, so the integrand is below TAIL_LEVEL
        eps_max = _curve_sup(curve, t_tail) / curve.scale
    integral = tau_discount_integral(curve, T, eps_max, n_eps=n_eps, t_cap=t_cap)
    rhs = curve.scale * integral

    tau_max = decoherence_time(curve, eps_max, t_cap=t_cap).tau if eps_max > 0 else 0.0
    reach = max(0.0, _curve_sup(curve, t_cap) / curve.scale - eps_max)
    tail_bound = curve.scale * reach * (0.0 if tau_max == NEVER_REACHED else math.exp(-tau_max / T))

    holds = lhs <= rhs * (1 + 1e-6) + 1e-300
    logger.info("bound check T=%g: lhs=%.10g rhs=%.10g holds=%s", T, lhs, rhs, holds)
    return BoundCheck(horizon=T, lhs=lhs, rhs=rhs, holds=bool(holds), eps_max=float(eps_max),
                      tail_bound=float(tail_bound), n_eps=max(int(n_eps), 256))


def asymptotic_diagnostics(curve, T_list, n_eps=256, t_cap=50.0):
    """Ratios r1 = M_T/(D'(0) T) and r2 = scale*int e^{-tau/T}/(D'(0) T) for T -> 0+."""
    _, first, _ = curve.eval(0.0)
    if not first > 0:
        raise RegularityError(0.0, first)
    rows: List[AsymptoticRow] = []
    for T in T_list:
        discounted = discounted_quadrature(curve, T).value
        eps_max = _curve_sup(curve, T * math.log(1.0 / TAIL_LEVEL)) / curve.scale
        integral = curve.scale * tau_discount_integral(curve, T, eps_max, n_eps=n_eps, t_cap=t_cap)
        linear = first * T
        rows.append(AsymptoticRow(horizon=T, discounted=discounted, linear=linear,
                                  r1=discounted / linear, r2=integral / linear))
    return rows


def laplace_identity_check(curve, T):
    """(M_T f, f'(0) T + T^2 M_T f'') for a curve with f(0) = 0."""
    lhs = discounted_quadrature(curve, T).value
    _, first, _ = curve.eval(0.0)
    second = discounted_quadrature(lambda t: curve.eval(t)[2], T).value
    return lhs, first * T + T ** 2 * second
