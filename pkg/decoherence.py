#coding:utf-8
"""Memory decoherence times.

tau(eps) = min{t >= 0 : value(t) >= eps * scale} for a deviation functional
normalised by its reference scale. The same solver serves the Heisenberg
functional Delta of an OQHO and the Hilbert-Schmidt functional Gamma of any
finite-level model through `ScalarCurve`.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.optimize

from Modules.exceptions import ConfigError, DegenerateScaleError, RegularityError
from functionals import delta, delta_eval, delta_star, gamma, gamma_eval, gamma_star
from models import assemble_lindbladian

logger = logging.getLogger(__name__)

NEVER_REACHED = math.inf

MARCH_GROWTH = 1.5
MARCH_SKIP_FRACTION = 1.0 / 1024
BISECTION_RTOL = 1e-10
LOW_CONFIDENCE = 1e-4


@dataclass(frozen=True)
class ScalarCurve:
    """t -> (value, first derivative, second derivative) with value(0) = 0."""
    eval: Callable[[float], tuple]
    scale: float
    value: Optional[Callable[[float], float]] = None
    name: str = 'curve'

    def __call__(self, t):
        if self.value is not None:
            return self.value(t)
        return self.eval(t)[0]


@dataclass
class DecoherenceResult:
    epsilon: float
    tau: float
    scale: float
    t_cap: float
    derivative_at_tau: Optional[float] = None
    second_derivative_at_tau: Optional[float] = None
    regular: bool = False
    tau_prime: Optional[float] = None
    tau_double_prime: Optional[float] = None
    low_confidence: bool = False
    bisection_iterations: int = 0
    evaluations: int = 0

    @property
    def never_reached(self):
        return math.isinf(self.tau)


def delta_curve(model):
    return ScalarCurve(eval=lambda t: delta_eval(model, t), scale=delta_star(model),
                       value=lambda t: delta(model, t), name='delta')


def gamma_curve(model, lind=None):
    lind = assemble_lindbladian(model) if lind is None else lind
    return ScalarCurve(eval=lambda t: gamma_eval(model, lind, t), scale=gamma_star(model),
                       value=lambda t: gamma(model, lind, t), name='gamma')


def curve_for(model):
    """Delta curve for OQHOs, Gamma curve for finite-level models."""
    if hasattr(model, 'drift'):
        return delta_curve(model)
    return gamma_curve(model)


def _first_crossing(curve, threshold, t_cap):
    """March from 0 with geometric steps; return the bracket of the first crossing."""
    max_step = t_cap * MARCH_SKIP_FRACTION
    step = min(t_cap * 1e-9, max_step)
    t_prev, evaluations = 0.0, 0
    while t_prev < t_cap:
        t = min(t_prev + step, t_cap)
        evaluations += 1
        if curve(t) >= threshold:
            return t_prev, t, evaluations
        t_prev = t
        step = min(step * MARCH_GROWTH, max_step)
    return None, None, evaluations


def decoherence_time(curve, epsilon, t_cap=50.0, theta_reg=None):
    epsilon = float(epsilon)
    if not epsilon > 0:
        raise ConfigError('epsilon', f"fidelity level must be positive, got {epsilon}")
    if not curve.scale > 0:
        raise DegenerateScaleError(f"reference scale {curve.scale} is not positive")
    if not t_cap > 0:
        raise ConfigError('t_cap', f"search horizon must be positive, got {t_cap}")

    threshold = epsilon * curve.scale
    lo, hi, evaluations = _first_crossing(curve, threshold, t_cap)
    if lo is None:
        logger.debug("%s: eps=%g never reached within t_cap=%g (%d evaluations)",
                     curve.name, epsilon, t_cap, evaluations)
        return DecoherenceResult(epsilon=epsilon, tau=NEVER_REACHED, scale=curve.scale,
                                 t_cap=t_cap, evaluations=evaluations)

    tau, info = scipy.optimize.bisect(lambda t: curve(t) - threshold, lo, hi,
                                      xtol=1e-15, rtol=BISECTION_RTOL, maxiter=200,
                                      full_output=True, disp=False)
    value, first, second = curve.eval(tau)
    if first > 0:
        # one Newton step makes tau a smooth function of the model parameters
        polished = tau - (value - threshold) / first
        if lo <= polished <= hi:
            tau = polished
            value, first, second = curve.eval(tau)
    result = DecoherenceResult(epsilon=epsilon, tau=float(tau), scale=curve.scale, t_cap=t_cap,
                               derivative_at_tau=float(first), second_derivative_at_tau=float(second),
                               bisection_iterations=info.iterations,
                               evaluations=evaluations + info.function_calls)
    result.regular = classify_regularity(result, theta_reg)
    if result.regular:
        result.tau_prime, result.tau_double_prime = tau_eps_derivatives(curve, result)
        result.low_confidence = abs(first) < LOW_CONFIDENCE * curve.scale / result.tau
        if result.low_confidence:
            logger.warning("%s: tau'' at eps=%g is low-confidence (derivative %.3e)",
                           curve.name, epsilon, first)
    logger.debug("%s: eps=%g tau=%.12g after %d march and %d bisection steps",
                 curve.name, epsilon, result.tau, evaluations, info.iterations)
    return result


def classify_regularity(result, theta_reg=None):
    """eps is regular iff the time derivative at tau(eps) is strictly positive."""
    if result.never_reached or result.derivative_at_tau is None:
        return False
    if theta_reg is None:
        theta_reg = 1e-8 * result.scale / max(result.tau, np.finfo(float).tiny)
    return bool(result.derivative_at_tau > theta_reg)


def tau_eps_derivatives(curve, result):
    """(tau'(eps), tau''(eps)) = (s / D', -s^2 D'' / D'^3) at t = tau(eps)."""
    if not result.regular:
        raise RegularityError(result.epsilon, result.derivative_at_tau if result.derivative_at_tau is not None else math.nan)
    _, first, second = curve.eval(result.tau)
    scale = curve.scale
    return scale / first, -scale ** 2 * second / first ** 3


def tau_short_horizon(curve, epsilon):
    """Quadratic Taylor approximation of tau(eps) from the derivatives at t = 0."""
    epsilon = float(epsilon)
    if epsilon == 0:
        return 0.0
    _, first, second = curve.eval(0.0)
    if not first > 0:
        raise RegularityError(0.0, first)
    scale = curve.scale
    tau1 = scale / first
    tau2 = -scale ** 2 * second / first ** 3
    return tau1 * epsilon + 0.5 * tau2 * epsilon ** 2


def decoherence_sweep(curve, epsilons, t_cap=50.0, theta_reg=None):
    return [decoherence_time(curve, eps, t_cap=t_cap, theta_reg=theta_reg) for eps in epsilons]
