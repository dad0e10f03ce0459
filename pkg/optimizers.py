#coding:utf-8
"""Parameter optimisation of quantum memory performance.

The energy and coupling matrices of a physical-mode OQHO depend affinely on a
parameter vector p. Three problems are solved over p:

* tau-max:        tau(eps, p) -> sup
* delta-sup-min:  max_{0<=t<=T} Delta(t, p) -> inf
* discounted-min: M_T Delta(p) -> inf

A regular strong local maximiser of tau(eps, .) is also a strong local
minimiser of Delta(T, .) at T = tau(eps, p); `verify_duality` checks this.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.optimize
from munch import Munch
from tqdm import tqdm

from Modules.exceptions import (ConfigError, HorizonError, ModelValidationError,
                                RegularityError, StabilityError)
from Modules.matops import symmetrize
from decoherence import decoherence_time, delta_curve
from discounted import discounted_delta_ale
from functionals import delta, delta_derivatives, delta_star, delta_sup
from models import build_oqho
from utils import parse_float, parse_matrix, parse_matrix_list

logger = logging.getLogger(__name__)

TAU_MAX = 'tau-max'
DELTA_SUP_MIN = 'delta-sup-min'
DISCOUNTED_MIN = 'discounted-min'
OBJECTIVES = (TAU_MAX, DELTA_SUP_MIN, DISCOUNTED_MIN)

GRAD_STEP = 1e-6
HESS_STEP = 1e-4


@dataclass(frozen=True)
class ParamMap:
    """R(p) = base_R + sum p_i dR_i,  M(p) = base_M + sum p_i dM_i."""
    theta: np.ndarray
    weight: np.ndarray
    p0: np.ndarray
    base_R: np.ndarray
    base_M: np.ndarray
    directions_R: tuple
    directions_M: tuple

    def __post_init__(self):
        if len(self.directions_R) != len(self.directions_M):
            raise ModelValidationError('param_map', "directions_R and directions_M differ in length")
        for i, dR in enumerate(self.directions_R):
            if dR.shape != self.base_R.shape:
                raise ModelValidationError(f'directions_R[{i}]', f"shape {dR.shape}, expected {self.base_R.shape}")
            if np.abs(dR - dR.T).max(initial=0.0) > 1e-12:
                raise ModelValidationError(f'directions_R[{i}]', "direction is not symmetric")
        for i, dM in enumerate(self.directions_M):
            if dM.shape != self.base_M.shape:
                raise ModelValidationError(f'directions_M[{i}]', f"shape {dM.shape}, expected {self.base_M.shape}")

    @property
    def r(self):
        return len(self.directions_R)

    def matrices(self, p):
        p = np.asarray(p, dtype=float)
        R = self.base_R + sum((pi * dR for pi, dR in zip(p, self.directions_R)), np.zeros_like(self.base_R))
        M = self.base_M + sum((pi * dM for pi, dM in zip(p, self.directions_M)), np.zeros_like(self.base_M))
        return R, M

    def model(self, p):
        R, M = self.matrices(p)
        return build_oqho(self.theta, R, M, self.weight, self.p0)

    @classmethod
    def from_model(cls, model, directions_R=(), directions_M=(), base_R=None, base_M=None):
        if not model.physical:
            raise ModelValidationError('model.kind', "parameter optimisation needs a physical-mode OQHO")
        base_R = model.energy if base_R is None else np.asarray(base_R, dtype=float)
        base_M = model.coupling if base_M is None else np.asarray(base_M, dtype=float)
        r = max(len(directions_R), len(directions_M))
        dR = [np.asarray(d, dtype=float) for d in directions_R] + [np.zeros_like(base_R)] * (r - len(directions_R))
        dM = [np.asarray(d, dtype=float) for d in directions_M] + [np.zeros_like(base_M)] * (r - len(directions_M))
        return cls(theta=model.theta, weight=model.weight, p0=model.p0,
                   base_R=np.array(base_R), base_M=np.array(base_M),
                   directions_R=tuple(dR), directions_M=tuple(dM))

    @classmethod
    def from_config(cls, args, model):
        if args is not None and not isinstance(args, dict):
            raise ConfigError('param_map', f"expected a mapping, got {type(args).__name__}")
        args = Munch(args or {})
        base_R = parse_matrix(args.base_R, 'param_map.base_R') if 'base_R' in args else None
        base_M = parse_matrix(args.base_M, 'param_map.base_M') if 'base_M' in args else None
        dR = parse_matrix_list(args.get('directions_R', None), 'param_map.directions_R')
        dM = parse_matrix_list(args.get('directions_M', None), 'param_map.directions_M')
        return cls.from_model(model, dR, dM, base_R=base_R, base_M=base_M)


@dataclass
class OptimizerSettings:
    max_iter: int = 500
    grad_tol: float = 1e-6
    armijo: float = 1e-4
    shrink: float = 0.5
    initial_step: float = 1.0
    max_shrinks: int = 40
    nm_steps: int = 200
    bounds: Optional[tuple] = None
    t_cap: float = 50.0
    theta_reg: Optional[float] = None
    progress: bool = False

    @classmethod
    def from_config(cls, args):
        args = Munch(args or {})
        settings = cls()
        for key in ('max_iter', 'max_shrinks', 'nm_steps'):
            if key in args:
                setattr(settings, key, int(parse_float(args[key], f'optimizer.{key}')))
        for key in ('grad_tol', 'armijo', 'shrink', 'initial_step', 't_cap'):
            if key in args:
                setattr(settings, key, parse_float(args[key], f'optimizer.{key}'))
        if args.get('theta_reg', None) is not None:
            settings.theta_reg = parse_float(args.theta_reg, 'optimizer.theta_reg')
        if args.get('bounds', None) is not None:
            try:
                lower, upper = args.bounds
                settings.bounds = (np.asarray(lower, dtype=float), np.asarray(upper, dtype=float))
            except (TypeError, ValueError) as e:
                raise ConfigError('optimizer.bounds', f"expected [lower, upper] vectors ({e})") from e
        return settings


@dataclass
class TraceEntry:
    p: np.ndarray
    value: float
    grad_norm: float


@dataclass
class DualityRecord:
    T_star: float
    grad_norm_deltaT: float
    hessian_min_eigenvalue: float
    stationary: bool
    curvature: bool
    degenerate: bool

    @property
    def passed(self):
        return self.stationary and self.curvature


@dataclass
class OptimizationReport:
    objective: str
    p_init: np.ndarray
    p_final: np.ndarray
    trace: List[TraceEntry] = field(default_factory=list)
    converged: bool = False
    duality: Optional[DualityRecord] = None
    at_bound: Optional[np.ndarray] = None
    fallback_steps: int = 0
    message: str = ''

    @property
    def final_value(self):
        return self.trace[-1].value if self.trace else math.nan


def _steps(p, rel_step):
    return rel_step * np.maximum(1.0, np.abs(p))


def _central_gradient(fun, p, rel_step=GRAD_STEP):
    """Central differences; a coordinate whose perturbed model is invalid is retried once with h/8."""
    p = np.asarray(p, dtype=float)
    grad = np.zeros_like(p)
    for i, h in enumerate(_steps(p, rel_step)):
        for attempt in range(2):
            e = np.zeros_like(p)
            e[i] = h
            try:
                grad[i] = (fun(p + e) - fun(p - e)) / (2 * h)
                break
            except ModelValidationError:
                if attempt:
                    raise
                logger.debug("invalid model at perturbed point, coordinate %d: step %g -> %g", i, h, h / 8)
                h /= 8
    return grad


def _central_hessian(fun, p, rel_step=HESS_STEP):
    p = np.asarray(p, dtype=float)
    r = p.size
    h = _steps(p, rel_step)
    f0 = fun(p)
    H = np.zeros((r, r))
    for i in range(r):
        ei = np.zeros(r)
        ei[i] = h[i]
        H[i, i] = (fun(p + ei) - 2 * f0 + fun(p - ei)) / h[i] ** 2
        for j in range(i + 1, r):
            ej = np.zeros(r)
            ej[j] = h[j]
            H[i, j] = H[j, i] = (fun(p + ei + ej) - fun(p + ei - ej)
                                 - fun(p - ei + ej) + fun(p - ei - ej)) / (4 * h[i] * h[j])
    return 0.5 * (H + H.T)


def grad_delta_p(pmap, p, t):
    """d/dp Delta(t, p) by central differences."""
    return _central_gradient(lambda q: delta(pmap.model(q), t), p)


def tau_at(pmap, p, epsilon, t_cap=50.0, theta_reg=None):
    return decoherence_time(delta_curve(pmap.model(p)), epsilon, t_cap=t_cap, theta_reg=theta_reg)


def _regular_tau(pmap, p, epsilon, t_cap, theta_reg):
    result = tau_at(pmap, p, epsilon, t_cap=t_cap, theta_reg=theta_reg)
    if not result.regular:
        raise RegularityError(epsilon, result.derivative_at_tau if result.derivative_at_tau is not None else math.nan)
    return result


def grad_tau(pmap, p, epsilon, t_cap=50.0, theta_reg=None):
    """d tau / dp = -(d Delta / dp) / Delta' at t = tau(eps, p)."""
    result = _regular_tau(pmap, p, epsilon, t_cap, theta_reg)
    return -grad_delta_p(pmap, p, result.tau) / result.derivative_at_tau


def hessian_tau(pmap, p, epsilon, t_cap=50.0, theta_reg=None):
    """-(Delta'' g g^T + 2 S(g dDelta'^T) + d^2 Delta / dp^2) / Delta' at t = tau(eps, p)."""
    p = np.asarray(p, dtype=float)
    result = _regular_tau(pmap, p, epsilon, t_cap, theta_reg)
    tau = result.tau
    first, second = result.derivative_at_tau, result.second_derivative_at_tau

    g = -grad_delta_p(pmap, p, tau) / first
    g_rate = _central_gradient(lambda q: delta_derivatives(pmap.model(q), tau)[0], p)
    H_delta = _central_hessian(lambda q: delta(pmap.model(q), tau), p)
    H = -(second * np.outer(g, g) + 2 * symmetrize(np.outer(g, g_rate)) + H_delta) / first
    return 0.5 * (H + H.T)


def _project(g, p, bounds):
    """Zero ascent components that push through an active bound."""
    if bounds is None:
        return g
    lower, upper = bounds
    g = g.copy()
    g[(p <= lower) & (g < 0)] = 0.0
    g[(p >= upper) & (g > 0)] = 0.0
    return g


def _clip(p, bounds):
    if bounds is None:
        return p
    return np.clip(p, bounds[0], bounds[1])


def _at_bound(p, bounds):
    if bounds is None:
        return np.zeros(p.size, dtype=bool)
    return (p <= bounds[0]) | (p >= bounds[1])


def _nelder_mead(objective, p, settings, sense):
    """Derivative-free fallback with a fixed initial simplex of scale 0.05 max(1, |p_i|)."""
    r = p.size
    simplex = np.tile(p, (r + 1, 1))
    for i in range(r):
        simplex[i + 1, i] += 0.05 * max(1.0, abs(p[i]))

    def penalised(q):
        value = objective(_clip(q, settings.bounds))
        return math.inf if value is None else -sense * value

    res = scipy.optimize.minimize(penalised, p, method='Nelder-Mead',
                                  options={'initial_simplex': simplex, 'maxiter': settings.nm_steps,
                                           'xatol': 1e-10, 'fatol': 1e-14})
    return _clip(res.x, settings.bounds), -sense * res.fun, int(res.nit)


def _run(objective_name, evaluate, gradient, p0, settings, sense, fallback=False):
    """Projected gradient ascent on sense * f with Armijo backtracking.

    evaluate(p) returns the objective or None where it is undefined;
    gradient(p) returns df/dp and may raise RegularityError.
    """
    p = _clip(np.asarray(p0, dtype=float).copy(), settings.bounds)
    value = evaluate(p)
    if value is None:
        raise ConfigError('p0', f"objective {objective_name} is undefined at the initial point")
    report = OptimizationReport(objective=objective_name, p_init=p.copy(), p_final=p.copy())

    for iteration in tqdm(range(settings.max_iter), desc=objective_name, disable=not settings.progress):
        try:
            g = sense * gradient(p)
        except RegularityError as e:
            if not fallback or report.fallback_steps >= settings.nm_steps:
                report.message = f"irregular iterate: {e}"
                break
            logger.info("iteration %d: %s; switching to Nelder-Mead", iteration, e)
            q, q_value, steps = _nelder_mead(evaluate, p, settings, sense)
            report.fallback_steps += steps
            if q_value is None or not math.isfinite(q_value) or sense * (q_value - value) <= 0:
                report.message = "Nelder-Mead fallback made no progress"
                break
            p, value = q, q_value
            continue

        g_proj = _project(g, p, settings.bounds)
        g_norm = float(np.linalg.norm(g_proj))
        report.trace.append(TraceEntry(p=p.copy(), value=float(value), grad_norm=g_norm))
        if g_norm < settings.grad_tol:
            report.converged = True
            report.message = "gradient norm below tolerance"
            break

        step = settings.initial_step
        accepted = False
        for shrink in range(settings.max_shrinks):
            trial = _clip(p + step * g_proj, settings.bounds)
            trial_value = evaluate(trial)
            if trial_value is not None:
                gain = sense * (trial_value - value)
                if gain >= settings.armijo * float(g_proj @ (trial - p)) and gain >= 0:
                    accepted = True
                    break
            step *= settings.shrink
        if not accepted:
            report.message = "line search failed"
            break
        logger.debug("iteration %d: %s=%.12g step=%g shrinks=%d", iteration, objective_name, trial_value, step, shrink)
        if np.array_equal(trial, p):
            report.message = "iterate stalled"
            break
        p, value = trial, trial_value
    else:
        report.message = "iteration limit reached"

    if not report.trace or not np.array_equal(report.trace[-1].p, p):
        try:
            g_norm = float(np.linalg.norm(_project(sense * gradient(p), p, settings.bounds)))
        except RegularityError:
            g_norm = math.nan
        report.trace.append(TraceEntry(p=p.copy(), value=float(value), grad_norm=g_norm))
    report.p_final = p.copy()
    report.at_bound = _at_bound(p, settings.bounds)
    if report.at_bound.any():
        logger.info("%s: optimum on the boundary at coordinates %s", objective_name, np.flatnonzero(report.at_bound).tolist())
    return report


def maximize_tau(pmap, p0, epsilon, settings=None):
    settings = OptimizerSettings() if settings is None else settings
    if pmap.r == 0:
        raise ConfigError('param_map', "no parameter directions")

    def evaluate(p):
        try:
            result = tau_at(pmap, p, epsilon, t_cap=settings.t_cap, theta_reg=settings.theta_reg)
        except ModelValidationError:
            return None
        return None if result.never_reached else result.tau

    if evaluate(np.asarray(p0, dtype=float)) is None:
        raise RegularityError(epsilon, math.nan)
    return _run(TAU_MAX, evaluate, lambda p: grad_tau(pmap, p, epsilon, settings.t_cap, settings.theta_reg),
                p0, settings, sense=+1, fallback=True)


def minimize_delta_sup(pmap, p0, T, settings=None):
    settings = OptimizerSettings() if settings is None else settings
    if not T > 0:
        raise ConfigError('horizon', f"horizon must be positive, got {T}")

    def objective(p):
        return delta_sup(pmap.model(p), T)[0]

    def evaluate(p):
        try:
            return objective(p)
        except ModelValidationError:
            return None

    return _run(DELTA_SUP_MIN, evaluate, lambda p: _central_gradient(objective, p), p0, settings, sense=-1)


def minimize_discounted(pmap, p0, T, settings=None):
    settings = OptimizerSettings() if settings is None else settings

    def objective(p):
        return discounted_delta_ale(pmap.model(p), T).value

    def evaluate(p):
        try:
            return objective(p)
        except (HorizonError, StabilityError, ModelValidationError):
            # inadmissible iterates are rejected by the line search
            return None

    objective(np.asarray(p0, dtype=float))
    return _run(DISCOUNTED_MIN, evaluate, lambda p: _central_gradient(objective, p), p0, settings, sense=-1)


def verify_duality(pmap, p_star, epsilon, settings=None):
    """Check that p_star is a strong local minimiser of Delta(T*, .) at T* = tau(eps, p_star)."""
    settings = OptimizerSettings() if settings is None else settings
    p_star = np.asarray(p_star, dtype=float)
    result = _regular_tau(pmap, p_star, epsilon, settings.t_cap, settings.theta_reg)
    T_star = result.tau
    scale = delta_star(pmap.model(p_star))

    g = grad_delta_p(pmap, p_star, T_star)
    H = _central_hessian(lambda q: delta(pmap.model(q), T_star), p_star)
    min_eig = float(np.linalg.eigvalsh(H)[0]) if H.size else 0.0
    record = DualityRecord(T_star=T_star, grad_norm_deltaT=float(np.linalg.norm(g)),
                           hessian_min_eigenvalue=min_eig,
                           stationary=bool(np.linalg.norm(g) <= 1e-4 * scale),
                           curvature=bool(min_eig >= -1e-6 * scale),
                           degenerate=bool(abs(min_eig) <= 1e-6 * scale))
    logger.info("duality at T*=%.10g: |grad|=%.3e, min eig=%.3e, passed=%s",
                T_star, record.grad_norm_deltaT, min_eig, record.passed)
    return record
