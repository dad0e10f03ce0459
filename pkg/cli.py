#coding:utf-8
"""qmem: command-line front end.

    qmem evaluate     -p Configs/damped_pair.json --grid 0:2:201
    qmem decoherence  -p Configs/dephasing.json --eps 0.18 --eps 0.6
    qmem discounted   -p Configs/dephasing.json --horizon 0.1 --with-oracle
    qmem check-bound  -p Configs/damped_pair.json --horizon 0.05 --horizon 0.1
    qmem optimize     -p Configs/damped_family.yaml

Every command writes its records under --out together with a copy of the
config and run.log. Exit codes: 0 success, 2 configuration or validation
error, 3 numerical failure.
"""
import copy
import functools
import logging
import os
import os.path as osp
import shutil
import sys
from multiprocessing import Pool

import click
import numpy as np
from tqdm import tqdm

from Modules.exceptions import (ConfigError, ConvergenceError, DegenerateScaleError, HorizonError,
                                QuantumMemoryError, RegularityError, VALIDATION_ERRORS)
from Modules.matops import spectral_abscissa
from decoherence import curve_for, decoherence_time, tau_short_horizon
from discounted import (check_discount_bound, discounted_delta_ale, discounted_gamma_superop,
                        discounted_quadrature, max_admissible_horizon)
from functionals import (DeviationTrace, delta, delta_eval, delta_star, delta_trace,
                         gamma, gamma_eval, gamma_star, gamma_trace)
from models import FiniteLevelModel, assemble_lindbladian, build_model, model_to_config
from optimizers import (DELTA_SUP_MIN, OBJECTIVES, TAU_MAX, OptimizerSettings,
                        ParamMap, maximize_tau, minimize_delta_sup, minimize_discounted,
                        verify_duality)
from utils import (config_section, load_config, log_print, parse_float, parse_float_list,
                   recursive_unmunch, setup_logging, write_csv, write_json)

logger = logging.getLogger(__name__)

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class NumericalFailure(Exception):
    """A command finished writing records but nothing numerically useful came out."""


def handle_errors(command):
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except VALIDATION_ERRORS as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(EXIT_CONFIG)
        except (NumericalFailure, QuantumMemoryError) as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(EXIT_NUMERICAL)
    return wrapper


def common_options(command):
    command = click.option('--quiet', is_flag=True, help='Only warnings on the console, no progress bars.')(command)
    command = click.option('-j', '--jobs', default=1, type=int, help='Worker processes for sweeps.')(command)
    command = click.option('-o', '--out', default='runs', type=str, help='Output directory.')(command)
    command = click.option('-p', '--config', 'config_path', required=True, type=str, help='JSON or YAML run config.')(command)
    return command


def prepare(config_path, out, quiet):
    if not osp.exists(out): os.makedirs(out, exist_ok=True)
    setup_logging(logging.getLogger(), out, quiet)
    config = load_config(config_path)
    target = osp.join(out, osp.basename(config_path))
    if not (osp.exists(target) and osp.samefile(config_path, target)):
        shutil.copy(config_path, target)
    model = build_model(config.model)
    logger.info("loaded %s model from %s", config.model.kind, config_path)
    return config, model


def fan_out(worker, tasks, jobs, desc, quiet):
    """Map worker over tasks, keeping input order."""
    if jobs <= 1 or len(tasks) <= 1:
        return [worker(task) for task in tqdm(tasks, desc=desc, disable=quiet)]
    with Pool(processes=jobs) as pool:
        return list(tqdm(pool.imap(worker, tasks), total=len(tasks), desc=desc, disable=quiet))


def parse_grid(grid, config):
    grid_params = config_section(config, 'grid')
    t_min = parse_float(grid_params.get('t_min', 0.0), 'grid.t_min')
    t_max = parse_float(grid_params.get('t_max', 2.0), 'grid.t_max')
    n_points = grid_params.get('n_points', 201)
    if grid is not None:
        parts = grid.split(':')
        if len(parts) != 3:
            raise ConfigError('grid', f"expected start:stop:count, got {grid!r}")
        t_min, t_max = parse_float(parts[0], 'grid'), parse_float(parts[1], 'grid')
        n_points = parts[2]
    try:
        n_points = int(n_points)
    except (TypeError, ValueError) as e:
        raise ConfigError('grid.n_points', f"expected an integer, got {n_points!r}") from e
    if n_points < 1 or t_min < 0 or t_max < t_min:
        raise ConfigError('grid', f"invalid time grid [{t_min}, {t_max}] with {n_points} points")
    return np.linspace(t_min, t_max, n_points)


def _lindbladian_for(model):
    return assemble_lindbladian(model) if isinstance(model, FiniteLevelModel) else None


# workers take only picklable arguments and rebuild curves locally

def _trace_chunk(task):
    model, lind, times = task
    return gamma_trace(model, lind, times) if lind is not None else delta_trace(model, times)


def _decoherence_record(task):
    model, epsilon, t_cap, theta_reg = task
    curve = curve_for(model)
    result = decoherence_time(curve, epsilon, t_cap=t_cap, theta_reg=theta_reg)
    try:
        tau_hat = tau_short_horizon(curve, epsilon)
    except RegularityError:
        tau_hat = None
    gap = abs(result.tau - tau_hat) if tau_hat is not None and not result.never_reached else None
    return {
        'epsilon': epsilon,
        'tau': result.tau,
        'never_reached': result.never_reached,
        'regular': result.regular,
        'derivative_at_tau': result.derivative_at_tau,
        'tau_prime': result.tau_prime,
        'tau_double_prime': result.tau_double_prime,
        'tau_hat': tau_hat,
        'taylor_gap': gap,
        'low_confidence': result.low_confidence,
    }


def _discounted_record(task):
    model, T, with_oracle, t_max_factor = task
    lind = _lindbladian_for(model)
    generator = lind.matrix if lind is not None else model.drift
    abscissa = spectral_abscissa(generator)
    record = {'horizon': T, 'max_admissible_horizon': max_admissible_horizon(abscissa)}
    try:
        if lind is not None:
            result = discounted_gamma_superop(model, lind, T)
        else:
            result = discounted_delta_ale(model, T)
    except HorizonError as e:
        logger.warning("T=%g is not admissible: %s", T, e)
        record.update(admissible=False, value=None, admissibility_margin=None)
        return record
    record.update(admissible=True, value=result.value, path=result.path,
                  admissibility_margin=result.admissibility_margin)
    if with_oracle:
        integrand = (lambda t: gamma(model, lind, t)) if lind is not None else (lambda t: delta(model, t))
        oracle = discounted_quadrature(integrand, T, growth_rate=2 * max(0.0, abscissa),
                                       t_max_factor=t_max_factor)
        denominator = abs(oracle.value) if oracle.value != 0 else 1.0
        record.update(quadrature=oracle.value, quadrature_error=oracle.error_estimate,
                      relative_gap=abs(result.value - oracle.value) / denominator)
    return record


def _bound_record(task):
    model, T, eps_max, n_eps = task
    lind = _lindbladian_for(model)
    abscissa = spectral_abscissa(lind.matrix if lind is not None else model.drift)
    growth = 2 * max(0.0, abscissa)
    record = {'horizon': T, 'max_admissible_horizon': max_admissible_horizon(abscissa)}
    if not 1.0 / T - growth > 1e-10:
        record.update(evaluated=False)
        return record
    check = check_discount_bound(curve_for(model), T, eps_max=eps_max, n_eps=n_eps, growth_rate=growth)
    record.update(evaluated=True, lhs=check.lhs, rhs=check.rhs, holds=check.holds,
                  eps_max=check.eps_max, tail_bound=check.tail_bound, n_eps=check.n_eps)
    return record


def _horizons(horizon, section, field):
    values = list(horizon) if horizon else parse_float_list(section.get('horizons', None), field)
    if not values:
        raise ConfigError(field, "no horizons given")
    for T in values:
        if not T > 0:
            raise ConfigError(field, f"horizon must be positive, got {T}")
    return values


@click.group()
def main():
    """Quantum memory performance toolkit."""


@main.command()
@common_options
@click.option('--grid', default=None, type=str, help='Time grid start:stop:count.')
@handle_errors
def evaluate(config_path, out, jobs, quiet, grid):
    """Deviation functional over a time grid."""
    config, model = prepare(config_path, out, quiet)
    times = parse_grid(grid, config)
    lind = _lindbladian_for(model)
    chunks = np.array_split(times, max(1, min(jobs, len(times))))
    parts = fan_out(_trace_chunk, [(model, lind, chunk.tolist()) for chunk in chunks], jobs, 'evaluate', quiet)
    trace = DeviationTrace(times=[t for p in parts for t in p.times],
                           values=[v for p in parts for v in p.values], kind=parts[0].kind)
    write_csv(osp.join(out, 'evaluate.csv'), {'t': trace.times, 'value': trace.values})

    if lind is not None:
        _, first, second = gamma_eval(model, lind, 0.0)
        scale = gamma_star(model)
    else:
        _, first, second = delta_eval(model, 0.0)
        try:
            scale = delta_star(model)
        except DegenerateScaleError:
            scale = None
    write_json(osp.join(out, 'evaluate.json'), {
        'kind': trace.kind, 'scale': scale, 'derivative_at_0': first, 'second_derivative_at_0': second,
        't_min': times[0], 't_max': times[-1], 'n_points': len(times),
    })
    log_print(f"{trace.kind}: {len(trace.times)} points written to {osp.join(out, 'evaluate.csv')}", logger)


@main.command()
@common_options
@click.option('--eps', multiple=True, type=float, help='Fidelity level (repeatable).')
@handle_errors
def decoherence(config_path, out, jobs, quiet, eps):
    """Decoherence times for a list of fidelity levels."""
    config, model = prepare(config_path, out, quiet)
    params = config_section(config, 'decoherence')
    epsilons = list(eps) if eps else parse_float_list(params.get('epsilon', None), 'decoherence.epsilon')
    if not epsilons:
        raise ConfigError('epsilon', "no fidelity levels given")
    t_cap = parse_float(params.get('t_cap', 50.0), 'decoherence.t_cap')
    theta_reg = params.get('theta_reg', None)
    theta_reg = None if theta_reg is None else parse_float(theta_reg, 'decoherence.theta_reg')

    records = fan_out(_decoherence_record, [(model, e, t_cap, theta_reg) for e in epsilons],
                      jobs, 'decoherence', quiet)
    write_json(osp.join(out, 'decoherence.json'), records)
    reached = sum(not r['never_reached'] for r in records)
    log_print(f"decoherence: {reached}/{len(records)} levels reached within t_cap={t_cap:g}", logger)
    if not reached:
        raise NumericalFailure("no fidelity level is reached within the search horizon")


@main.command()
@common_options
@click.option('--horizon', multiple=True, type=float, help='Discount horizon T (repeatable).')
@click.option('--with-oracle', is_flag=True, help='Also evaluate by quadrature and report the gap.')
@handle_errors
def discounted(config_path, out, jobs, quiet, horizon, with_oracle):
    """Discounted criteria by closed form."""
    config, model = prepare(config_path, out, quiet)
    params = config_section(config, 'discounted')
    horizons = _horizons(horizon, params, 'discounted.horizons')
    t_max_factor = parse_float(params.get('t_max_factor', 40), 'discounted.t_max_factor')

    records = fan_out(_discounted_record, [(model, T, with_oracle, t_max_factor) for T in horizons],
                      jobs, 'discounted', quiet)
    write_json(osp.join(out, 'discounted.json'), records)
    admissible = sum(r['admissible'] for r in records)
    log_print(f"discounted: {admissible}/{len(records)} horizons admissible", logger)
    if not admissible:
        raise NumericalFailure("no admissible horizon")


@main.command(name='check-bound')
@common_options
@click.option('--horizon', multiple=True, type=float, help='Discount horizon T (repeatable).')
@handle_errors
def check_bound(config_path, out, jobs, quiet, horizon):
    """Discounted criterion against the decoherence-time integral bound."""
    config, model = prepare(config_path, out, quiet)
    params = config_section(config, 'bound')
    horizons = _horizons(horizon, params, 'bound.horizons')
    eps_max = params.get('eps_max', None)
    eps_max = None if eps_max in (None, 'auto') else parse_float(eps_max, 'bound.eps_max')
    n_eps = int(parse_float(params.get('n_eps', 256), 'bound.n_eps'))

    records = fan_out(_bound_record, [(model, T, eps_max, n_eps) for T in horizons], jobs, 'check-bound', quiet)
    write_json(osp.join(out, 'check_bound.json'), records)
    evaluated = [r for r in records if r['evaluated']]
    log_print(f"check-bound: {sum(r['holds'] for r in evaluated)}/{len(evaluated)} evaluated horizons hold", logger)


def write_report(out, report, pmap):
    rows = {
        'iteration': list(range(len(report.trace))),
        'objective': [entry.value for entry in report.trace],
        'grad_norm': [entry.grad_norm for entry in report.trace],
    }
    for i in range(pmap.r):
        rows[f'p_{i}'] = [entry.p[i] for entry in report.trace]
    write_csv(osp.join(out, 'trace.csv'), rows)

    duality = None
    if report.duality is not None:
        d = report.duality
        duality = {'T_star': d.T_star, 'grad_norm_deltaT': d.grad_norm_deltaT,
                   'hessian_min_eigenvalue': d.hessian_min_eigenvalue, 'stationary': d.stationary,
                   'curvature': d.curvature, 'degenerate': d.degenerate, 'passed': d.passed}
    write_json(osp.join(out, 'report.json'), {
        'objective': report.objective,
        'p_init': report.p_init,
        'p_final': report.p_final,
        'final_value': report.final_value,
        'iterations': len(report.trace),
        'converged': report.converged,
        'message': report.message,
        'at_bound': report.at_bound,
        'fallback_steps': report.fallback_steps,
        'duality': duality,
    })


def final_model_config(config, pmap, p_final):
    """The optimized model as a config that reproduces the final objective at p = 0."""
    R, M = pmap.matrices(p_final)
    final = copy.deepcopy(recursive_unmunch(config))
    final['model'] = model_to_config(pmap.model(p_final))
    param_map = final.setdefault('param_map', {})
    param_map['base_R'] = R.tolist()
    param_map['base_M'] = M.tolist()
    param_map['directions_R'] = [d.tolist() for d in pmap.directions_R]
    param_map['directions_M'] = [d.tolist() for d in pmap.directions_M]
    final.setdefault('optimizer', {})['p0'] = [0.0] * pmap.r
    return final


@main.command()
@common_options
@handle_errors
def optimize(config_path, out, jobs, quiet):
    """Parameter optimisation of an OQHO family."""
    config, model = prepare(config_path, out, quiet)
    params = config_section(config, 'optimizer')
    objective = params.get('objective', TAU_MAX)
    if objective not in OBJECTIVES:
        raise ConfigError('optimizer.objective', f"unknown objective {objective!r}; expected one of {', '.join(OBJECTIVES)}")
    settings = OptimizerSettings.from_config(params)
    settings.progress = not quiet
    pmap = ParamMap.from_config(config_section(config, 'param_map'), model)
    p0 = parse_float_list(params.get('p0', None), 'optimizer.p0') or [0.0] * pmap.r
    if len(p0) != pmap.r:
        raise ConfigError('optimizer.p0', f"expected {pmap.r} parameters, got {len(p0)}")

    if objective == TAU_MAX:
        epsilon = parse_float(params.get('epsilon', None), 'optimizer.epsilon')
        report = maximize_tau(pmap, p0, epsilon, settings)
        if report.converged:
            try:
                report.duality = verify_duality(pmap, report.p_final, epsilon, settings)
            except RegularityError as e:
                logger.warning("duality check skipped: %s", e)
    else:
        horizon = parse_float(params.get('horizon', None), 'optimizer.horizon')
        if objective == DELTA_SUP_MIN:
            report = minimize_delta_sup(pmap, p0, horizon, settings)
        else:
            report = minimize_discounted(pmap, p0, horizon, settings)

    write_report(out, report, pmap)
    write_json(osp.join(out, 'final_model.json'), final_model_config(config, pmap, report.p_final))
    log_print(f"{objective}: {report.message} after {len(report.trace)} iterates, "
              f"value {report.final_value:.12g} at p = {np.array2string(report.p_final, precision=8)}", logger)
    if not report.converged:
        raise ConvergenceError(f"optimizer did not converge: {report.message}")


if __name__ == "__main__":
    main()
