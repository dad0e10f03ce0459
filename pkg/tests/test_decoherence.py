import math

import numpy as np
import pytest

from Modules.exceptions import ConfigError, DegenerateScaleError, RegularityError
from decoherence import (NEVER_REACHED, ScalarCurve, classify_regularity, curve_for,
                         decoherence_sweep, decoherence_time, delta_curve, gamma_curve,
                         tau_eps_derivatives, tau_short_horizon)
from functionals import delta, delta_derivatives

from conftest import random_hurwitz_oqho


def test_dephasing_tau(dephasing):
    result = decoherence_time(gamma_curve(dephasing), 0.18)
    assert result.tau == pytest.approx(-0.5 * math.log(0.4), rel=1e-8)
    assert result.tau == pytest.approx(0.4581, abs=1e-4)
    assert result.regular


def test_dephasing_never_reached(dephasing):
    result = decoherence_time(gamma_curve(dephasing), 0.6, t_cap=20.0)
    assert result.tau == NEVER_REACHED
    assert result.never_reached
    assert not result.regular
    assert result.t_cap == 20.0
    assert result.tau_prime is None


def test_damped_pair_tau(damped_pair):
    curve = delta_curve(damped_pair)
    result = decoherence_time(curve, 0.1)
    assert result.regular
    assert delta(damped_pair, result.tau) == pytest.approx(0.1, rel=1e-12)
    first, second = delta_derivatives(damped_pair, result.tau)
    assert result.tau_prime == pytest.approx(1.0 / first, rel=1e-12)
    assert result.tau_double_prime == pytest.approx(-second / first ** 3, rel=1e-12)


def test_first_crossing_not_last():
    # 2(1 - cos t) crosses 1 at pi/3 first, then again at 5 pi/3
    curve = ScalarCurve(eval=lambda t: (2 * (1 - math.cos(t)), 2 * math.sin(t), 2 * math.cos(t)), scale=1.0)
    result = decoherence_time(curve, 1.0, t_cap=10.0)
    assert result.tau == pytest.approx(math.pi / 3, rel=1e-10)


def test_invalid_levels(damped_pair):
    curve = delta_curve(damped_pair)
    for eps in (0.0, -0.1):
        with pytest.raises(ConfigError):
            decoherence_time(curve, eps)
    with pytest.raises(DegenerateScaleError):
        decoherence_time(ScalarCurve(eval=lambda t: (t, 1.0, 0.0), scale=0.0), 0.1)


def test_irregular_level():
    # (t - 1)^3 + 1 touches the level 1 with zero slope
    curve = ScalarCurve(eval=lambda t: ((t - 1) ** 3 + 1, 3 * (t - 1) ** 2, 6 * (t - 1)), scale=1.0)
    result = decoherence_time(curve, 1.0, t_cap=5.0)
    assert result.tau == pytest.approx(1.0, abs=1e-5)
    assert not result.regular
    assert not classify_regularity(result)
    assert result.tau_prime is None
    with pytest.raises(RegularityError):
        tau_eps_derivatives(curve, result)


def test_short_horizon(damped_pair):
    curve = delta_curve(damped_pair)
    assert tau_short_horizon(curve, 0.0) == 0.0
    assert tau_short_horizon(curve, 0.1) == pytest.approx(0.02546875, rel=1e-12)


def test_short_horizon_remainder(damped_pair):
    curve = delta_curve(damped_pair)
    ratios = []
    for eps in (0.1, 0.01, 0.001):
        tau = decoherence_time(curve, eps).tau
        ratios.append(abs(tau - tau_short_horizon(curve, eps)) / eps ** 2)
    assert ratios[0] > ratios[1] > ratios[2]


def test_short_horizon_needs_positive_rate():
    curve = ScalarCurve(eval=lambda t: (t ** 2, 2 * t, 2.0), scale=1.0)
    with pytest.raises(RegularityError):
        tau_short_horizon(curve, 0.1)


def test_derivatives_at_zero(damped_pair):
    # tau'(0) = scale / Delta'(0), tau''(0) = -scale^2 Delta''(0) / Delta'(0)^3
    curve = delta_curve(damped_pair)
    _, first, second = curve.eval(0.0)
    assert curve.scale / first == pytest.approx(0.25)
    assert -curve.scale ** 2 * second / first ** 3 == pytest.approx(3 / 32)


@pytest.mark.parametrize("seed", range(3))
def test_rate_at_tau_is_nonnegative(seed):
    model = random_hurwitz_oqho(np.random.default_rng(seed), 4, 2)
    curve = curve_for(model)
    for result in decoherence_sweep(curve, [0.01, 0.1, 0.5, 1.0]):
        if not result.never_reached:
            assert result.derivative_at_tau >= -1e-9 * curve.scale


def test_sweep_keeps_order(dephasing):
    results = decoherence_sweep(curve_for(dephasing), [0.6, 0.18, 0.05])
    assert [r.epsilon for r in results] == [0.6, 0.18, 0.05]
    assert results[0].never_reached
    assert results[2].tau < results[1].tau


def test_theta_reg_override(damped_pair):
    result = decoherence_time(delta_curve(damped_pair), 0.1, theta_reg=1e6)
    assert not result.regular


def test_tau_is_nondecreasing_in_epsilon(damped_pair):
    curve = delta_curve(damped_pair)
    taus = [decoherence_time(curve, eps).tau for eps in np.linspace(0.05, 2.5, 50)]
    assert all(b >= a for a, b in zip(taus, taus[1:]))


@pytest.mark.parametrize('epsilon', [0.1, 0.7, 2.0])
def test_curve_stays_below_level_before_tau(damped_pair, epsilon):
    curve = delta_curve(damped_pair)
    result = decoherence_time(curve, epsilon)
    for t in np.linspace(0.0, result.tau, 64, endpoint=False):
        assert curve(t) < epsilon * curve.scale


def test_tau_prime_matches_finite_difference(damped_pair):
    curve = delta_curve(damped_pair)
    eps, h = 0.1, 1e-4
    result = decoherence_time(curve, eps)
    slope = (decoherence_time(curve, eps + h).tau - decoherence_time(curve, eps - h).tau) / (2 * h)
    assert result.tau_prime == pytest.approx(slope, rel=1e-5)
