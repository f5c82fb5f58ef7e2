import numpy as np
import pytest

from phononmap.analysis import (
    RobustnessCurve,
    ScalingRow,
    check_truncation,
    count_inversions,
    default_xi_grid,
    scaling_run,
    scaling_to_csv,
    scan_calibration,
)
from phononmap.crab import SCENARIOS, SearchConfig, evaluate_pulse, initial_crab, synthesize_pulse
from phononmap.system import PulseSet, SystemParams

SMALL = SystemParams(n_steps=150, total_time=150.0, n_max=8)


def some_pulse(params, seed=0):
    crab = initial_crab(SCENARIOS["three-field"], 6, np.random.default_rng(seed), params)
    return synthesize_pulse(crab, params)


def test_default_grid():
    xi = default_xi_grid()
    assert xi.size == 21 and xi[10] == 0.0
    assert xi[0] == -0.01 and xi[-1] == 0.01


def test_scan_zero_point_and_zero_pulses():
    pulse = some_pulse(SMALL)
    curve = scan_calibration(pulse, SMALL, 0, 4, default_xi_grid(0.01, 5))
    assert curve.F0 == evaluate_pulse(pulse, 0, 4, SMALL).F
    assert curve.F[2] == curve.F0
    assert curve.drop >= 0 and curve.peak_to_peak >= curve.drop
    flat = scan_calibration(PulseSet.zeros(SMALL), SMALL, 0, 4, [-0.1, 0.0, 0.1])
    assert np.all(flat.F == 0.0)
    with pytest.raises(ValueError):
        scan_calibration(pulse, SMALL, 0, 4, [0.01, 0.02])


def test_scaling_commutes_with_rabi_frequency():
    pulse = some_pulse(SMALL, 3)
    xi = [-0.05, 0.0, 0.03]
    curve = scan_calibration(pulse, SMALL, 1, 4, xi)
    for x, f in zip(xi, curve.F):
        other = evaluate_pulse(pulse, 1, 4, SMALL.replace(omega_0=SMALL.omega_0 * (1 + x))).F
        assert abs(other - f) < 1e-12


def test_scan_is_deterministic():
    pulse = some_pulse(SMALL, 5)
    a = scan_calibration(pulse, SMALL, 0, 3, default_xi_grid(0.02, 7))
    b = scan_calibration(pulse, SMALL, 0, 3, default_xi_grid(0.02, 7))
    assert np.array_equal(a.F, b.F)


def test_curve_metrics_and_csv():
    c = RobustnessCurve(np.array([-1.0, 0.0, 1.0]), np.array([0.90, 0.95, 0.97]), 0.95)
    assert c.drop == pytest.approx(0.05)
    assert c.peak_to_peak == pytest.approx(0.07)
    assert c.to_csv().splitlines() == ["xi,F", "-1.0,0.9", "0.0,0.95", "1.0,0.97"]
    assert c.to_dict()["drop"] == c.drop


def test_truncation_trivial_cases():
    rep = check_truncation(PulseSet.zeros(SMALL), SMALL, 0, 4)
    assert rep.delta_F == 0.0 and rep.max_population_diff == 0.0
    # short resonant blue drive: population never approaches the truncation edge
    params = SystemParams(resonant_only=True, n_steps=100, total_time=30.0)
    rep = check_truncation(PulseSet.constant(params, blue=1.0), params, 0, 6)
    assert rep.delta_F < 1e-10 and rep.max_population_diff < 1e-10
    assert rep.n_max_big == 19 and rep.to_dict()["delta_F"] == rep.delta_F
    with pytest.raises(ValueError):
        check_truncation(PulseSet.zeros(SMALL), SMALL, 0, 4, n_max_big=5)


def test_truncation_sees_leakage():
    # carrier plus blue climbs the ladder and reaches the edge of a tiny space
    params = SystemParams(resonant_only=True, n_steps=200, total_time=600.0, n_max=3)
    rep = check_truncation(PulseSet.constant(params, carrier=1.0, blue=1.0), params, 0, 3, n_max_big=8)
    assert rep.max_population_diff > 1e-3


def test_scaling_run_small():
    cfg = SearchConfig(K=3, restarts=1, budget=30, seed=1)
    rows = scaling_run(0, 120.0, [2, 3], "carrier+red", SMALL, cfg)
    assert [r.N for r in rows] == [2, 3]
    assert all(r.T_opt == 120.0 and 0 <= r.F <= 1 for r in rows)
    disc = scaling_run(0, 120.0, [2, 6], "discrete", SMALL, cfg)
    assert [r.N for r in disc] == [2]
    lines = scaling_to_csv(rows).splitlines()
    assert lines[0] == "N,one_minus_F,T_opt_us" and len(lines) == 3
    with pytest.raises(ValueError):
        scaling_run(0, 120.0, [], "carrier+red", SMALL, cfg)


def test_count_inversions():
    rows = [ScalingRow(n, f, 300.0, "x") for n, f in [(2, 0.99), (3, 0.97), (4, 0.98), (5, 0.9)]]
    assert count_inversions(rows) == 1
