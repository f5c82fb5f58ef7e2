import json

import numpy as np
import pytest

from phononmap.qnd import (
    DensityMatrix,
    IdealMaps,
    PhononChannel,
    PropagatedMaps,
    closed_form_probability,
    ideal_map,
    initial_population_measurement,
    protocol_error,
    random_channel,
    random_density_matrix,
    random_unitary,
    run_filter_sequence,
    thermal_state,
)
from phononmap.system import PulseSet, SystemParams

D = 6


def projector(d, n):
    p = np.zeros((d, d), dtype=complex)
    p[n, n] = 1.0
    return p


def lowering_channel(d, gamma=0.3):
    """Amplitude-damping-like toy channel: |n> -> |n-1> with probability gamma (n >= 1)."""
    k1 = np.zeros((d, d))
    k0 = np.eye(d)
    for n in range(1, d):
        k1[n - 1, n] = np.sqrt(gamma)
        k0[n, n] = np.sqrt(1 - gamma)
    return PhononChannel([k0, k1])


def test_ideal_map_is_unitary_and_selective():
    rng = np.random.default_rng(0)
    u = ideal_map(D, 2, (random_unitary(D, rng), random_unitary(D, rng)))
    assert np.max(np.abs(u.conj().T @ u - np.eye(2 * D))) < 1e-12
    for n in range(D):
        col = u[:, 2 * n]
        p_up = np.sum(np.abs(col[1::2]) ** 2)
        assert p_up == pytest.approx(1.0 if n == 2 else 0.0, abs=1e-12)


def test_trivial_sequences():
    maps = IdealMaps(D)
    ident = PhononChannel.identity(D)
    for m in range(D):
        assert run_filter_sequence(projector(D, m), m, m, ident, maps).P_f == pytest.approx(1.0, abs=1e-14)
        assert run_filter_sequence(projector(D, m), m, (m + 1) % D, ident, maps).P_f == pytest.approx(0.0, abs=1e-14)
        assert initial_population_measurement(projector(D, m), m, maps) == pytest.approx(1.0, abs=1e-14)
        assert initial_population_measurement(projector(D, (m + 2) % D), m, maps) == pytest.approx(0.0, abs=1e-14)


def test_thermal_state_with_lowering_channel():
    rho = thermal_state(D, 1.0)
    # geometric weights q^n (1 - q) with q = 1/2, renormalised over D levels
    weights = 0.5 ** np.arange(D)
    weights /= weights.sum()
    assert np.allclose(np.diag(rho).real, weights, atol=1e-15)
    ch = lowering_channel(D)
    for m in range(D):
        for mp in range(D):
            res = run_filter_sequence(rho, m, mp, ch, IdealMaps(D))
            expected = weights[m] * {m: 1 - 0.3 if m > 0 else 1.0, m - 1: 0.3}.get(mp, 0.0)
            assert res.P_f == pytest.approx(expected, abs=1e-12)
        assert initial_population_measurement(rho, m, IdealMaps(D)) == pytest.approx(weights[m], abs=1e-14)


def test_random_instances_match_closed_form():
    rng = np.random.default_rng(123)
    worst = 0.0
    for _ in range(120):
        d = int(rng.integers(2, 7))
        rho = random_density_matrix(d, rng, rank=int(rng.integers(1, d + 1)))
        ch = random_channel(d, rng, n_kraus=int(rng.integers(1, 4)))
        m, mp = int(rng.integers(d)), int(rng.integers(d))
        res = run_filter_sequence(rho, m, mp, ch, IdealMaps(d, rng))
        worst = max(worst, abs(res.P_f - closed_form_probability(rho, m, mp, ch)))
        res.state.check()
        for step in res.steps:
            assert step["trace"] + step["shelf_a1"] + step["shelf_a2"] == pytest.approx(1.0, abs=1e-12)
    assert worst < 1e-10


def test_steps_are_recorded_in_order():
    res = run_filter_sequence(thermal_state(D, 0.5), 1, 1, PhononChannel.identity(D), IdealMaps(D))
    labels = [s["step"][0] for s in res.steps]
    assert labels == list("abcdefgh")
    assert res.to_dict()["P_f"] == res.P_f


def test_protocol_error_vanishes_as_fidelity_grows():
    # interpolate U(theta) = exp(theta log U_ideal): the map fidelity rises to 1 as theta -> 1
    d = 5
    rng = np.random.default_rng(8)
    u_ideal = ideal_map(d, 1, (random_unitary(d, rng), random_unitary(d, rng)))
    w, v = np.linalg.eig(u_ideal)
    rho = random_density_matrix(d, rng)
    ch = random_channel(d, rng)
    errs = []
    for theta in (0.6, 0.8, 0.9, 0.99, 1.0):
        u = v @ np.diag(w**theta) @ np.linalg.inv(v)
        errs.append(protocol_error(rho, 1, 1, ch, lambda m, u=u: u))
    assert errs[-1] < 1e-10
    assert all(a >= b - 1e-12 for a, b in zip(errs[1:], errs[2:]))


def test_channel_validation_and_serialisation(tmp_path):
    with pytest.raises(ValueError):
        PhononChannel([np.eye(3) * 0.5])
    with pytest.raises(ValueError):
        PhononChannel([])
    ch = random_channel(4, np.random.default_rng(2), 2)
    path = tmp_path / "ch.json"
    path.write_text(ch.to_json(), encoding="utf-8")
    back = PhononChannel.load(path)
    assert all(np.array_equal(a, b) for a, b in zip(ch.kraus, back.kraus))
    raw = json.loads(ch.to_json())
    assert len(raw) == 2 and len(raw[0][0][0]) == 2


def test_input_validation():
    maps = IdealMaps(D)
    with pytest.raises(ValueError):
        run_filter_sequence(np.eye(D) / 2, 0, 0, PhononChannel.identity(D), maps)
    with pytest.raises(ValueError):
        run_filter_sequence(thermal_state(D, 1), D, 0, PhononChannel.identity(D), maps)
    with pytest.raises(ValueError):
        run_filter_sequence(thermal_state(D, 1), 0, 0, PhononChannel.identity(D + 1), maps)
    with pytest.raises(ValueError):
        DensityMatrix(np.zeros((2, 2)), 0.5, 0.0).check()
    with pytest.raises(KeyError):
        PropagatedMaps(SystemParams(n_max=3, n_steps=10), {0: PulseSet(np.zeros((3, 11)))})(1)
