import math
import warnings

import numpy as np
import pytest
from scipy.linalg import expm
from scipy.special import eval_genlaguerre

from phononmap.system import (
    BLUE,
    CARRIER,
    DOWN,
    RED,
    UP,
    PulseSet,
    SystemParams,
    assemble_hamiltonian,
    basis_index,
    basis_label,
    basis_state,
    coupling_bands,
    coupling_blocks,
    khz_to_angular,
    laguerre,
    matrix_element,
)


def laguerre_series(n, k, x):
    """Direct power series sum_j (-1)^j C(n+k, n-j) x^j / j!."""
    return sum((-1) ** j * math.comb(n + k, n - j) * x**j / math.factorial(j) for j in range(n + 1))


def displacement_element(n_from, n_to, eta, cutoff=80):
    """<n_to| exp(i eta (a + a^dagger)) |n_from> from a large truncated matrix exponential."""
    a = np.diag(np.sqrt(np.arange(1, cutoff)), 1)
    return expm(1j * eta * (a + a.T))[n_to, n_from]


def test_laguerre_examples():
    assert laguerre(0, 0, 0.0625) == 1.0
    assert laguerre(1, 1, 0.0625) == pytest.approx(2 - 0.0625, abs=1e-15)
    x = 0.0625
    assert laguerre(2, 0, x) == pytest.approx(1 - 2 * x + x * x / 2, abs=1e-15)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_laguerre_matches_power_series(k):
    for n in range(21):
        for x in (0.0, 0.01, 0.0625, 0.1):
            ref = laguerre_series(n, k, x)
            assert laguerre(n, k, x) == pytest.approx(ref, rel=1e-12, abs=1e-14)


def test_laguerre_matches_scipy():
    for n in range(15):
        for k in range(3):
            assert laguerre(n, k, 0.3) == pytest.approx(eval_genlaguerre(n, k, 0.3), rel=1e-12)


def test_laguerre_rejects_negative_order():
    with pytest.raises(ValueError):
        laguerre(-1, 0, 0.1)


def test_matrix_element_examples():
    m00 = matrix_element(0, 0, 0.25)
    assert m00.imag == 0.0
    assert m00.real == pytest.approx(math.exp(-0.03125), abs=1e-15)
    assert m00.real == pytest.approx(0.969233, abs=1e-6)
    m12 = matrix_element(1, 1, 0.25)
    ref = 0.25 * math.sqrt(0.5) * math.exp(-0.03125) * (2 - 0.0625)
    assert m12.real == 0.0
    assert m12.imag == pytest.approx(ref, rel=1e-14)
    assert m12.imag == pytest.approx(0.331967, abs=1e-6)
    for n in range(1, 5):
        assert matrix_element(n, 1, 0.0) == 0
        assert matrix_element(n, -1, 0.0) == 0


def test_matrix_element_rejects_below_ground():
    with pytest.raises(ValueError):
        matrix_element(0, -1, 0.25)
    with pytest.raises(ValueError):
        matrix_element(2, 2, 0.25)


@pytest.mark.parametrize("eta", [0.1, 0.25, 0.4])
def test_matrix_element_equals_displacement_operator(eta):
    # M_{n, n+dn} = <n+dn| exp(i eta (a + a^dagger)) |n>, an oracle independent of Laguerre
    for n in range(12):
        for dn in (-1, 0, 1):
            if n + dn < 0:
                continue
            ref = displacement_element(n, n + dn, eta)
            assert abs(matrix_element(n, dn, eta) - ref) < 1e-12


def test_matrix_element_ordering_and_symmetry():
    carrier = [abs(matrix_element(n, 0, 0.25)) for n in range(10)]
    blue = [abs(matrix_element(n, 1, 0.25)) for n in range(10)]
    assert all(a > b for a, b in zip(carrier, carrier[1:]))
    assert all(a < b for a, b in zip(blue, blue[1:]))
    for n in range(12):
        assert abs(matrix_element(n, 1, 0.25)) == pytest.approx(abs(matrix_element(n + 1, -1, 0.25)), rel=1e-14)


def test_basis_index_bijection():
    params = SystemParams(n_max=5)
    seen = set()
    for n in range(params.n_levels):
        for spin in (DOWN, UP):
            i = basis_index(spin, n)
            assert basis_label(i) == (spin, n)
            seen.add(i)
    assert seen == set(range(params.dim))
    assert basis_state(params, UP, 2)[5] == 1.0
    with pytest.raises(ValueError):
        basis_state(params, UP, 6)


def test_params_validation_and_warning():
    for bad in ({"n_steps": 0}, {"n_max": 0}, {"total_time": 0.0}, {"eta": -0.1}):
        with pytest.raises(ValueError):
            SystemParams(**bad)
    with pytest.warns(UserWarning):
        SystemParams(omega_0=1.0, omega_z=2.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        SystemParams()
        SystemParams(eta=0.0)
    p = SystemParams()
    assert p.omega_z == pytest.approx(khz_to_angular(1400.0))
    assert p.omega_0 == pytest.approx(khz_to_angular(50.0))
    assert p.dim == 30 and p.dt == pytest.approx(0.3)
    assert p.times()[-1] == 300.0


def test_pulse_set_constraints():
    p = SystemParams(n_steps=10)
    assert PulseSet.zeros(p).is_admissible()
    assert not PulseSet.constant(p, carrier=0.5).is_admissible()
    s = np.zeros((3, 11))
    s[1, 4] = 1.2
    assert any("exceeds" in v for v in PulseSet(s).violations())
    with pytest.raises(ValueError):
        PulseSet(np.zeros((2, 11)))


def reference_hamiltonian(params, amps, t):
    """Independent loop-based construction of the coupling Hamiltonian."""
    terms = {
        CARRIER: [(-1, 1), (0, 0), (1, -1)],  # carrier: phase exp(-dn i w t)
        BLUE: [(0, 1), (1, 0)],  # blue: exp((1 - dn) i w t)
        RED: [(-1, 0), (0, -1)],  # red: exp(-(1 + dn) i w t)
    }
    h = np.zeros((params.dim, params.dim), dtype=complex)
    for field, lst in terms.items():
        for dn, k in lst:
            if params.resonant_only and k != 0:
                continue
            for n in range(params.n_levels):
                if not 0 <= n + dn <= params.n_max:
                    continue
                val = 0.5 * params.omega_0 * amps[field] * matrix_element(n, dn, params.eta)
                val *= np.exp(1j * k * params.omega_z * t)
                h[2 * (n + dn) + 1, 2 * n] += val
    return h + h.conj().T


@pytest.mark.parametrize("resonant_only", [False, True])
def test_hamiltonian_matches_reference(resonant_only):
    rng = np.random.default_rng(0)
    params = SystemParams(n_max=6, resonant_only=resonant_only)
    for _ in range(5):
        amps = rng.uniform(-1, 1, 3)
        t = rng.uniform(0, 300)
        h = assemble_hamiltonian(params, amps, t)
        assert np.max(np.abs(h - reference_hamiltonian(params, amps, t))) < 1e-14
        assert np.max(np.abs(h - h.conj().T)) == 0.0


def test_hamiltonian_trivial_cases():
    params = SystemParams(n_max=3, resonant_only=True)
    assert not np.any(assemble_hamiltonian(params, [0, 0, 0], 1.0))
    flat = SystemParams(n_max=3, eta=0.0, resonant_only=True)
    h = assemble_hamiltonian(flat, [1, 0, 0], 2.0)
    expected = np.zeros_like(h)
    for n in range(4):
        expected[2 * n + 1, 2 * n] = expected[2 * n, 2 * n + 1] = 0.5 * flat.omega_0
    assert np.max(np.abs(h - expected)) < 1e-15


def test_blue_sideband_entries_small_space():
    params = SystemParams(n_max=2, resonant_only=True)
    h = assemble_hamiltonian(params, [0, 1, 0], 0.7)
    for n in range(2):
        assert h[basis_index(UP, n + 1), basis_index(DOWN, n)] == pytest.approx(
            0.5 * params.omega_0 * matrix_element(n, 1, 0.25), abs=1e-15
        )
    # |down, 2> would couple to |up, 3>, which is truncated away
    assert np.count_nonzero(h) == 4


def test_phases_are_unity_at_t0():
    params = SystemParams(n_max=4)
    amps = np.array([0.3, -0.7, 0.5])
    h0 = assemble_hamiltonian(params, amps, 0.0)
    total = sum(assemble_hamiltonian(params, np.eye(3)[i] * amps[i], 0.0) for i in range(3))
    assert np.max(np.abs(h0 - total)) < 1e-15
    ref = reference_hamiltonian(params, amps, 0.0)
    assert np.max(np.abs(h0 - ref)) < 1e-15


def test_bands_and_blocks_agree():
    params = SystemParams(n_max=5)
    rng = np.random.default_rng(1)
    amps = rng.uniform(-1, 1, (4, 3))
    times = rng.uniform(0, 300, 4)
    diag, sub, sup = coupling_bands(params, amps, times)
    b = coupling_blocks(params, amps, times)
    assert np.array_equal(np.diagonal(b, 0, 1, 2), diag)
    assert np.array_equal(np.diagonal(b, -1, 1, 2), sub)
    assert np.array_equal(np.diagonal(b, 1, 1, 2), sup)
