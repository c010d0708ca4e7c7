import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm, sqrtm
from scipy.stats import poisson

from qilimits import fock
from qilimits.fock import (
    DensityMatrix,
    DimensionBudgetError,
    NumericalError,
    PureState,
    amplifier,
    chernoff_exponent,
    coherent_state,
    fidelity,
    helstrom_pe,
    loss,
    mean_photon_number,
    noisy_attenuator,
    partial_trace,
    phase_shift,
    tensor,
    thermal_state,
    tmsv_state,
    trace_distance,
)


def annihilation(d):
    return np.diag(np.sqrt(np.arange(1, d)), 1)


def dense_attenuator(rho, eta, n, env_dim, big):
    """Beam-splitter dilation by a dense matrix exponential.

    Both modes get `big` levels so no photon-number block is cut, and the
    output is projected back onto the input cutoff.
    """
    d = rho.shape[0]
    a = np.kron(annihilation(big), np.eye(big))
    b = np.kron(np.eye(big), annihilation(big))
    theta = math.acos(math.sqrt(eta))
    u = expm(theta * (a.conj().T @ b - a @ b.conj().T))
    sys_in = np.zeros((big, big), dtype=complex)
    sys_in[:d, :d] = rho
    env = np.zeros(big)
    env[:env_dim] = np.diag(thermal_state(n, env_dim).matrix).real
    joint = u @ np.kron(sys_in, np.diag(env)) @ u.conj().T
    return np.einsum("aebe->ab", joint.reshape(big, big, big, big))[:d, :d]


def dense_amplifier(rho, gain, d, big):
    """Two-mode squeezer dilation on a generous cutoff, projected back to `d` levels."""
    a = np.kron(annihilation(big), np.eye(big))
    b = np.kron(np.eye(big), annihilation(big))
    r = math.acosh(math.sqrt(gain))
    u = expm(r * (a.conj().T @ b.conj().T - a @ b))
    padded = np.zeros((big, big), dtype=complex)
    padded[: rho.shape[0], : rho.shape[0]] = rho
    vac = np.zeros((big, big))
    vac[0, 0] = 1
    joint = u @ np.kron(padded, vac) @ u.conj().T
    return np.einsum("aebe->ab", joint.reshape(big, big, big, big))[:d, :d]


# --- states -----------------------------------------------------------------


def test_thermal_state_entries_and_deficit():
    rho = thermal_state(0.7, 12)
    n = np.arange(12)
    np.testing.assert_allclose(np.diag(rho.matrix).real, 0.7**n / 1.7 ** (n + 1), rtol=1e-14)
    assert rho.trace_deficit == pytest.approx((0.7 / 1.7) ** 12, rel=1e-12)
    assert rho.trace + rho.trace_deficit == pytest.approx(1.0, abs=1e-14)


def test_thermal_state_rejects_negative_occupation():
    with pytest.raises(ValueError):
        thermal_state(-0.1, 5)


def test_tmsv_support_and_marginal():
    psi = tmsv_state(0.4, 20)
    amps = psi.amplitudes.reshape(20, 20)
    assert np.count_nonzero(amps - np.diag(np.diag(amps))) == 0
    assert psi.deficit == pytest.approx((0.4 / 1.4) ** 20)
    idler = partial_trace(psi, [0])
    np.testing.assert_allclose(idler.matrix, thermal_state(0.4, 20).matrix, atol=1e-15)
    assert mean_photon_number(psi, 1) == pytest.approx(0.4, abs=1e-9)


def test_coherent_state_photon_statistics_are_poisson():
    psi = coherent_state(1.3 * np.exp(0.4j), 30)
    probs = np.abs(psi.amplitudes) ** 2
    np.testing.assert_allclose(probs, poisson.pmf(np.arange(30), 1.69), rtol=1e-12)
    assert psi.deficit == pytest.approx(poisson.sf(29, 1.69), rel=1e-9)


def test_density_matrix_validation():
    with pytest.raises(ValueError):
        DensityMatrix((2,), np.array([[0.5, 0.1], [0.2, 0.5]]))
    with pytest.raises(ValueError):
        DensityMatrix((2,), np.eye(2))
    with pytest.raises(ValueError):
        DensityMatrix((3,), np.eye(2) / 2)
    rho = DensityMatrix((2,), np.eye(2) / 2)
    with pytest.raises(ValueError):
        rho.matrix[0, 0] = 1


def test_non_uniform_dims():
    rho = tensor(thermal_state(0.1, 4), thermal_state(0.2, 7))
    assert rho.dims == (4, 7)
    with pytest.raises(AttributeError):
        rho.dim
    back = partial_trace(rho, [1])
    np.testing.assert_allclose(back.matrix, thermal_state(0.1, 4).trace * thermal_state(0.2, 7).matrix, atol=1e-15)


# --- channels ---------------------------------------------------------------


@pytest.mark.parametrize("eta,n", [(0.3, 0.0), (0.7, 0.8), (0.05, 2.0)])
def test_attenuator_matches_dense_dilation(eta, n):
    rng = np.random.default_rng(3)
    d = 6
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    v *= 0.6 ** np.arange(d)
    v /= np.linalg.norm(v)
    rho = np.outer(v, v.conj())
    env_dim = 14
    got = noisy_attenuator(DensityMatrix((d,), rho), 0, eta, n, env_dim=env_dim)
    want = dense_attenuator(rho, eta, n, env_dim, d + env_dim)
    np.testing.assert_allclose(got.matrix, want, atol=1e-12)


@pytest.mark.parametrize("gain", [1.0, 1.4, 2.5])
def test_amplifier_matches_dense_dilation(gain):
    rho = coherent_state(0.5, 5).to_density()
    got = amplifier(rho, 0, gain, out_dim=6)
    want = dense_amplifier(rho.matrix, gain, 6, 40)
    np.testing.assert_allclose(got.matrix, want, atol=1e-10)


def test_attenuator_mean_photon_number():
    rho = tensor(coherent_state(1.0, 25), thermal_state(0.3, 20))
    out = noisy_attenuator(rho, 0, 0.4, 1.5, out_dim=40)
    assert mean_photon_number(out, 0) == pytest.approx(0.4 * 1.0 + 0.6 * 1.5, abs=1e-9)
    np.testing.assert_allclose(partial_trace(out, [1]).matrix, partial_trace(rho, [1]).matrix, atol=1e-12)


def test_amplifier_mean_photon_number():
    rho = coherent_state(0.8, 20)
    out = amplifier(rho, 0, 1.5, out_dim=60)
    assert mean_photon_number(out) == pytest.approx(1.5 * 0.64 + 0.5, abs=1e-9)


def test_attenuator_endpoints_are_exact():
    psi = coherent_state(0.9, 15)
    same = noisy_attenuator(psi, 0, 1.0, 3.0)
    np.testing.assert_array_equal(same.matrix, psi.to_density().matrix)
    gone = noisy_attenuator(psi, 0, 0.0, 0.5, out_dim=10)
    np.testing.assert_allclose(gone.matrix, psi.to_density().trace * thermal_state(0.5, 10).matrix, atol=1e-15)


def test_loss_and_channel_argument_checks():
    psi = coherent_state(0.5, 30)
    with pytest.raises(ValueError):
        noisy_attenuator(psi, 0, 1.1, 0.0)
    with pytest.raises(ValueError):
        noisy_attenuator(psi, 0, 0.5, -1.0)
    with pytest.raises(ValueError):
        amplifier(psi, 0, 0.9)
    out = loss(psi, 0, 0.36)
    np.testing.assert_allclose(out.matrix, coherent_state(0.3, 30).to_density().matrix, atol=1e-12)


def test_dimension_budget_guard(monkeypatch):
    monkeypatch.setattr(fock, "MAX_JOINT_DIM", 50)
    with pytest.raises(DimensionBudgetError):
        noisy_attenuator(tensor(thermal_state(0.1, 8), thermal_state(0.1, 8)), 0, 0.5, 0.5)


def test_phase_shift_keeps_photon_statistics():
    psi = coherent_state(1.1, 20)
    out = phase_shift(psi, 0, 0.7)
    np.testing.assert_allclose(np.diag(out.matrix), np.diag(psi.to_density().matrix), atol=1e-15)
    np.testing.assert_allclose(out.matrix, coherent_state(1.1 * np.exp(0.7j), 20).to_density().matrix, atol=1e-12)


# --- measures ---------------------------------------------------------------


def test_fidelity_of_coherent_states_is_overlap():
    a, b = 0.6 + 0.2j, -0.1 + 0.4j
    f = fidelity(coherent_state(a, 30), coherent_state(b, 30))
    assert f == pytest.approx(math.exp(-abs(a - b) ** 2 / 2), abs=1e-12)


def test_fidelity_of_thermal_states():
    f = fidelity(thermal_state(0.3, 60), thermal_state(0.8, 60))
    p = np.diag(thermal_state(0.3, 60).matrix).real
    q = np.diag(thermal_state(0.8, 60).matrix).real
    assert f == pytest.approx(np.sqrt(p * q).sum(), abs=1e-12)


def test_fidelity_blocks_match_dense_sqrtm():
    rng = np.random.default_rng(11)
    mats = []
    for _ in range(2):
        g = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
        m = g @ g.conj().T
        mats.append(m / np.trace(m).real)
    s = sqrtm(mats[0])
    dense = np.trace(sqrtm(s @ mats[1] @ s)).real
    assert fidelity(DensityMatrix((6,), mats[0]), DensityMatrix((6,), mats[1])) == pytest.approx(dense, abs=1e-10)


def test_fidelity_clamp_failure():
    bad = np.diag([1.2, -0.2]).astype(complex)
    with pytest.raises(NumericalError):
        fidelity(DensityMatrix((2,), bad), DensityMatrix((2,), np.eye(2) / 2))


def test_helstrom_pure_states():
    psi, phi = coherent_state(0.3, 20), coherent_state(-0.2j, 20)
    ov = abs(np.vdot(psi.amplitudes, phi.amplitudes)) ** 2
    p0 = 0.3
    want = 0.5 * (1 - math.sqrt(1 - 4 * p0 * (1 - p0) * ov))
    assert helstrom_pe(psi, phi, p0) == pytest.approx(want, abs=1e-12)
    assert helstrom_pe(psi, psi, p0) == pytest.approx(p0, abs=1e-12)
    with pytest.raises(ValueError):
        helstrom_pe(psi, phi, 0.3, 0.3)


def test_chernoff_pure_states_is_log_overlap():
    psi, phi = coherent_state(0.5, 25), coherent_state(0.1, 25)
    s, xi = chernoff_exponent(psi, phi)
    assert xi == pytest.approx(0.16, rel=1e-6)  # -ln |<a|b>|^2 = |a - b|^2
    assert 0 < s < 1


def test_chernoff_commuting_states_matches_classical():
    p = np.diag(thermal_state(0.5, 80).matrix).real
    q = np.diag(thermal_state(2.0, 80).matrix).real
    grid = np.linspace(1e-4, 1 - 1e-4, 20001)
    classical = -np.log(min(np.sum(p**s * q ** (1 - s)) for s in grid))
    _, xi = chernoff_exponent(thermal_state(0.5, 80), thermal_state(2.0, 80))
    assert xi == pytest.approx(classical, rel=1e-6)


def test_trace_distance_of_orthogonal_states():
    assert trace_distance(fock.fock_state(0, 3), fock.fock_state(2, 3)) == pytest.approx(1.0)


@st.composite
def small_states(draw):
    d = 4
    re = draw(st.lists(st.floats(-1, 1), min_size=d * d, max_size=d * d))
    im = draw(st.lists(st.floats(-1, 1), min_size=d * d, max_size=d * d))
    g = np.array(re).reshape(d, d) + 1j * np.array(im).reshape(d, d)
    m = g @ g.conj().T + 1e-3 * np.eye(d)
    return DensityMatrix((d,), m / np.trace(m).real)


@settings(max_examples=40, deadline=None)
@given(small_states(), small_states(), st.floats(0.0, 1.0))
def test_measure_properties(rho, sigma, p0):
    f = fidelity(rho, sigma)
    assert 0.0 <= f <= 1.0
    assert f == pytest.approx(fidelity(sigma, rho), abs=1e-9)
    pe = helstrom_pe(rho, sigma, p0)
    assert 0.0 <= pe <= min(p0, 1 - p0) + 1e-15
    # Fuchs-van de Graaf for equal priors
    d = trace_distance(rho, sigma)
    assert 1 - f <= d + 1e-9
    assert d <= math.sqrt(max(0.0, 1 - f * f)) + 1e-9


@settings(max_examples=25, deadline=None)
@given(small_states(), st.floats(0.0, 1.0), st.floats(0.0, 2.0))
def test_attenuator_preserves_trace_within_cutoff(rho, eta, n):
    out = noisy_attenuator(rho, 0, eta, n, out_dim=60)
    assert out.trace == pytest.approx(1.0, abs=1e-9)
    assert mean_photon_number(out) == pytest.approx(eta * mean_photon_number(rho) + (1 - eta) * n, abs=1e-7)


def test_pure_state_validation():
    with pytest.raises(ValueError):
        PureState((2,), np.array([1.0, 1.0]))
