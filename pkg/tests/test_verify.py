import math

import numpy as np
import pytest

from qilimits import bounds, fock
from qilimits.bounds import DetectionScenario, FadingScenario, PhotonDistribution
from qilimits.verify import (
    TransmitterSpec,
    bound_chain,
    build_hypothesis_pair,
    fock_qfi_eta,
    monte_carlo_fading_pe,
    per_mode_exponents,
    random_low_energy_state,
    run_suite,
    verify_decomposition,
    verify_exponent_classical,
    verify_fading,
    verify_qfi,
)


def test_transmitter_constructors():
    t = TransmitterSpec.tmsv(0.2, modes=5)
    assert t.energy == pytest.approx(1.0) and t.brightness == pytest.approx(0.2)
    with pytest.raises(ValueError):
        t.fock_state()
    with pytest.raises(ValueError):
        TransmitterSpec("squeezed", 1.0)
    psi = fock.tmsv_state(0.3, fock.thermal_cutoff(0.3))
    with pytest.raises(ValueError):
        TransmitterSpec("custom", 1.0, state=psi, distribution=PhotonDistribution.geometric(0.3))


def test_custom_transmitter():
    amps = np.zeros((3, 3))
    amps[0, 0] = amps[1, 2] = math.sqrt(0.5)
    psi = fock.PureState((3, 3), amps)
    t = TransmitterSpec.custom(psi, PhotonDistribution([0, 2], [0.5, 0.5]))
    assert t.energy == pytest.approx(1.0)
    pair = build_hypothesis_pair(t, DetectionScenario(0.1, 1.0, 0.5))
    assert pair.helstrom_pe() >= bounds.transmitter_pe_lower_bound(t.distribution, pair.scenario).value


@pytest.mark.parametrize("t", [TransmitterSpec.coherent(0.0), TransmitterSpec.tmsv(0.0)])
def test_vacuum_transmitter_is_undetectable(t):
    pair = build_hypothesis_pair(t, DetectionScenario(0.3, 0.0, 1.5, prior0=0.35))
    assert fock.trace_distance(pair.rho0, pair.rho1) < 1e-12
    assert pair.helstrom_pe() == pytest.approx(0.35, abs=1e-12)


@pytest.mark.parametrize("t", [TransmitterSpec.coherent(0.7), TransmitterSpec.tmsv(0.3)])
def test_zero_reflectance_gives_identical_hypotheses(t):
    pair = build_hypothesis_pair(t, DetectionScenario(0.0, t.energy, 0.8, phi=1.1))
    np.testing.assert_array_equal(pair.rho0.matrix, pair.rho1.matrix)


def test_null_hypothesis_is_phase_independent():
    t = TransmitterSpec.tmsv(0.2)
    ref = build_hypothesis_pair(t, DetectionScenario(0.05, 0.2, 1.0)).rho0
    for phi in (math.pi / 3, math.pi):
        other = build_hypothesis_pair(t, DetectionScenario(0.05, 0.2, 1.0, phi=phi)).rho0
        assert fock.trace_distance(ref, other) < 1e-10


@pytest.mark.parametrize("t", [TransmitterSpec.coherent(1.2), TransmitterSpec.tmsv(0.4)])
@pytest.mark.parametrize("eta,n_b", [(0.05, 0.5), (0.3, 2.0)])
def test_energy_bookkeeping(t, eta, n_b):
    pair = build_hypothesis_pair(t, DetectionScenario(eta, t.energy, n_b, phi=0.4))
    assert fock.mean_photon_number(pair.rho1, 1) == pytest.approx(eta * t.energy + n_b, abs=1e-8)
    assert fock.mean_photon_number(pair.rho0, 1) == pytest.approx(n_b, abs=1e-8)


def test_helstrom_above_transmitter_bound():
    t = TransmitterSpec.tmsv(0.2)
    s = DetectionScenario(0.05, 0.2, 1.0)
    pe = build_hypothesis_pair(t, s).helstrom_pe()
    assert pe >= bounds.transmitter_pe_lower_bound(PhotonDistribution.geometric(0.2), s).value


def test_budget_guard():
    with pytest.raises(fock.DimensionBudgetError):
        build_hypothesis_pair(TransmitterSpec.tmsv(0.5), DetectionScenario(0.1, 0.5, 5.0), budget=100)


@pytest.mark.parametrize("t", [TransmitterSpec.tmsv(0.3), TransmitterSpec.coherent(0.5)])
def test_bound_chain_holds(t):
    checks = bound_chain(t, DetectionScenario(0.05, t.energy, 1.0))
    assert all(c.ok for c in checks), [c for c in checks if not c.ok]


def test_decomposition_examples():
    rng = np.random.default_rng(5)
    states = [random_low_energy_state(rng, 30, 2.0, rank=r) for r in (1, 2)]
    assert verify_decomposition(1.0, 2.0, states) == 0.0
    assert verify_decomposition(0.5, 1.0, [fock.coherent_state(0.5, 30)]) <= 1e-6


def test_random_states_respect_energy_cap():
    rng = np.random.default_rng(0)
    for k in range(10):
        rho = random_low_energy_state(rng, 30, 2.0, rank=1 + k % 3)
        assert fock.mean_photon_number(rho) <= 2.0
        assert rho.trace == pytest.approx(1.0)


def test_classical_exponent_pure_loss():
    # with no background the returns are pure coherent states and the exponent is their log-overlap
    s = DetectionScenario(0.05, 2.0, 0.0)
    pair = build_hypothesis_pair(TransmitterSpec.coherent(2.0), s)
    _, xi = fock.chernoff_exponent(pair.rho0, pair.rho1)
    assert xi == pytest.approx(0.1, rel=1e-6)


@pytest.mark.parametrize("n_b", [0.5, 2.0])
def test_classical_exponent_with_background(n_b):
    assert all(c.ok for c in verify_exponent_classical([1.0, 2.0], 0.05, n_b))


def test_advantage_grows_as_brightness_drops():
    hi = per_mode_exponents(0.01, 0.01, 5.0)
    lo = per_mode_exponents(0.001, 0.01, 5.0)
    assert lo[0] / lo[1] > hi[0] / hi[1]
    assert lo[0] <= bounds.universal_exponent(0.01, 5.0) * 0.001


def test_qfi_checks():
    checks = verify_qfi(TransmitterSpec.coherent(1.0), [0.01, 0.2], [0.0, 1.0], fock_points=2)
    checks += verify_qfi(TransmitterSpec.tmsv(0.1), [0.001], [0.5], fock_points=1)
    assert all(c.ok for c in checks), [c for c in checks if not c.ok]


def test_fock_qfi_matches_gaussian_away_from_low_reflectance():
    from qilimits.gaussian import gauss_qfi_eta

    k = fock_qfi_eta(TransmitterSpec.tmsv(0.1), 0.05, 0.5)
    assert k == pytest.approx(gauss_qfi_eta("tmsv", 0.1, 0.05, 0.5), rel=1e-3)


def test_monte_carlo_trivial_cases():
    f = FadingScenario(1e-9, 10.0, 1.0, prior0=0.3)
    est, err = monte_carlo_fading_pe(PhotonDistribution.geometric(10.0), f, samples=1000)
    assert est == pytest.approx(0.21, rel=1e-6)
    est, err = monte_carlo_fading_pe(PhotonDistribution.degenerate(0), FadingScenario(0.05, 0.0, 1.0), samples=1000)
    assert est == 0.25 and err == 0.0


def test_monte_carlo_matches_quadrature():
    p = PhotonDistribution.geometric(10.0)
    checks = verify_fading(p, FadingScenario(0.01, 10.0, 1.0), samples=10**6, seed=3)
    assert all(c.ok for c in checks), checks


def test_monte_carlo_is_seeded_and_path_independent():
    f = FadingScenario(0.02, 3.0, 0.5)
    geo = PhotonDistribution.geometric(3.0)
    a = monte_carlo_fading_pe(geo, f, samples=5000, seed=9)
    assert a == monte_carlo_fading_pe(geo, f, samples=5000, seed=9)
    plain = PhotonDistribution(geo.support, geo.probs / geo.probs.sum())
    b = monte_carlo_fading_pe(plain, f, samples=5000, seed=9)
    assert b[0] == pytest.approx(a[0], rel=1e-10)


def test_run_suite():
    with pytest.raises(KeyError):
        run_suite("nope")
    first = run_suite("decomposition", seed=4)
    assert first == run_suite("decomposition", seed=4)
    assert all(c.ok for c in first)
