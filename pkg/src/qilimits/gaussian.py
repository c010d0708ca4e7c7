"""Covariance-matrix description of Gaussian states and phase-insensitive channels.

Quadratures are ordered ``(x1, p1, x2, p2, ...)`` with ``x = a + a^dag`` and
``p = -i(a - a^dag)``, so the vacuum covariance matrix is the identity and a
coherent state ``|alpha>`` has mean ``(2 Re alpha, 2 Im alpha)``.  The
fidelity formulas are written in the other common convention (vacuum
covariance ``I/2``); :data:`VACUUM_SCALE` converts between the two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: Covariance of the vacuum in this module's units relative to the ``I/2`` convention.
VACUUM_SCALE = 2.0


def symplectic_form(modes: int) -> np.ndarray:
    return np.kron(np.eye(modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


@dataclass(frozen=True, eq=False)
class GaussianState:
    """First and second moments of an M-mode Gaussian state."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = np.asarray(self.cov, dtype=float)
        if mean.size % 2 or cov.shape != (mean.size, mean.size):
            raise ValueError("mean must have length 2M and cov shape 2M x 2M")
        if np.max(np.abs(cov - cov.T), initial=0.0) > 1e-12:
            raise ValueError("covariance matrix is not symmetric")
        cov = 0.5 * (cov + cov.T)
        if np.linalg.eigvalsh(cov + 1j * symplectic_form(mean.size // 2)).min() < -1e-10:
            raise ValueError("covariance matrix violates the uncertainty relation")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def modes(self) -> int:
        return self.mean.size // 2


def symplectic_eigenvalues(cov: np.ndarray) -> np.ndarray:
    """Symplectic spectrum (one value per mode, ascending); 1 marks a pure mode."""
    modes = cov.shape[0] // 2
    eigs = np.abs(np.linalg.eigvals(1j * symplectic_form(modes) @ cov))
    return np.sort(eigs)[::2]


def gauss_vacuum(modes: int = 1) -> GaussianState:
    return GaussianState(np.zeros(2 * modes), np.eye(2 * modes))


def gauss_coherent(alphas) -> GaussianState:
    alphas = np.atleast_1d(np.asarray(alphas, dtype=complex))
    mean = np.column_stack([2 * alphas.real, 2 * alphas.imag]).reshape(-1)
    return GaussianState(mean, np.eye(mean.size))


def gauss_thermal(n) -> GaussianState:
    n = np.atleast_1d(np.asarray(n, dtype=float))
    if np.any(n < 0):
        raise ValueError("mean photon number must be non-negative")
    return GaussianState(np.zeros(2 * n.size), np.diag(np.repeat(2 * n + 1, 2)))


def gauss_tmsv(n_s: float) -> GaussianState:
    """Two-mode squeezed vacuum; mode 0 idler, mode 1 signal."""
    if n_s < 0:
        raise ValueError("signal brightness must be non-negative")
    a = (2 * n_s + 1) * np.eye(2)
    c = 2 * math.sqrt(n_s * (n_s + 1)) * np.diag([1.0, -1.0])
    return GaussianState(np.zeros(4), np.block([[a, c], [c, a]]))


# ---------------------------------------------------------------------------
# Channels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Loss:
    eta: float

    def matrices(self):
        _check_eta(self.eta)
        return math.sqrt(self.eta) * np.eye(2), (1 - self.eta) * np.eye(2)


@dataclass(frozen=True)
class NoisyAttenuator:
    eta: float
    n: float

    def matrices(self):
        _check_eta(self.eta)
        if self.n < 0:
            raise ValueError("added noise must be non-negative")
        return math.sqrt(self.eta) * np.eye(2), (1 - self.eta) * (2 * self.n + 1) * np.eye(2)


@dataclass(frozen=True)
class Amplifier:
    gain: float

    def matrices(self):
        if self.gain < 1:
            raise ValueError("amplifier gain must be >= 1")
        return math.sqrt(self.gain) * np.eye(2), (self.gain - 1) * np.eye(2)


@dataclass(frozen=True)
class PhaseShift:
    phi: float

    def matrices(self):
        c, s = math.cos(self.phi), math.sin(self.phi)
        return np.array([[c, -s], [s, c]]), np.zeros((2, 2))


def _check_eta(eta):
    if not 0.0 <= eta <= 1.0:
        raise ValueError("transmittance must lie in [0, 1]")


def compose(*channels):
    """(X, Y) of ``channels[-1] o ... o channels[0]`` acting on a single mode."""
    x_tot, y_tot = np.eye(2), np.zeros((2, 2))
    for ch in channels:
        x, y = ch.matrices()
        x_tot, y_tot = x @ x_tot, x @ y_tot @ x.T + y
    return x_tot, y_tot


def gauss_apply(channel, state: GaussianState, mode: int = 0) -> GaussianState:
    """Apply a single-mode channel: ``mean -> X mean``, ``cov -> X cov X^T + Y``."""
    x, y = channel.matrices()
    dim = 2 * state.modes
    big_x = np.eye(dim)
    big_y = np.zeros((dim, dim))
    sl = slice(2 * mode, 2 * mode + 2)
    big_x[sl, sl] = x
    big_y[sl, sl] = y
    return GaussianState(big_x @ state.mean, big_x @ state.cov @ big_x.T + big_y)


# ---------------------------------------------------------------------------
# Fidelity and QFI
# ---------------------------------------------------------------------------


def gauss_fidelity(a: GaussianState, b: GaussianState) -> float:
    """Root fidelity ``Tr sqrt(sqrt(rho) sigma sqrt(rho))`` for one- or two-mode states.

    Uses the closed forms of Scutaru (one mode) and of Marian & Marian (two
    modes), written in terms of symplectic invariants of the covariances.
    """
    if a.modes != b.modes:
        raise ValueError("states have different numbers of modes")
    if a.modes > 2:
        raise NotImplementedError("Gaussian fidelity is implemented for at most two modes")
    v1 = a.cov / VACUUM_SCALE
    v2 = b.cov / VACUUM_SCALE
    delta = (a.mean - b.mean) / math.sqrt(VACUUM_SCALE)
    s = v1 + v2
    det_s = np.linalg.det(s)
    if a.modes == 1:
        lam = 4 * (np.linalg.det(v1) - 0.25) * (np.linalg.det(v2) - 0.25)
        lam = max(lam, 0.0)
        f2 = 1.0 / (math.sqrt(det_s + lam) - math.sqrt(lam))
    else:
        w = symplectic_form(2)
        ident = np.eye(4)
        gamma = 16 * np.linalg.det(w @ v1 @ w @ v2 - ident / 4)
        lam = 16 * (np.linalg.det(v1 + 0.5j * w) * np.linalg.det(v2 + 0.5j * w)).real
        root = math.sqrt(max(gamma, 0.0)) + math.sqrt(max(lam, 0.0))
        f2 = 1.0 / (root - math.sqrt(max(root * root - det_s, 0.0)))
    f2 *= math.exp(-0.5 * delta @ np.linalg.solve(s, delta))
    return float(min(math.sqrt(f2), 1.0))


def qi_output(kind: str, value: float, eta: float, n_b: float, phi: float = 0.0) -> GaussianState:
    """Return(-idler) state for a single-mode transmitter at reflectance `eta`.

    The background brightness is ``n_b / (1 - eta)`` so that the target leaves
    no passive signature.

    Args:
        kind: ``"coherent"`` (value = mean photon number of the probe) or
            ``"tmsv"`` (value = per-mode signal brightness; idler is mode 0).
    """
    if not 0.0 <= eta < 1.0:
        raise ValueError("reflectance must lie in [0, 1)")
    if kind == "coherent":
        state, mode = gauss_coherent(math.sqrt(value)), 0
    elif kind == "tmsv":
        state, mode = gauss_tmsv(value), 1
    else:
        raise ValueError(f"unknown transmitter kind {kind!r}")
    state = gauss_apply(NoisyAttenuator(eta, n_b / (1.0 - eta)), state, mode)
    return gauss_apply(PhaseShift(phi), state, mode)


def second_derivative(f, x: float, h: float, levels: int = 4) -> float:
    """Central second difference of `f` at `x`, Richardson-extrapolated over step halvings."""
    table = []
    for k in range(levels):
        step = h / 2**k
        row = [(f(x + step) - 2 * f(x) + f(x - step)) / step**2]
        for j in range(1, k + 1):
            prev = table[k - 1][j - 1]
            row.append(row[j - 1] + (row[j - 1] - prev) / (4**j - 1))
        table.append(row)
    return table[-1][-1]


def gauss_qfi_eta(
    kind: str,
    value: float,
    eta: float,
    n_b: float,
    modes: int = 1,
    parametrization: str = "eta",
    rel_step: float = 0.25,
) -> float:
    """Quantum Fisher information on the reflectance, from the fidelity curvature.

    ``K = -4 d^2 F(rho_eta, rho_eta') / d eta'^2`` at ``eta' = eta``, by
    Richardson-extrapolated central differences.

    Args:
        kind: ``"coherent"`` (value = total energy) or ``"tmsv"`` (value =
            per-mode brightness, with `modes` independent copies).
        parametrization: ``"eta"`` or ``"sqrt_eta"`` (QFI on the amplitude
            reflectivity).
    """
    if not 0.0 < eta <= 0.99:
        raise ValueError("reflectance must lie in (0, 0.99]")
    ref = qi_output(kind, value, eta, n_b)
    if parametrization == "eta":
        x0 = eta
        to_eta = lambda x: x  # noqa: E731
    elif parametrization == "sqrt_eta":
        x0 = math.sqrt(eta)
        to_eta = lambda x: x * x  # noqa: E731
    else:
        raise ValueError(f"unknown parametrization {parametrization!r}")
    h = rel_step * min(x0, to_eta(1.0) - x0 if parametrization == "eta" else 1.0 - x0)
    if h < 1e-12 or to_eta(x0 + h) >= 1.0 or to_eta(x0 - h) <= 0.0:
        raise ValueError("finite-difference step underflows near the domain boundary")
    curvature = second_derivative(lambda x: gauss_fidelity(ref, qi_output(kind, value, to_eta(x), n_b)), x0, h)
    return -4.0 * curvature * modes
