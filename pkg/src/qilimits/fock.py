"""Truncated Fock-space states, bosonic channels and distinguishability measures.

Multi-mode states are stored as dense matrices over the tensor product of
per-mode Fock spaces, mode 0 being the leftmost factor.  Every state carries a
``trace_deficit``: the probability mass that lies beyond the truncation.

Channels are applied through their unitary dilations.  The beam splitter and
the two-mode squeezer are obtained by exponentiating the quadratic generator
on the subspaces it leaves invariant (fixed total photon number for the beam
splitter, fixed photon-number difference for the squeezer), then the
environment is traced out.  Both channels are phase covariant, so a channel
acting on one mode maps ``|a><b|`` onto operators ``|c><d|`` with
``c - d = a - b``; that structure is what :func:`_apply_transfer` exploits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence, Union

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.stats import poisson

#: Eigenvalues below ``-CLAMP_TOL`` are treated as a numerical failure.
CLAMP_TOL = 1e-10
#: Default geometric / Poisson tail mass left beyond a truncation.
TAIL_TOL = 1e-12
#: Largest joint Hilbert-space dimension the engine will allocate.
MAX_JOINT_DIM = 8000


class NumericalError(ArithmeticError):
    """Raised when a spectral computation leaves its validity range."""


class DimensionBudgetError(ValueError):
    """Raised when a requested truncation exceeds the dimension budget."""


def thermal_cutoff(n: float, tol: float = TAIL_TOL) -> int:
    """Smallest cutoff whose thermal tail ``(n/(n+1))**dim`` is below `tol`."""
    if n < 0:
        raise ValueError("mean photon number must be non-negative")
    if n == 0:
        return 1
    return max(1, math.ceil(math.log(tol) / math.log(n / (n + 1.0))))


def poisson_cutoff(mean: float, tol: float = TAIL_TOL) -> int:
    """Smallest cutoff whose Poisson tail beyond it is below `tol`."""
    dim = max(1, int(mean) + 1)
    while poisson.sf(dim - 1, mean) >= tol:
        dim += max(1, dim // 8)
    return dim


# ---------------------------------------------------------------------------
# States
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Density matrix on ``len(dims)`` truncated bosonic modes.

    Attributes:
        dims: Fock cutoff of each mode (number states ``|0>..|d-1>``).
        matrix: Hermitian matrix of side ``prod(dims)``.
        trace_deficit: Probability mass lost to truncation, ``1 - trace``.
    """

    dims: tuple
    matrix: np.ndarray
    trace_deficit: float = 0.0

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or min(dims) < 1:
            raise ValueError("every mode needs a cutoff >= 1")
        size = math.prod(dims)
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (size, size):
            raise ValueError(f"matrix shape {m.shape} does not match dims {dims}")
        if size and np.max(np.abs(m - m.conj().T)) > 1e-12:
            raise ValueError("density matrix is not Hermitian")
        m = 0.5 * (m + m.conj().T)
        m.setflags(write=False)
        deficit = float(self.trace_deficit)
        if deficit < 0:
            raise ValueError("trace deficit must be non-negative")
        tr = float(np.trace(m).real)
        if not (1.0 - deficit - 1e-12 <= tr <= 1.0 + 1e-12):
            raise ValueError(f"trace {tr!r} inconsistent with deficit {deficit!r}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "trace_deficit", deficit)

    @property
    def modes(self) -> int:
        return len(self.dims)

    @property
    def dim(self) -> int:
        """Common per-mode cutoff; only defined when all modes share it."""
        if len(set(self.dims)) != 1:
            raise AttributeError(f"modes have different cutoffs {self.dims}")
        return self.dims[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def tensor(self) -> np.ndarray:
        """Matrix reshaped to ``dims + dims`` (row indices first)."""
        return self.matrix.reshape(self.dims + self.dims)

    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues, clamped to zero after the negativity check."""
        return _clamp(np.linalg.eigvalsh(self.matrix))


@dataclass(frozen=True, eq=False)
class PureState:
    """State vector on truncated modes; ``deficit`` is the norm lost to truncation."""

    dims: tuple
    amplitudes: np.ndarray
    deficit: float = 0.0

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != math.prod(dims):
            raise ValueError("amplitude vector does not match dims")
        norm2 = float(np.vdot(amps, amps).real)
        if not (1.0 - self.deficit - 1e-12 <= norm2 <= 1.0 + 1e-12):
            raise ValueError(f"squared norm {norm2!r} inconsistent with deficit")
        amps.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "deficit", float(self.deficit))

    @property
    def modes(self) -> int:
        return len(self.dims)

    def to_density(self) -> DensityMatrix:
        v = self.amplitudes
        return DensityMatrix(self.dims, np.outer(v, v.conj()), self.deficit)


State = Union[DensityMatrix, PureState]


def as_density(state: State) -> DensityMatrix:
    if isinstance(state, PureState):
        return state.to_density()
    return state


def thermal_state(n: float, dim: int) -> DensityMatrix:
    """Single-mode thermal state of mean photon number `n`, truncated at `dim`."""
    if n < 0:
        raise ValueError("mean photon number must be non-negative")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    ratio = n / (n + 1.0)
    probs = ratio ** np.arange(dim) / (n + 1.0)
    return DensityMatrix((dim,), np.diag(probs), ratio**dim)


def fock_state(k: int, dim: int) -> PureState:
    if not 0 <= k < dim:
        raise ValueError("number state outside the truncation")
    amps = np.zeros(dim, dtype=complex)
    amps[k] = 1.0
    return PureState((dim,), amps)


def tmsv_state(n_s: float, dim: int) -> PureState:
    """Two-mode squeezed vacuum ``sum_n sqrt(n_s^n/(n_s+1)^(n+1)) |n>_I |n>_S``.

    Mode 0 is the idler, mode 1 the signal.
    """
    if n_s < 0:
        raise ValueError("signal brightness must be non-negative")
    ratio = n_s / (n_s + 1.0)
    amps = np.zeros((dim, dim), dtype=complex)
    n = np.arange(dim)
    amps[n, n] = np.sqrt(ratio**n / (n_s + 1.0))
    return PureState((dim, dim), amps, ratio**dim)


def coherent_state(alpha: complex, dim: int) -> PureState:
    """Coherent state ``|alpha>`` truncated at `dim` number states."""
    amps = np.empty(dim, dtype=complex)
    amps[0] = math.exp(-abs(alpha) ** 2 / 2)
    for k in range(1, dim):
        amps[k] = amps[k - 1] * alpha / math.sqrt(k)
    mean = abs(alpha) ** 2
    deficit = float(poisson.sf(dim - 1, mean)) if mean > 0 else 0.0
    return PureState((dim,), amps, deficit)


def mean_photon_number(state: State, mode: int = 0) -> float:
    rho = as_density(state)
    diag = np.real(np.diagonal(partial_trace(rho, [mode]).matrix))
    return float(diag @ np.arange(diag.size))


def partial_trace(state: State, keep: Sequence[int]) -> DensityMatrix:
    """Reduced state on the modes listed in `keep` (kept in their original order)."""
    rho = as_density(state)
    keep = sorted(keep)
    m = rho.modes
    letters = "abcdefghijklmnopqrstuvwxyz"
    if 2 * m > len(letters):
        raise ValueError("too many modes")
    rows = list(letters[:m])
    cols = list(letters[m : 2 * m])
    for k in range(m):
        if k not in keep:
            cols[k] = rows[k]
    out = "".join(rows[k] for k in keep) + "".join(cols[k] for k in keep)
    reduced = np.einsum("".join(rows) + "".join(cols) + "->" + out, rho.tensor())
    dims = tuple(rho.dims[k] for k in keep)
    size = math.prod(dims)
    return DensityMatrix(dims, reduced.reshape(size, size), rho.trace_deficit)


def tensor(*states: State) -> DensityMatrix:
    dms = [as_density(s) for s in states]
    mat = dms[0].matrix
    dims = dms[0].dims
    keep = 1.0 - dms[0].trace_deficit
    for d in dms[1:]:
        mat = np.kron(mat, d.matrix)
        dims = dims + d.dims
        keep *= 1.0 - d.trace_deficit
    return DensityMatrix(dims, mat, max(0.0, 1.0 - keep))


# ---------------------------------------------------------------------------
# Channels
# ---------------------------------------------------------------------------


def _tridiagonal_exp_column(offdiag: np.ndarray, angle: float, cols: int) -> np.ndarray:
    """First `cols` columns of ``expm(angle * (A - A.T))``.

    ``A`` is the strictly lower-bidiagonal matrix with sub-diagonal `offdiag`.
    With ``D = diag(i**j)`` one has ``A - A.T = -i D (A + A.T) D^H``, so the
    exponential follows from the spectrum of the real symmetric tridiagonal
    ``A + A.T``.
    """
    size = offdiag.size + 1
    if size == 1:
        return np.ones((1, 1))
    lam, vec = eigh_tridiagonal(np.zeros(size), offdiag)
    phase = np.exp(-1j * angle * lam)
    block = (vec * phase) @ vec[:cols].T
    j = np.arange(size)
    d_row = (1j) ** (j % 4)
    d_col = (1j) ** (-(np.arange(cols) % 4))
    out = d_row[:, None] * block * d_col[None, :]
    return out.real


@lru_cache(maxsize=64)
def _beamsplitter_columns(theta: float, n_max: int, d_in: int, d_out: int) -> np.ndarray:
    """``W[n, c, a] = <c, n-c| U |a, n-a>`` for total photon number ``n <= n_max``.

    First ket entry is the signal mode, second the environment; the beam
    splitter has amplitude transmittance ``cos(theta)``.
    """
    w = np.zeros((n_max + 1, d_out, d_in))
    for n in range(n_max + 1):
        j = np.arange(n)
        offdiag = np.sqrt((j + 1.0) * (n - j))
        cols = min(d_in, n + 1)
        block = _tridiagonal_exp_column(offdiag, theta, cols)
        rows = min(d_out, n + 1)
        w[n, :rows, :cols] = block[:rows]
    w.setflags(write=False)
    return w


@lru_cache(maxsize=64)
def _attenuator_transfer(eta: float, n: float, d_in: int, d_out: int, env_dim: int) -> np.ndarray:
    probs = np.diag(thermal_state(n, env_dim).matrix).real
    if eta in (0.0, 1.0):
        # endpoints built directly: full replacement by the environment, or identity
        transfer = np.zeros((d_in, d_in, d_out))
        if eta == 0.0:
            k = min(env_dim, d_out)
            transfer[np.arange(d_in), np.arange(d_in), :k] = probs[:k]
        else:
            k = np.arange(min(d_in, d_out))
            transfer[k[:, None], k[None, :], k[:, None]] = 1.0
        transfer.setflags(write=False)
        return transfer
    theta = math.acos(math.sqrt(eta))
    w = _beamsplitter_columns(theta, d_in + env_dim - 2, d_in, d_out)
    a = np.arange(d_in)
    transfer = np.zeros((d_in, d_in, d_out))
    for m in range(env_dim):
        x = w[m + a, :, a]  # x[a, c] = <c|..|a> with env m in, a+m-c out
        for s in range(-(d_in - 1), d_in):
            aa = a[(a - s >= 0) & (a - s < d_in)]
            lo, hi = max(0, s), min(d_out, d_out + s)
            if lo >= hi:
                continue
            c = np.arange(lo, hi)
            transfer[aa[:, None], (aa - s)[:, None], c[None, :]] += (
                probs[m] * x[aa][:, c] * x[aa - s][:, c - s]
            )
    transfer.setflags(write=False)
    return transfer


def _squeezer_chain_length(gain: float, d_out: int) -> int:
    if gain == 1.0:
        return d_out
    t2 = (gain - 1.0) / gain
    return d_out + math.ceil(math.log(1e-18) / math.log(t2)) + 20


@lru_cache(maxsize=64)
def _amplifier_transfer(gain: float, d_in: int, d_out: int) -> np.ndarray:
    r = math.acosh(math.sqrt(gain))
    length = _squeezer_chain_length(gain, d_out)
    amp = np.zeros((d_in, d_out))
    for a in range(d_in if gain > 1.0 else 0):
        k = np.arange(length - 1)
        offdiag = np.sqrt((a + k + 1.0) * (k + 1.0))
        col = _tridiagonal_exp_column(offdiag, r, 1)[:, 0]
        keep = max(0, d_out - a)
        amp[a, a : a + keep] = col[:keep]
    if gain == 1.0:
        k = np.arange(min(d_in, d_out))
        amp[k, k] = 1.0
    transfer = np.zeros((d_in, d_in, d_out))
    a = np.arange(d_in)
    for s in range(-(d_in - 1), d_in):
        aa = a[(a - s >= 0) & (a - s < d_in)]
        lo, hi = max(0, s), min(d_out, d_out + s)
        if lo >= hi:
            continue
        c = np.arange(lo, hi)
        # |a><a-s| -> |a+k><a-s+k| with weight A_a[k] A_{a-s}[k]; c = a + k
        # partner row b = a - s gains the same k photons: column b + k = c - s
        transfer[aa[:, None], (aa - s)[:, None], c[None, :]] = amp[aa][:, c] * amp[aa - s][:, c - s]
    transfer.setflags(write=False)
    return transfer


def _apply_transfer(rho: DensityMatrix, mode: int, transfer: np.ndarray) -> DensityMatrix:
    d_in, _, d_out = transfer.shape
    if rho.dims[mode] != d_in:
        raise ValueError("transfer tensor does not match the mode cutoff")
    dims_out = rho.dims[:mode] + (d_out,) + rho.dims[mode + 1 :]
    size_out = math.prod(dims_out)
    if size_out > MAX_JOINT_DIM:
        raise DimensionBudgetError(f"joint dimension {size_out} exceeds budget {MAX_JOINT_DIM}")
    m = rho.modes
    t = np.moveaxis(rho.tensor(), (mode, m + mode), (0, 1))
    rest = t.shape[2:]
    t = t.reshape(d_in, d_in, -1)
    out = np.zeros((d_out, d_out, t.shape[2]), dtype=complex)
    a = np.arange(d_in)
    for s in range(-(d_in - 1), d_in):
        aa = a[(a - s >= 0) & (a - s < d_in)]
        lo, hi = max(0, s), min(d_out, d_out + s)
        if lo >= hi:
            continue
        c = np.arange(lo, hi)
        coeff = transfer[aa, aa - s][:, c]
        out[c, c - s] = coeff.T @ t[aa, aa - s]
    out = out.reshape((d_out, d_out) + rest)
    out = np.moveaxis(out, (0, 1), (mode, m + mode)).reshape(size_out, size_out)
    out = 0.5 * (out + out.conj().T)
    deficit = max(rho.trace_deficit, 1.0 - float(np.trace(out).real), 0.0)
    return DensityMatrix(dims_out, out, deficit)


def noisy_attenuator(
    state: State,
    mode: int,
    eta: float,
    n: float,
    env_dim: int | None = None,
    out_dim: int | None = None,
) -> DensityMatrix:
    """Mix `mode` with a thermal mode of mean photon number `n` at transmittance `eta`.

    Args:
        state: Input state.
        mode: Index of the mode the channel acts on.
        eta: Beam-splitter transmittance in ``[0, 1]``.
        n: Mean photon number of the environment (added noise).
        env_dim: Environment cutoff; chosen so its thermal tail is below
            ``TAIL_TOL`` when omitted.
        out_dim: Cutoff of the output mode; defaults to the input cutoff.
            Mass above it is recorded in ``trace_deficit``.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError("transmittance must lie in [0, 1]")
    if n < 0:
        raise ValueError("added noise must be non-negative")
    rho = as_density(state)
    d_in = rho.dims[mode]
    env_dim = thermal_cutoff(n) if env_dim is None else int(env_dim)
    out_dim = d_in if out_dim is None else int(out_dim)
    if d_in + env_dim > MAX_JOINT_DIM:
        raise DimensionBudgetError("environment cutoff exceeds budget")
    transfer = _attenuator_transfer(float(eta), float(n), d_in, out_dim, env_dim)
    return _apply_transfer(rho, mode, transfer)


def loss(state: State, mode: int, eta: float, out_dim: int | None = None) -> DensityMatrix:
    """Quantum-limited (vacuum environment) loss channel."""
    return noisy_attenuator(state, mode, eta, 0.0, env_dim=1, out_dim=out_dim)


def amplifier(state: State, mode: int, gain: float, out_dim: int | None = None) -> DensityMatrix:
    """Quantum-limited amplifier: two-mode squeezer with a vacuum environment.

    The output cutoff defaults to the input cutoff; the amplified tail above it
    is recorded as trace deficit.
    """
    if gain < 1.0:
        raise ValueError("amplifier gain must be >= 1")
    rho = as_density(state)
    d_in = rho.dims[mode]
    out_dim = d_in if out_dim is None else int(out_dim)
    if _squeezer_chain_length(gain, out_dim) > 4 * MAX_JOINT_DIM:
        raise DimensionBudgetError("squeezer chain exceeds budget")
    return _apply_transfer(rho, mode, _amplifier_transfer(float(gain), d_in, out_dim))


def phase_shift(state: State, mode: int, phi: float) -> DensityMatrix:
    """Conjugate `mode` by ``exp(i phi a^dag a)``."""
    rho = as_density(state)
    d = rho.dims[mode]
    m = rho.modes
    n = np.arange(d)
    phases = np.exp(1j * phi * (n[:, None] - n[None, :]))
    shape = [1] * (2 * m)
    shape[mode] = d
    shape[m + mode] = d
    t = rho.tensor() * phases.reshape(shape)
    size = math.prod(rho.dims)
    return DensityMatrix(rho.dims, t.reshape(size, size), rho.trace_deficit)


# ---------------------------------------------------------------------------
# Distinguishability
# ---------------------------------------------------------------------------


def _clamp(eigs: np.ndarray) -> np.ndarray:
    if eigs.size and eigs.min() < -CLAMP_TOL:
        raise NumericalError(f"eigenvalue {eigs.min():.3e} below clamping threshold")
    return np.clip(eigs, 0.0, None)


def _blocks(*mats: np.ndarray) -> list[np.ndarray]:
    """Index sets of the common block-diagonal structure of `mats`."""
    pattern = np.zeros(mats[0].shape, dtype=bool)
    for m in mats:
        pattern |= m != 0
    count, labels = connected_components(csr_matrix(pattern), directed=False)
    order = np.argsort(labels, kind="stable")
    bounds = np.searchsorted(labels[order], np.arange(count + 1))
    return [order[bounds[k] : bounds[k + 1]] for k in range(count)]


def _matrices(*states: State) -> list[np.ndarray]:
    dms = [as_density(s) for s in states]
    if len({d.dims for d in dms}) != 1:
        raise ValueError("states live on different truncations")
    return [d.matrix for d in dms]


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    lam, vec = np.linalg.eigh(m)
    lam = _clamp(lam)
    return (vec * np.sqrt(lam)) @ vec.conj().T


def fidelity(rho: State, sigma: State) -> float:
    """Root fidelity ``Tr sqrt(sqrt(rho) sigma sqrt(rho))``.

    Evaluated as the trace norm of ``sqrt(rho) sqrt(sigma)``, block by block.
    """
    a, b = _matrices(rho, sigma)
    total = 0.0
    for idx in _blocks(a, b):
        sub = np.ix_(idx, idx)
        prod = _psd_sqrt(a[sub]) @ _psd_sqrt(b[sub])
        total += np.linalg.svd(prod, compute_uv=False).sum()
    return float(min(total, 1.0))


def trace_norm(x: np.ndarray) -> float:
    """Trace norm of a Hermitian matrix."""
    total = 0.0
    for idx in _blocks(x):
        total += np.abs(np.linalg.eigvalsh(x[np.ix_(idx, idx)])).sum()
    return float(total)


def trace_distance(rho: State, sigma: State) -> float:
    a, b = _matrices(rho, sigma)
    return 0.5 * trace_norm(a - b)


def helstrom_pe(rho0: State, rho1: State, prior0: float = 0.5, prior1: float | None = None) -> float:
    """Minimum error probability ``1/2 - ||p0 rho0 - p1 rho1||_1 / 2``."""
    if prior1 is None:
        prior1 = 1.0 - prior0
    if min(prior0, prior1) < 0 or abs(prior0 + prior1 - 1.0) > 1e-12:
        raise ValueError("priors must be non-negative and sum to 1")
    a, b = _matrices(rho0, rho1)
    pe = 0.5 - 0.5 * trace_norm(prior0 * a - prior1 * b)
    return float(min(max(pe, 0.0), min(prior0, prior1)))


def chernoff_exponent(
    rho0: State,
    rho1: State,
    eps: float = 1e-12,
    s_range: tuple = (1e-4, 1 - 1e-4),
    s_tol: float = 1e-6,
    max_iter: int = 200,
) -> tuple:
    """Quantum Chernoff exponent ``-ln min_s Tr rho0^s rho1^(1-s)``.

    Both states are renormalised to unit trace and mixed with a fraction `eps`
    of the maximally mixed state.  The minimiser is located by golden-section
    search on `s_range`.

    Returns:
        ``(s_star, xi)``.
    """
    a, b = _matrices(rho0, rho1)
    a = a / np.trace(a).real
    b = b / np.trace(b).real
    size = a.shape[0]
    parts = []
    for idx in _blocks(a, b):
        sub = np.ix_(idx, idx)
        la, va = np.linalg.eigh(a[sub])
        lb, vb = np.linalg.eigh(b[sub])
        la = (1 - eps) * _clamp(la) + eps / size
        lb = (1 - eps) * _clamp(lb) + eps / size
        overlap = np.abs(va.conj().T @ vb) ** 2
        parts.append((np.log(la), np.log(lb), overlap))

    def q(s):
        total = 0.0
        for log_a, log_b, overlap in parts:
            total += np.exp(s * log_a) @ overlap @ np.exp((1 - s) * log_b)
        return total

    invphi = (math.sqrt(5) - 1) / 2
    lo, hi = s_range
    x1 = hi - invphi * (hi - lo)
    x2 = lo + invphi * (hi - lo)
    f1, f2 = q(x1), q(x2)
    for _ in range(max_iter):
        if hi - lo < s_tol:
            break
        if f1 < f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = q(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = q(x2)
    else:
        raise NumericalError("Chernoff s-search did not converge")
    s_star = 0.5 * (lo + hi)
    q_min = min(q(s_star), f1, f2)
    return float(s_star), float(max(0.0, -math.log(q_min)))
