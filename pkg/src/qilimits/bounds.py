"""Closed-form limits for target detection and reflectance estimation.

Probability-of-error quantities are returned as :class:`BoundReport` records so
that asymptotic estimates (``kind="approximation"``) are never confused with
rigorous lower bounds (``kind="bound"``).  Fisher-information quantities are
plain floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy import stats

from .fock import TAIL_TOL

#: Photon-number law stored with this much probability mass beyond its support.
PMF_TAIL_TOL = TAIL_TOL


@dataclass(frozen=True)
class DetectionScenario:
    """Specular-target hypothesis test.

    Attributes:
        eta: Effective reflectance when the target is present, in ``[0, 1)``.
        energy: Total mean signal photon number over all modes.
        n_b: Nominal background brightness (photons per mode).
        phi: Phase acquired on reflection (radians).
        prior0: Prior of "no target"; ``prior1`` defaults to ``1 - prior0``.
    """

    eta: float
    energy: float
    n_b: float
    phi: float = 0.0
    prior0: float = 0.5
    prior1: Optional[float] = None

    def __post_init__(self):
        if self.prior1 is None:
            object.__setattr__(self, "prior1", 1.0 - self.prior0)
        _check_priors(self.prior0, self.prior1)
        if not 0.0 <= self.eta < 1.0:
            raise ValueError("reflectance must lie in [0, 1)")
        if self.energy < 0 or self.n_b < 0:
            raise ValueError("energy and background brightness must be non-negative")

    @property
    def prior_product(self) -> float:
        return self.prior0 * self.prior1


@dataclass(frozen=True)
class FadingScenario:
    """Flat Rayleigh-fading target with mean reflectance `eta_bar`."""

    eta_bar: float
    energy: float
    n_b: float
    prior0: float = 0.5
    prior1: Optional[float] = None

    def __post_init__(self):
        if self.prior1 is None:
            object.__setattr__(self, "prior1", 1.0 - self.prior0)
        _check_priors(self.prior0, self.prior1)
        if not 0.0 < self.eta_bar < 1.0:
            raise ValueError("mean reflectance must lie in (0, 1)")
        if self.energy < 0 or self.n_b < 0:
            raise ValueError("energy and background brightness must be non-negative")

    @property
    def prior_product(self) -> float:
        return self.prior0 * self.prior1

    @property
    def weak_target(self) -> bool:
        """False when ``eta_bar > 0.1``, where the truncated-exponential model is strained."""
        return self.eta_bar <= 0.1


def _check_priors(p0, p1):
    if p0 < 0 or p1 < 0 or abs(p0 + p1 - 1.0) > 1e-12:
        raise ValueError("priors must be non-negative and sum to 1")


@dataclass(frozen=True, eq=False)
class PhotonDistribution:
    """Law of the total signal photon number on a finite support.

    Infinite-support laws are cut where the remaining mass is below
    ``PMF_TAIL_TOL``; `tail_mass` and `tail_mean` record what was cut.
    `generating_function`, when known in closed form, evaluates
    ``sum_n p_n z**n`` over the untruncated law.
    """

    support: np.ndarray
    probs: np.ndarray
    tail_mass: float = 0.0
    tail_mean: float = 0.0
    generating_function: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        support = np.asarray(self.support, dtype=np.int64).reshape(-1)
        probs = np.asarray(self.probs, dtype=float).reshape(-1)
        if support.size != probs.size or support.size == 0:
            raise ValueError("support and probabilities must be non-empty and aligned")
        if np.any(support < 0) or np.unique(support).size != support.size:
            raise ValueError("support must hold distinct non-negative integers")
        if np.any(probs < 0):
            raise ValueError("probabilities must be non-negative")
        if abs(probs.sum() + self.tail_mass - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {probs.sum() + self.tail_mass!r}, not 1")
        support.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)

    @property
    def mean(self) -> float:
        return float(self.support @ self.probs) + self.tail_mean

    def fidelity_sum(self, mu):
        """``sum_n p_n mu**n`` over the stored support (vectorised in `mu`)."""
        mu = np.asarray(mu, dtype=float)
        powers = np.power(mu[..., None], self.support)
        return powers @ self.probs

    def check_energy(self, energy: float, tol: float = 1e-9) -> None:
        if abs(self.mean - energy) > tol:
            raise ValueError(f"distribution mean {self.mean!r} differs from energy {energy!r}")

    @classmethod
    def degenerate(cls, n: int) -> "PhotonDistribution":
        return cls([n], [1.0], generating_function=lambda z: np.asarray(z, dtype=float) ** n)

    @classmethod
    def geometric(cls, mean: float, tol: float = PMF_TAIL_TOL) -> "PhotonDistribution":
        """Thermal law: total photon number of a single TMSV signal mode."""
        return cls.negative_binomial(1, mean, tol)

    @classmethod
    def negative_binomial(cls, modes: int, brightness: float, tol: float = PMF_TAIL_TOL) -> "PhotonDistribution":
        """Total photon number of `modes` independent thermal (TMSV signal) modes."""
        if brightness == 0:
            return cls.degenerate(0)
        law = stats.nbinom(modes, 1.0 / (1.0 + brightness))
        cut = int(law.isf(tol)) + 1
        while law.sf(cut - 1) >= tol:
            cut += 1
        n = np.arange(cut)
        probs = law.pmf(n)
        tail = float(law.sf(cut - 1))
        tail_mean = modes * brightness - float(n @ probs)
        return cls(n, probs, tail, tail_mean, lambda z: (1.0 + brightness * (1.0 - np.asarray(z))) ** (-modes))

    @classmethod
    def poisson(cls, mean: float, tol: float = PMF_TAIL_TOL) -> "PhotonDistribution":
        """Photon number of a coherent state of mean photon number `mean`."""
        if mean == 0:
            return cls.degenerate(0)
        law = stats.poisson(mean)
        cut = int(law.isf(tol)) + 1
        while law.sf(cut - 1) >= tol:
            cut += 1
        n = np.arange(cut)
        probs = law.pmf(n)
        tail = float(law.sf(cut - 1))
        return cls(n, probs, tail, mean - float(n @ probs), lambda z: np.exp(-mean * (1.0 - np.asarray(z))))

    @classmethod
    def from_file(cls, path) -> "PhotonDistribution":
        """Read ``n p_n`` pairs, one per line; ``#`` starts a comment."""
        support, probs = [], []
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'n p_n'")
            support.append(int(parts[0]))
            probs.append(float(parts[1]))
        return cls(support, probs)


@dataclass(frozen=True)
class BoundReport:
    """One evaluated formula.

    Attributes:
        formula_id: Stable name of the formula.
        value: Evaluated quantity.
        kind: ``"bound"`` (rigorous), ``"approximation"`` (asymptotic) or
            ``"exact"``.
        exponent: Decay exponent in ``exp(-exponent)`` where one is defined.
        error_bar: Upper uncertainty from truncating an infinite photon law.
        flags: Regime notes, e.g. ``"requires N_S<<1, N_B>>1"``.
    """

    formula_id: str
    value: float
    kind: str = "bound"
    exponent: Optional[float] = None
    error_bar: float = 0.0
    flags: tuple = ()


def _mu(eta: float, n_b: float):
    return np.sqrt(1.0 - np.asarray(eta) / (n_b + 1.0))


# ---------------------------------------------------------------------------
# Specular targets
# ---------------------------------------------------------------------------


def classical_pe_approx(s: DetectionScenario) -> BoundReport:
    """Error probability of the best classical ladar (asymptotic form)."""
    exponent = s.eta * s.energy * (math.sqrt(s.n_b + 1) - math.sqrt(s.n_b)) ** 2
    return BoundReport(
        "classical-ladar",
        math.sqrt(s.prior_product) * math.exp(-exponent),
        kind="approximation",
        exponent=exponent,
    )


def tmsv_pe_approx(s: DetectionScenario) -> BoundReport:
    """Many-mode TMSV error probability; meaningful only for ``N_S << 1`` and ``N_B >> 1``."""
    if s.n_b <= 0:
        raise ValueError("TMSV asymptotic error probability needs n_b > 0")
    exponent = s.eta * s.energy / s.n_b
    return BoundReport(
        "tmsv-qi",
        math.sqrt(s.prior_product) * math.exp(-exponent),
        kind="approximation",
        exponent=exponent,
        flags=("requires N_S<<1, N_B>>1",),
    )


def transmitter_pe_lower_bound(p: PhotonDistribution, s: DetectionScenario, check_energy: bool = True) -> BoundReport:
    """Fidelity lower bound for a transmitter with total photon law `p`."""
    if check_energy:
        p.check_energy(s.energy)
    mu = float(_mu(s.eta, s.n_b))
    total = float(p.fidelity_sum(mu))
    value = s.prior_product * total**2
    err = s.prior_product * ((total + p.tail_mass) ** 2 - total**2)
    return BoundReport("transmitter-fidelity", value, error_bar=err)


def universal_exponent(eta: float, n_b: float) -> float:
    """Largest error-probability exponent per signal photon."""
    return -math.log1p(-eta / (n_b + 1.0))


def universal_pe_lower_bound(s: DetectionScenario) -> BoundReport:
    """Transmitter-independent lower bound ``p0 p1 exp(-beta N_S)``."""
    exponent = universal_exponent(s.eta, s.n_b) * s.energy
    return BoundReport("universal", s.prior_product * math.exp(-exponent), exponent=exponent)


def tmsv_pe_lower_bound(s: DetectionScenario, modes: int) -> BoundReport:
    """Lower bound for `modes` iid TMSV pairs sharing total energy ``s.energy``."""
    if modes < 1:
        raise ValueError("mode count must be >= 1")
    x = s.energy * (1.0 - float(_mu(s.eta, s.n_b)))
    value = s.prior_product * math.exp(-2.0 * modes * math.log1p(x / modes))
    return BoundReport("tmsv-fidelity", value)


def fvg_sandwich(fid: float, prior0: float, prior1: float) -> tuple:
    """Fidelity-based lower bound and lower-bound form on the Helstrom error.

    Returns ``(p0 p1 F^2, (1 - sqrt(1 - 4 p0 p1 F^2)) / 2)``; the second
    member is never smaller than the first.
    """
    _check_priors(prior0, prior1)
    q = prior0 * prior1 * fid**2
    return q, 0.5 * (1.0 - math.sqrt(max(0.0, 1.0 - 4.0 * q)))


# ---------------------------------------------------------------------------
# Fading targets
# ---------------------------------------------------------------------------


def fading_pdf(eta, eta_bar: float):
    """Exponential reflectance density truncated to ``[0, 1]``."""
    eta = np.asarray(eta, dtype=float)
    norm = eta_bar * -math.expm1(-1.0 / eta_bar)
    inside = (eta >= 0) & (eta <= 1)
    out = np.where(inside, np.exp(-np.clip(eta, 0, 1) / eta_bar) / norm, 0.0)
    return out if out.ndim else float(out)


def fading_sample(rng: np.random.Generator, eta_bar: float, size: int) -> np.ndarray:
    """Draw reflectances from :func:`fading_pdf` by inverse-CDF sampling."""
    u = rng.random(size)
    return -eta_bar * np.log1p(u * math.expm1(-1.0 / eta_bar))


_GL_CACHE = {}


def _gl_nodes(n):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def gauss_legendre(f, a: float, b: float, tol: float = 1e-12, nodes: int = 128, max_depth: int = 40) -> float:
    """Adaptive Gauss-Legendre quadrature of a vectorised integrand.

    Each panel is integrated with `nodes` points and compared against the sum
    over its two halves; panels are halved until the two agree within their
    share of `tol`.
    """
    x, w = _gl_nodes(nodes)

    def rule(lo, hi):
        half = 0.5 * (hi - lo)
        return half * (w @ f(lo + half * (x + 1.0)))

    total = 0.0
    stack = [(a, b, rule(a, b), 0)]
    while stack:
        lo, hi, whole, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        left, right = rule(lo, mid), rule(mid, hi)
        if abs(left + right - whole) <= tol * (hi - lo) / (b - a) or depth >= max_depth:
            total += left + right
        else:
            stack.append((lo, mid, left, depth + 1))
            stack.append((mid, hi, right, depth + 1))
    return float(total)


def fading_pe_lower_bound_transmitter(p: PhotonDistribution, f: FadingScenario, check_energy: bool = True) -> BoundReport:
    """Fading-averaged fidelity bound for a transmitter with photon law `p`."""
    if check_energy:
        p.check_energy(f.energy)

    def integrand(eta):
        return fading_pdf(eta, f.eta_bar) * p.fidelity_sum(_mu(eta, f.n_b)) ** 2

    value = f.prior_product * gauss_legendre(integrand, 0.0, 1.0)
    err = f.prior_product * (2 * p.tail_mass + p.tail_mass**2)
    return BoundReport("fading-transmitter", value, error_bar=err, flags=_fading_flags(f))


def _gamma(n_b: float) -> float:
    return math.inf if n_b == 0 else math.log1p(1.0 / n_b)


def fading_pe_lower_bound_exact(f: FadingScenario) -> BoundReport:
    """Transmitter-independent fading bound including the truncation prefactor."""
    if f.energy == 0:
        value = f.prior_product
    elif f.n_b == 0:
        value = 0.0
    else:
        g = _gamma(f.n_b) * f.energy
        value = (
            f.prior_product
            * -math.expm1(-g - 1.0 / f.eta_bar)
            / (-math.expm1(-1.0 / f.eta_bar) * (1.0 + f.eta_bar * g))
        )
    return BoundReport("fading-exact", value, flags=_fading_flags(f))


def fading_pe_lower_bound_universal(f: FadingScenario) -> BoundReport:
    """``p0 p1 / (1 + eta_bar N_S ln(1 + 1/N_B))``: decays only as ``1/N_S``."""
    if f.energy == 0:
        value = f.prior_product
    elif f.n_b == 0:
        value = 0.0
    else:
        value = f.prior_product / (1.0 + f.eta_bar * f.energy * _gamma(f.n_b))
    return BoundReport("fading-universal", value, flags=_fading_flags(f))


def _fading_flags(f):
    return () if f.weak_target else ("eta_bar>0.1: fading model strained",)


# ---------------------------------------------------------------------------
# Reflectance estimation
# ---------------------------------------------------------------------------


def _check_estimation(eta, energy):
    if not 0.0 < eta < 1.0:
        raise ValueError("QFI bounds need a reflectance in (0, 1); they diverge as 1/eta")
    if energy < 0:
        raise ValueError("energy must be non-negative")


def qfi_bound_qi(eta: float, n_b: float, energy: float) -> float:
    """Upper bound on the reflectance QFI of any transmitter."""
    _check_estimation(eta, energy)
    denom = eta * (n_b + 1.0 - eta)
    if denom <= 0:
        raise ValueError("pole of the QFI bound")
    return energy / denom


def qfi_bound_classical(eta: float, n_b: float, energy: float) -> float:
    """Reflectance QFI of coherent states, the best classical transmitters."""
    _check_estimation(eta, energy)
    return energy / (eta * (2.0 * n_b + 1.0))


def qfi_tmsv(eta: float, n_s: float, n_b: float, modes: int = 1) -> float:
    """Low-reflectance QFI of `modes` TMSV pairs of per-mode brightness `n_s`."""
    energy = modes * n_s
    _check_estimation(eta, energy)
    return energy * (1.0 + n_s) / (eta * (2.0 * n_s * n_b + n_s + n_b + 1.0))


def qcrb(qfi: float) -> float:
    """Cramer-Rao floor on the mean squared error of unbiased estimators."""
    if qfi <= 0:
        raise ValueError("QFI must be positive")
    return 1.0 / qfi
