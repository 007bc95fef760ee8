"""Quadratic-Hamiltonian algebra under scaling and quadratic-phase transforms.

With H = a p^2 + b x^2 + (c/2){x,p} (hbar = 1), the two time-dependent
unitaries used throughout the package act affinely on the coefficients:

* dilation, parameter eps(t):
      (a, b, c) -> (a e^(-2 eps), b e^(2 eps), c - deps)
  The -deps shift comes from the -i U d(U^dag)/dt term; it vanishes for a
  time-independent transform, which is why the map is affine rather than
  linear whenever deps != 0 (and is *not* spectrum-preserving then).

* quadratic phase exp(-i chi x^2 / 2):
      (a, b, c) -> (a, b + a chi^2 + c chi + dchi/2, c + 2 a chi)

Chaining the two with eps = (1/2) ln(m0/m(t)) and chi = m0 * deps turns the
standard oscillator a = 1/(2m), b = m w^2/2 into a constant-mass oscillator
with effective frequency

      Omega = sqrt(ddeps - deps^2 + w^2),

independent of the gauge constant m0.  Requiring Omega to be a constant
Omega0 picks out the exactly solvable mass family

      m(t) = m0 (mu e^(alpha t) + nu e^(-alpha t))^2,  w^2 = Omega0^2 + alpha^2,

whose best-known member is the exponential-mass (Caldirola-Kanai) damped
oscillator, mu = 1, nu = 0, alpha = gamma/2.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .errors import ImaginaryFrequency, MassZeroCrossing, NegativeRadicand
from .flowcore import GeneratorSpec, flow_evaluate


# -- time profiles ------------------------------------------------------------

@dataclass(frozen=True)
class TimeProfile:
    """A scalar function of time with its first two derivatives.

    Closed-form constructors keep the derivatives exact; ``from_callable``
    fills them in with 4th-order central differences of step
    h = 1e-4 * timescale.
    """

    value: Callable
    d1: Callable
    d2: Callable
    name: str = ""

    @classmethod
    def constant(cls, v):
        v = float(v)
        return cls(lambda t: v + 0.0 * np.asarray(t, dtype=float),
                   lambda t: 0.0 * np.asarray(t, dtype=float),
                   lambda t: 0.0 * np.asarray(t, dtype=float),
                   name=f"const {v}")

    @classmethod
    def exponential(cls, c0, rate):
        """c0 * exp(rate * t)."""
        c0, rate = float(c0), float(rate)
        return cls(lambda t: c0 * np.exp(rate * np.asarray(t, dtype=float)),
                   lambda t: c0 * rate * np.exp(rate * np.asarray(t, dtype=float)),
                   lambda t: c0 * rate ** 2 * np.exp(rate * np.asarray(t, dtype=float)),
                   name=f"{c0}*exp({rate}t)")

    @classmethod
    def from_callable(cls, fn, timescale=1.0, name="numeric"):
        h = 1e-4 * float(timescale)

        def d1(t):
            t = np.asarray(t, dtype=float)
            return (fn(t - 2 * h) - 8 * fn(t - h) + 8 * fn(t + h)
                    - fn(t + 2 * h)) / (12 * h)

        def d2(t):
            t = np.asarray(t, dtype=float)
            return (-fn(t - 2 * h) + 16 * fn(t - h) - 30 * fn(t)
                    + 16 * fn(t + h) - fn(t + 2 * h)) / (12 * h * h)

        return cls(lambda t: np.asarray(fn(np.asarray(t, dtype=float)), dtype=float),
                   d1, d2, name=name)

    def __call__(self, t):
        return self.value(t)

    def derivative_consistency(self, ts, h=None):
        """Max mismatch between stored and finite-difference derivatives."""
        ts = np.asarray(ts, dtype=float)
        if h is None:
            span = max(np.ptp(ts), 1.0)
            h = 1e-4 * span
        fd1 = (self.value(ts - 2 * h) - 8 * self.value(ts - h)
               + 8 * self.value(ts + h) - self.value(ts + 2 * h)) / (12 * h)
        fd2 = (-self.value(ts - 2 * h) + 16 * self.value(ts - h)
               - 30 * self.value(ts) + 16 * self.value(ts + h)
               - self.value(ts + 2 * h)) / (12 * h * h)
        scale = 1.0 + np.max(np.abs(self.value(ts)))
        return float(max(np.max(np.abs(fd1 - self.d1(ts))),
                         np.max(np.abs(fd2 - self.d2(ts)))) / scale)


def epsilon_from_mass(mass, m0):
    """eps(t) = (1/2) ln(m0 / m(t)) so that m e^(2 eps) = m0, with derivatives.

    deps = -dm/(2m), ddeps = -ddm/(2m) + (dm)^2/(2 m^2).
    """
    m0 = float(m0)

    def eps(t):
        m = _positive_mass(mass, t)
        return 0.5 * np.log(m0 / m)

    def deps(t):
        m = _positive_mass(mass, t)
        return -mass.d1(t) / (2.0 * m)

    def ddeps(t):
        m = _positive_mass(mass, t)
        return -mass.d2(t) / (2.0 * m) + mass.d1(t) ** 2 / (2.0 * m * m)

    return TimeProfile(eps, deps, ddeps, name=f"eps[m0={m0}]")


def _positive_mass(mass, t):
    m = np.asarray(mass.value(t), dtype=float)
    if np.any(m <= 0):
        raise MassZeroCrossing("mass profile is not positive at the requested time")
    return m


# -- quadratic Hamiltonians ---------------------------------------------------

@dataclass(frozen=True)
class QuadraticHamiltonian:
    """H = a p^2 + b x^2 + (c/2){x,p}; Hermitian by construction."""

    a: float
    b: float
    c: float = 0.0

    @classmethod
    def oscillator(cls, m, omega):
        """Standard form p^2/(2m) + (1/2) m omega^2 x^2."""
        return cls(a=1.0 / (2.0 * m), b=0.5 * m * omega ** 2, c=0.0)

    def mass(self):
        return 1.0 / (2.0 * self.a)


def dilation_transform(ham, eps, deps):
    """Coefficient map of the dilation with parameter eps and rate deps."""
    s = np.exp(2.0 * float(eps))
    return replace(ham, a=ham.a / s, b=ham.b * s, c=ham.c - float(deps))


def quadratic_phase_transform(ham, chi, dchi):
    """Coefficient map of exp(-i chi x^2/2); p -> p + chi x plus the dchi/2 x^2 drive."""
    chi, dchi = float(chi), float(dchi)
    return replace(ham,
                   b=ham.b + ham.a * chi ** 2 + ham.c * chi + 0.5 * dchi,
                   c=ham.c + 2.0 * ham.a * chi)


def reduce_oscillator(mass, omega, t, m0=None):
    """Apply both transforms to p^2/(2m) + (1/2) m w^2 x^2 at time t.

    Returns (QuadraticHamiltonian, eps(t), chi(t)).  With the canonical
    choices eps = (1/2)ln(m0/m), chi = m0*deps the result is
    (1/(2 m0), (1/2) m0 Omega(t)^2, 0).
    """
    if m0 is None:
        m0 = float(mass.value(0.0))
    epsp = epsilon_from_mass(mass, m0)
    e, de, dde = float(epsp.value(t)), float(epsp.d1(t)), float(epsp.d2(t))
    h0 = QuadraticHamiltonian.oscillator(float(mass.value(t)), float(omega.value(t)))
    h1 = dilation_transform(h0, e, de)
    h2 = quadratic_phase_transform(h1, m0 * de, m0 * dde)
    return h2, e, m0 * de


def effective_frequency(mass, omega, t, m0=None):
    """Omega(t) = sqrt(ddeps - deps^2 + w^2) with eps = (1/2)ln(m0/m).

    Independent of m0 (eps shifts by a constant).  Raises
    ``ImaginaryFrequency`` when the radicand is negative (inverted
    effective oscillator: reported, not computed).
    """
    if m0 is None:
        m0 = float(mass.value(0.0))
    epsp = epsilon_from_mass(mass, m0)
    t = np.asarray(t, dtype=float)
    rad = epsp.d2(t) - epsp.d1(t) ** 2 + np.asarray(omega.value(t)) ** 2
    if np.any(rad < 0):
        raise ImaginaryFrequency("ddeps - deps^2 + w^2 < 0")
    out = np.sqrt(rad)
    return float(out) if out.ndim == 0 else out


def omega_from_mass(mass, omega0, t):
    """The unique w(t) pairing with m(t) to an Omega0 static oscillator.

    w = sqrt(Omega0^2 + ddm/(2m) - (dm/(2m))^2).
    """
    t = np.asarray(t, dtype=float)
    m = _positive_mass(mass, t)
    rad = float(omega0) ** 2 + mass.d2(t) / (2.0 * m) - (mass.d1(t) / (2.0 * m)) ** 2
    if np.any(rad < 0):
        raise NegativeRadicand("no real frequency pairs with this mass profile")
    out = np.sqrt(rad)
    return float(out) if out.ndim == 0 else out


# -- the exactly solvable family ----------------------------------------------

@dataclass(frozen=True)
class SolvableFamily:
    """Masses m(t) = m0 (mu e^(alpha t) + nu e^(-alpha t))^2 with constant w.

    The oscillator (m(t), w) with w^2 = Omega0^2 + alpha^2 reduces exactly to
    a static oscillator of frequency Omega0.  ``trigonometric=True`` selects
    the oscillatory-mass extension m = m0 (mu cos(alpha t) + nu sin(alpha t))^2
    with w^2 = Omega0^2 - alpha^2 (the analytic continuation alpha -> i alpha;
    offered as a clearly labeled extension of the exponential family).
    """

    m0: float
    mu: float
    nu: float
    alpha: float
    Omega0: float
    trigonometric: bool = False

    def __post_init__(self):
        if not self.m0 > 0:
            raise ValueError("m0 must be positive")
        if self.mu == 0.0 and self.nu == 0.0:
            raise ValueError("mu and nu cannot both vanish")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if not self.Omega0 > 0:
            raise ValueError("Omega0 must be positive")
        if self.trigonometric and self.alpha >= self.Omega0:
            raise ValueError("trigonometric family needs alpha < Omega0")

    @classmethod
    def caldirola_kanai(cls, gamma, omega0=None, m0=1.0, Omega0=None):
        """Exponential mass m = m0 e^(gamma t): mu = 1, nu = 0, alpha = gamma/2.

        Provide either the lab frequency omega0 (w^2 must exceed gamma^2/4)
        or the reduced frequency Omega0 directly.
        """
        alpha = 0.5 * float(gamma)
        if Omega0 is None:
            if omega0 is None:
                raise ValueError("provide omega0 or Omega0")
            rad = float(omega0) ** 2 - alpha ** 2
            if rad <= 0:
                raise ImaginaryFrequency("overdamped: omega0^2 <= (gamma/2)^2")
            Omega0 = np.sqrt(rad)
        return cls(m0=float(m0), mu=1.0, nu=0.0, alpha=alpha, Omega0=float(Omega0))

    @property
    def omega(self):
        """The constant lab frequency solving the constancy condition."""
        if self.trigonometric:
            return float(np.sqrt(self.Omega0 ** 2 - self.alpha ** 2))
        return float(np.sqrt(self.Omega0 ** 2 + self.alpha ** 2))

    def _s(self, t):
        t = np.asarray(t, dtype=float)
        if self.trigonometric:
            s = self.mu * np.cos(self.alpha * t) + self.nu * np.sin(self.alpha * t)
            ds = self.alpha * (-self.mu * np.sin(self.alpha * t)
                               + self.nu * np.cos(self.alpha * t))
            dds = -self.alpha ** 2 * s
        else:
            ep, em = np.exp(self.alpha * t), np.exp(-self.alpha * t)
            s = self.mu * ep + self.nu * em
            ds = self.alpha * (self.mu * ep - self.nu * em)
            dds = self.alpha ** 2 * s
        return s, ds, dds

    def mass_with_derivatives(self, t):
        """(m, dm, ddm) at t, closed form; raises on a zero crossing."""
        s, ds, dds = self._s(t)
        if np.any(s * s <= 0) or np.any(~np.isfinite(s)):
            raise MassZeroCrossing("mu e^(at) + nu e^(-at) vanishes at the requested time")
        m = self.m0 * s * s
        dm = 2.0 * self.m0 * s * ds
        ddm = 2.0 * self.m0 * (ds * ds + s * dds)
        return m, dm, ddm

    def mass_profile(self):
        return TimeProfile(lambda t: self.mass_with_derivatives(t)[0],
                           lambda t: self.mass_with_derivatives(t)[1],
                           lambda t: self.mass_with_derivatives(t)[2],
                           name="solvable-family mass")

    def frequency_profile(self):
        return TimeProfile.constant(self.omega)

    def static_mass(self):
        """Default gauge constant m0_static = m(0), making eps(0) = 0."""
        return float(self.mass_with_derivatives(0.0)[0])

    def constancy_residual(self, t):
        """|ddeps - deps^2 + alpha^2| with eps from the closed-form mass.

        Vanishes identically for the exponential family (the defining
        property); computed here from the generic eps formulas as a
        self-check.
        """
        epsp = epsilon_from_mass(self.mass_profile(), self.static_mass())
        t = np.asarray(t, dtype=float)
        sign = -1.0 if self.trigonometric else 1.0
        return np.abs(epsp.d2(t) - epsp.d1(t) ** 2 + sign * self.alpha ** 2)


def solvable_mass(family, t):
    """m(t) and its first two derivatives for a solvable mass family."""
    return family.mass_with_derivatives(t)


# -- general-generator transform of a standard Hamiltonian ---------------------

@dataclass(frozen=True)
class TransformedStandardHamiltonian:
    """Image of p^2/(2m) + V(x) under the (f, eps) point transform.

    kinetic:   (1/(2m)) sqrt(w) p w p sqrt(w),  w(x) the conjugation factor
    potential: V(phi_eps(x))
    drive:     -(deps/2) {f(x), p}   (only for time-dependent eps)

    ``assemble`` builds the dense Hermitian grid matrix; with V = 0 and
    constant eps this equals the curved-space Hamiltonian for the metric
    g = w^(-2) assembled the same way.
    """

    mass: float
    generator: GeneratorSpec
    eps: float
    deps: float
    weight: Callable          # w(x)
    potential: Callable       # V(phi_eps(x))

    def assemble(self, grid, discretization="spectral"):
        from .gridspace import momentum_matrix_fd, momentum_matrix_spectral

        x = grid.x
        w = np.asarray(self.weight(x), dtype=float)
        if discretization == "spectral":
            p = momentum_matrix_spectral(grid)
        elif discretization == "fd":
            p = momentum_matrix_fd(grid)
        else:
            raise ValueError(f"unknown discretization {discretization!r}")
        b = p @ np.diag(np.sqrt(w))
        ham = (b.conj().T @ (w[:, None] * b)) / (2.0 * self.mass)
        ham += np.diag(self.potential(x))
        if self.deps != 0.0:
            fv = np.asarray(self.generator.f(x), dtype=float)
            anti = np.diag(fv) @ p + p @ np.diag(fv)
            ham = ham - 0.5 * self.deps * anti
        return 0.5 * (ham + ham.conj().T)


def general_f_transform(mass, potential, gen, eps, deps=0.0):
    """Transform H = p^2/(2m) + V(x) by the (f, eps) point transform.

    For f(x) = x this reproduces the dilation coefficients
    (p^2 e^(-2 eps)/(2m), V(e^eps x), -(deps/2){x,p}).
    """
    def weight(x):
        return flow_evaluate(gen, eps, x).f2

    def moved_potential(x):
        return potential(flow_evaluate(gen, eps, x).x_out)

    return TransformedStandardHamiltonian(
        mass=float(mass), generator=gen, eps=float(eps), deps=float(deps),
        weight=weight, potential=moved_potential)
