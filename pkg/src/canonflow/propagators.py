"""Propagators: exact transform-chain evolution and independent integrators.

Three routes to psi(t) are built here and cross-validated against each other:

* ``exact_solvable_propagate`` - for the solvable mass family the
  time-dependent oscillator is conjugated to a static one:

      U(t) = D(eps(t))^dag Q(chi(t))^dag e^(-i H'' t) Q(chi(0)) D(eps(0)),

  with D the dilation point unitary, Q the quadratic phase, eps =
  (1/2) ln(m0/m(t)), chi = m0 * deps, and H'' the constant-mass oscillator
  of frequency Omega0 evolved spectrally in its Hermite eigenbasis
  (phases e^(-i (n+1/2) Omega0 t), exact).

* ``split_step_propagate`` - a second-order Strang splitting of
  H(t) = p^2/(2 m(t)) + (1/2) m(t) w(t)^2 x^2 with midpoint coefficient
  sampling; the independent reference for the chain above.

* ``crank_nicolson_curved`` - Cayley-form Crank-Nicolson for the
  position-dependent-mass (curved-metric) Hamiltonian
  (1/2m) g^(-1/4) p g^(-1/2) p g^(-1/4), discretized as a manifestly
  Hermitian banded product with the central-difference momentum (splitting
  methods do not factor once the mass depends on position).

``gaussian_exact_propagate`` pushes a closed-form Gaussian through the same
transform chain (dilation: a -> e^(2 eps) a; quadratic phase: a -> a + i chi;
static-oscillator evolution by a Moebius map of a and classical motion of the
center, with the exact accumulated phase), giving an integrator-free oracle.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .errors import (LinearSolveFailure, ResolutionError, SingularMetric,
                     TruncationError)
from .flowcore import GeneratorSpec
from .gridspace import (Grid, GaussianState, WaveFunction,
                        apply_point_unitary, apply_quadratic_phase,
                        apply_momentum)
from .hamiltonians import epsilon_from_mass


@dataclass
class StepperReport:
    """Bookkeeping for a propagation run; norm drift <= 1e-8 for accepted runs."""

    steps: int = 0
    max_norm_drift: float = 0.0
    max_schrodinger_residual: float = 0.0
    wall_time_s: float = 0.0


@dataclass
class Trajectory:
    """States stored every ``stride`` steps (first and last always included)."""

    times: np.ndarray
    states: List[WaveFunction]
    report: StepperReport

    @property
    def final(self):
        return self.states[-1]


def _validate_time_grid(t_grid):
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise ValueError("time grid needs at least two points")
    dt = np.diff(t)
    if np.max(np.abs(dt - dt[0])) > 1e-9 * max(abs(dt[0]), 1e-300):
        raise ValueError("time grid must be uniform (fixed-step integrators)")
    return t, float(dt[0])


def _check_resolution(psi, tail_frac=0.1, tol=1e-10):
    """Reject states whose momentum content reaches the grid's Nyquist zone."""
    spec = np.abs(np.fft.fft(psi.values))
    n = psi.grid.n
    m = max(1, int(round(tail_frac * n / 2)))
    half = n // 2
    tail = max(np.max(spec[half - m:half + 1]), np.max(spec[half:half + m]))
    if tail > tol * np.max(spec):
        raise ResolutionError("spectral tail above threshold; refine dx")


# -- Hermite eigenbasis of the static oscillator --------------------------------

class HermiteBasis:
    """First M eigenfunctions of p^2/(2 m0) + (1/2) m0 Omega0^2 x^2 on a grid.

    Built by the stable normalized recurrence; eigenvalues (n + 1/2) Omega0.
    The grid must extend past the classical turning point of the highest
    basis function, else orthonormality degrades (see ``gram_residual``).
    """

    def __init__(self, size, m0, omega0, grid):
        self.size = int(size)
        self.m0 = float(m0)
        self.omega0 = float(omega0)
        self.grid = grid
        self.length_scale = 1.0 / np.sqrt(self.m0 * self.omega0)

        xi = grid.x / self.length_scale
        funcs = np.empty((self.size, grid.n))
        funcs[0] = (self.m0 * self.omega0 / np.pi) ** 0.25 * np.exp(-0.5 * xi * xi)
        if self.size > 1:
            funcs[1] = np.sqrt(2.0) * xi * funcs[0]
        for n in range(1, self.size - 1):
            funcs[n + 1] = (np.sqrt(2.0 / (n + 1)) * xi * funcs[n]
                            - np.sqrt(n / (n + 1.0)) * funcs[n - 1])
        self.functions = funcs

    def energies(self):
        return (np.arange(self.size) + 0.5) * self.omega0

    def gram_residual(self):
        gram = self.grid.dx * (self.functions @ self.functions.T)
        return float(np.max(np.abs(gram - np.eye(self.size))))

    def expand(self, psi):
        """Coefficients c_n = <phi_n|psi> and the captured probability fraction."""
        c = self.grid.dx * (self.functions @ psi.values)
        captured = float(np.sum(np.abs(c) ** 2)) / psi.norm() ** 2
        return c, captured

    def synthesize(self, coeffs):
        return WaveFunction(self.grid, coeffs @ self.functions)


def hermite_propagate(psi, basis, t, *, min_capture=1.0 - 1e-10):
    """Evolve under the static oscillator by exact spectral phases.

    Raises ``TruncationError`` when the basis captures less than
    ``min_capture`` of the state's probability.
    """
    c, captured = basis.expand(psi)
    if captured < min_capture:
        raise TruncationError(
            f"basis of size {basis.size} captures only {captured:.12f}")
    phases = np.exp(-1j * basis.energies() * t)
    return basis.synthesize(c * phases)


# -- split-step reference integrator -------------------------------------------

def split_step_propagate(mass, omega, psi0, t_grid, *, stride=None,
                         residual_samples=16):
    """Strang-split evolution of p^2/(2 m(t)) + (1/2) m(t) w(t)^2 x^2.

    Coefficients are sampled at each step's midpoint, giving global second
    order in dt (verified by the Richardson self-test in the suite).  The
    step itself is exactly unitary, so norm drift is at rounding level.
    """
    t, dt = _validate_time_grid(t_grid)
    _check_resolution(psi0)
    grid = psi0.grid
    x2 = grid.x ** 2
    k2 = grid.k ** 2
    nsteps = t.size - 1
    if stride is None:
        stride = max(1, nsteps // 16)
    sample_every = max(1, nsteps // max(1, residual_samples))

    report = StepperReport(steps=nsteps)
    t0_wall = time.perf_counter()
    norm0 = psi0.norm()
    values = psi0.values.copy()
    states = [WaveFunction(grid, values)]
    stored_t = [t[0]]

    for i in range(nsteps):
        tm = 0.5 * (t[i] + t[i + 1])
        m = float(mass.value(tm))
        w = float(omega.value(tm))
        half_v = np.exp(-0.25j * dt * m * w * w * x2)
        kin = np.exp(-0.5j * dt * k2 / m)
        prev = values
        values = half_v * np.fft.ifft(kin * np.fft.fft(half_v * prev))

        if (i + 1) % sample_every == 0 or i == nsteps - 1:
            nrm = np.sqrt(grid.dx * np.sum(np.abs(values) ** 2))
            report.max_norm_drift = max(report.max_norm_drift,
                                        abs(nrm - norm0))
            mid = 0.5 * (prev + values)
            hmid = (apply_momentum(mid, grid, 2) / (2.0 * m)
                    + 0.5 * m * w * w * x2 * mid)
            resid = 1j * (values - prev) / dt - hmid
            report.max_schrodinger_residual = max(
                report.max_schrodinger_residual,
                float(np.sqrt(grid.dx * np.sum(np.abs(resid) ** 2))) / norm0)
        if (i + 1) % stride == 0 or i == nsteps - 1:
            states.append(WaveFunction(grid, values))
            stored_t.append(t[i + 1])

    report.wall_time_s = time.perf_counter() - t0_wall
    return Trajectory(np.asarray(stored_t), states, report)


def free_propagate(psi, t, m=1.0):
    """Exact free evolution exp(-i p^2 t / (2m)) (single spectral step)."""
    kin = np.exp(-0.5j * psi.grid.k ** 2 * t / m)
    return WaveFunction(psi.grid, np.fft.ifft(kin * np.fft.fft(psi.values)))


# -- exact chain propagation for the solvable family ----------------------------

class ExactSolvablePropagator:
    """Precomputed transform-chain propagator for a solvable mass family.

    The initial state is transformed once into the static frame and expanded
    in the Hermite basis; evaluation at any t costs one phase rotation and
    one inverse transform pair.
    """

    def __init__(self, family, psi0, *, static_mass=None, basis_size=40,
                 interpolant="spectral", min_capture=1.0 - 1e-10):
        self.family = family
        self.grid = psi0.grid
        self.m0_static = (family.static_mass() if static_mass is None
                          else float(static_mass))
        self.eps = epsilon_from_mass(family.mass_profile(), self.m0_static)
        self.interpolant = interpolant
        self.basis = HermiteBasis(basis_size, self.m0_static, family.Omega0,
                                  psi0.grid)
        self._lin = GeneratorSpec.linear()

        e0 = float(self.eps.value(0.0))
        chi0 = self.m0_static * float(self.eps.d1(0.0))
        staged = apply_point_unitary(self._lin, e0, psi0,
                                     interpolant=interpolant)
        staged = apply_quadratic_phase(chi0, staged)
        self.coeffs, captured = self.basis.expand(staged)
        if captured < min_capture:
            raise TruncationError(
                f"basis of size {basis_size} captures only {captured:.12f}")

    def __call__(self, t):
        t = float(t)
        phases = np.exp(-1j * self.basis.energies() * t)
        evolved = self.basis.synthesize(self.coeffs * phases)
        et = float(self.eps.value(t))
        chit = self.m0_static * float(self.eps.d1(t))
        out = apply_quadratic_phase(-chit, evolved)
        return apply_point_unitary(self._lin, -et, out,
                                   interpolant=self.interpolant)


def exact_solvable_propagate(family, psi0, t, **kwargs):
    """psi(t) for the time-dependent oscillator (m(t), w) of a solvable family.

    Results are independent of the ``static_mass`` gauge choice (tested);
    the default m0 = m(0) makes the t = 0 dilation the identity.
    """
    return ExactSolvablePropagator(family, psi0, **kwargs)(t)


# -- closed-form Gaussian transport ---------------------------------------------

def _continuous_arg(m, omega, a0, t):
    """Continuous branch of arg(m w cos(w t) + i a0 sin(w t)), starting at 0.

    When 4 m w Re(a0) > Im(a0)^2 the rotated value e^(-i w t) D(t) stays in
    the right half plane and the branch is t*w + principal argument; outside
    that regime the path is unwrapped numerically.
    """
    mw = m * omega
    a0 = complex(a0)
    if 4.0 * mw * a0.real > a0.imag ** 2:
        rotated = (np.exp(-1j * omega * t)
                   * (mw * np.cos(omega * t) + 1j * a0 * np.sin(omega * t)))
        return omega * t + np.angle(rotated)
    samples = max(16, int(np.ceil(abs(omega * t) / 0.3)) + 1)
    ts = np.linspace(0.0, t, samples)
    path = mw * np.cos(omega * ts) + 1j * a0 * np.sin(omega * ts)
    return float(np.unwrap(np.angle(path))[-1])


def gaussian_oscillator_evolve(state, m, omega, t):
    """Exact evolution of a Gaussian under p^2/(2m) + (1/2) m w^2 x^2.

    Width:  a(t) = m w (a0 cos + i m w sin) / (m w cos + i a0 sin)
    Center: classical motion of (center, momentum)
    Phase:  action integral of the center plus -arg(D)/2 from the width;
            the ground width a0 = m w reproduces e^(-i w t / 2).
    """
    a0 = complex(state.a)
    q0, p0, th0 = state.center, state.momentum, state.phase
    mw = m * omega
    c, s = np.cos(omega * t), np.sin(omega * t)

    a_t = mw * (a0 * c + 1j * mw * s) / (mw * c + 1j * a0 * s)
    q_t = q0 * c + (p0 / mw) * s
    p_t = p0 * c - mw * q0 * s

    # center phase: the classical action integral of the Lagrangian
    # p^2/(2m) - (m w^2/2) q^2 along the orbit, in closed form
    sig, kap = np.sin(2.0 * omega * t), np.cos(2.0 * omega * t)
    theta_center = ((p0 ** 2 / (2.0 * m) - 0.5 * m * omega ** 2 * q0 ** 2)
                    * sig / (2.0 * omega)
                    + 0.5 * q0 * p0 * (kap - 1.0))
    theta_width = -0.5 * _continuous_arg(m, omega, a0, t)
    return GaussianState(a_t, float(q_t), float(p_t),
                         float(th0 + theta_center + theta_width))


def gaussian_exact_propagate(family, state, t, *, static_mass=None):
    """Closed-form Gaussian transport through the solvable-family chain."""
    m0s = (family.static_mass() if static_mass is None else float(static_mass))
    eps = epsilon_from_mass(family.mass_profile(), m0s)
    e0, et = float(eps.value(0.0)), float(eps.value(t))
    chi0 = m0s * float(eps.d1(0.0))
    chit = m0s * float(eps.d1(t))

    staged = state.dilated(e0).quadratic_phased(chi0)
    evolved = gaussian_oscillator_evolve(staged, m0s, family.Omega0, t)
    return evolved.quadratic_phased(-chit).dilated(-et)


# -- Crank-Nicolson for the curved (position-dependent-mass) Hamiltonian --------

def curved_kinetic_diagonals(gvals, m, dx):
    """Pentadiagonal kinetic operator (1/2m) A S^T M S A (offsets 0 and 2).

    A = diag(g^(-1/4)), M = diag(g^(-1/2)), S the antisymmetric central
    difference; the product is real symmetric positive semidefinite by
    construction.  Returns (main, second) with second[j] the (j, j+2) entry.
    """
    gvals = np.asarray(gvals, dtype=float)
    if np.any(gvals <= 0) or np.any(~np.isfinite(gvals)):
        raise SingularMetric("metric must be positive and finite on the grid")
    n = gvals.size
    a = gvals ** -0.25
    mm = gvals ** -0.5
    pref = 1.0 / (8.0 * m * dx * dx)
    main = np.zeros(n)
    # interior: A_j^2 (M_{j+1} + M_{j-1}); edges keep the one-sided term only
    main[1:-1] = a[1:-1] ** 2 * (mm[2:] + mm[:-2])
    main[0] = a[0] ** 2 * mm[1]
    main[-1] = a[-1] ** 2 * mm[-2]
    second = -a[:-2] * mm[1:-1] * a[2:]
    return pref * main, pref * second


def _curved_sparse(gvals, m, dx):
    main, second = curved_kinetic_diagonals(gvals, m, dx)
    n = gvals.size
    return scipy.sparse.diags([second, main, second], offsets=[-2, 0, 2],
                              shape=(n, n), format="csc")


def crank_nicolson_curved(metric, m, psi0, t_grid, *, stride=None):
    """Cayley-form Crank-Nicolson evolution under the curved Hamiltonian.

    (1 + i H dt/2) psi_{n+1} = (1 - i H dt/2) psi_n with H Hermitian banded,
    hence exactly norm-preserving up to the linear-solve tolerance.  The
    metric is sampled once (time-independent evolution); Dirichlet ends.
    """
    t, dt = _validate_time_grid(t_grid)
    grid = psi0.grid
    gvals = np.asarray(metric.g(grid.x), dtype=float)
    ham = _curved_sparse(gvals, float(m), grid.dx)
    n = grid.n
    eye = scipy.sparse.identity(n, format="csc")
    a_plus = (eye + 0.5j * dt * ham).tocsc()
    a_minus = (eye - 0.5j * dt * ham).tocsc()
    try:
        solver = scipy.sparse.linalg.splu(a_plus)
    except RuntimeError as exc:
        raise LinearSolveFailure(f"Cayley factorization failed: {exc}")

    nsteps = t.size - 1
    if stride is None:
        stride = max(1, nsteps // 16)
    report = StepperReport(steps=nsteps)
    wall0 = time.perf_counter()
    norm0 = psi0.norm()
    values = psi0.values.copy()
    states = [WaveFunction(grid, values)]
    stored_t = [t[0]]
    sample_every = max(1, nsteps // 16)

    for i in range(nsteps):
        prev = values
        values = solver.solve(a_minus @ prev)
        if not np.all(np.isfinite(values)):
            raise LinearSolveFailure("Crank-Nicolson solve produced non-finite values")
        if (i + 1) % sample_every == 0 or i == nsteps - 1:
            nrm = np.sqrt(grid.dx * np.sum(np.abs(values) ** 2))
            report.max_norm_drift = max(report.max_norm_drift, abs(nrm - norm0))
            mid = 0.5 * (prev + values)
            resid = 1j * (values - prev) / dt - ham @ mid
            report.max_schrodinger_residual = max(
                report.max_schrodinger_residual,
                float(np.sqrt(grid.dx * np.sum(np.abs(resid) ** 2))) / norm0)
        if (i + 1) % stride == 0 or i == nsteps - 1:
            states.append(WaveFunction(grid, values))
            stored_t.append(t[i + 1])

    report.wall_time_s = time.perf_counter() - wall0
    return Trajectory(np.asarray(stored_t), states, report)


# -- grid assembly of quadratic Hamiltonians (spectrum checks) -------------------

def quadratic_hamiltonian_matrix(ham, grid, fd_order=4):
    """Dense Hermitian finite-difference matrix of a p^2 + b x^2 + (c/2){x,p}."""
    n, dx = grid.n, grid.dx
    x = grid.x
    if fd_order == 2:
        stencil = np.array([1.0, -2.0, 1.0]) / dx ** 2
        offs = [-1, 0, 1]
    elif fd_order == 4:
        stencil = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12.0 * dx ** 2)
        offs = [-2, -1, 0, 1, 2]
    else:
        raise ValueError("fd_order must be 2 or 4")
    lap = scipy.sparse.diags(stencil, offs, shape=(n, n)).toarray()
    out = (-ham.a) * lap + np.diag(ham.b * x * x)
    if ham.c != 0.0:
        s = np.zeros((n, n))
        idx = np.arange(n - 1)
        s[idx, idx + 1] = 1.0 / (2.0 * dx)
        s[idx + 1, idx] = -1.0 / (2.0 * dx)
        p = -1j * s
        xm = np.diag(x.astype(complex))
        out = out.astype(complex) + 0.5 * ham.c * (xm @ p + p @ xm)
    return out


def oscillator_spectrum(ham, grid, k=8, fd_order=4):
    """Lowest k eigenvalues of the finite-difference assembly."""
    mat = quadratic_hamiltonian_matrix(ham, grid, fd_order=fd_order)
    vals = scipy.linalg.eigvalsh(mat)
    return vals[:k]
