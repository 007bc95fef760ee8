"""Uniform-grid wavefunctions and the unitary action of scaling transforms.

States live on a strictly uniform grid x_k = x0 + k*dx and momentum acts
spectrally (FFT with periodic wrap), so grids must be chosen large enough
that the support never reaches the boundary.  The two unitaries built here:

* point transform   (U psi)(x) = sqrt(phi'(x)) psi(phi(x)),  phi the eps-flow
  of the generator f.  This is the position representation of
  exp[i eps sqrt(f(x)) p sqrt(f(x))]; the half-density factor keeps it
  norm-preserving.
* quadratic phase   (U' psi)(x) = exp(-i chi x^2 / 2) psi(x).

Sign conventions: the maps above conjugate operators as U x U^dag = phi(x)
and U p U^dag = sqrt(w) p sqrt(w) with w = 1/phi'.  Expectation values of a
*transformed state* therefore move with the inverse map, e.g. for f(x) = x,
<x> of U psi equals e^(-eps) <x> of psi while U x U^dag = e^(+eps) x.

Resampling after a point transform uses band-limited (trigonometric)
interpolation by default, with a cubic-spline fallback; values whose
preimage leaves the grid are only zeroed after checking that the state
carries no weight there (never silent clamping).
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainBlowup, NotNormalized, SupportLeakage
from .flowcore import GeneratorSpec, flow_evaluate

EDGE_FRACTION = 0.02     # outer fraction of points used by the edge-decay check
LEAK_TOL = 1e-10         # default relative amplitude threshold


@dataclass(frozen=True)
class Grid:
    """Uniform spatial grid x_k = x0 + k*dx, k = 0..n-1."""

    x0: float
    dx: float
    n: int

    def __post_init__(self):
        if self.n < 8:
            raise ValueError("grid needs at least 8 points")
        if not self.dx > 0:
            raise ValueError("grid spacing must be positive")

    @classmethod
    def from_interval(cls, xmin, xmax, n):
        """Grid covering [xmin, xmax) with n points (endpoint excluded)."""
        return cls(float(xmin), (float(xmax) - float(xmin)) / n, int(n))

    @cached_property
    def x(self):
        return self.x0 + self.dx * np.arange(self.n)

    @cached_property
    def k(self):
        """Angular wavenumbers matching numpy's FFT layout."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    @property
    def xmax(self):
        return self.x0 + self.dx * (self.n - 1)


class WaveFunction:
    """Complex state sampled on a :class:`Grid`.  Values are immutable."""

    def __init__(self, grid, values):
        values = np.asarray(values, dtype=complex)
        if values.shape != (grid.n,):
            raise ValueError("value array does not match the grid")
        values = values.copy()
        values.setflags(write=False)
        self.grid = grid
        self.values = values

    def norm(self):
        return float(np.sqrt(self.grid.dx * np.sum(np.abs(self.values) ** 2)))

    def normalized(self):
        nrm = self.norm()
        if nrm == 0:
            raise ValueError("cannot normalize the zero state")
        return WaveFunction(self.grid, self.values / nrm)

    def inner(self, other):
        """<self|other> with the dx measure."""
        _require_same_grid(self, other)
        return complex(self.grid.dx * np.vdot(self.values, other.values))

    def fidelity(self, other):
        """|<self|other>| for unit-normalized inputs (norms divided out)."""
        ov = abs(self.inner(other))
        return float(ov / (self.norm() * other.norm()))

    def edge_decay_ok(self, frac=EDGE_FRACTION, tol=LEAK_TOL):
        m = max(1, int(round(frac * self.grid.n)))
        peak = np.max(np.abs(self.values))
        if peak == 0:
            return True
        edge = max(np.max(np.abs(self.values[:m])),
                   np.max(np.abs(self.values[-m:])))
        return bool(edge <= tol * peak)


def _require_same_grid(a, b):
    if a.grid != b.grid:
        raise ValueError("states live on different grids")


@dataclass(frozen=True)
class GaussianState:
    """Closed-form Gaussian psi(x) = N exp[-a(x-c)^2/2 + i p (x-c) + i theta].

    ``a`` is the complex width parameter (Re a > 0), N = (Re a / pi)^(1/4).
    Gaussians are closed under the dilation and quadratic-phase unitaries and
    under quadratic Hamiltonians, which makes them the analytic cross-check
    vehicle for the whole grid pipeline.
    """

    a: complex
    center: float = 0.0
    momentum: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        if not complex(self.a).real > 0:
            raise ValueError("Gaussian width parameter needs Re a > 0")

    def to_wavefunction(self, grid):
        u = grid.x - self.center
        amp = (complex(self.a).real / np.pi) ** 0.25
        vals = amp * np.exp(-0.5 * self.a * u * u
                            + 1j * self.momentum * u + 1j * self.phase)
        return WaveFunction(grid, vals)

    # closed-form moments (|psi|^2 is a real Gaussian of variance 1/(2 Re a))
    def mean_x(self):
        return self.center

    def var_x(self):
        return 1.0 / (2.0 * complex(self.a).real)

    def mean_x2(self):
        return self.center ** 2 + self.var_x()

    def mean_p(self):
        return self.momentum

    def mean_p2(self):
        a = complex(self.a)
        return self.momentum ** 2 + abs(a) ** 2 / (2.0 * a.real)

    def cov_xp(self):
        """(1/2)<{x - <x>, p - <p>}> = -Im(a) / (2 Re a)."""
        a = complex(self.a)
        return -a.imag / (2.0 * a.real)

    # closed-form transformation rules
    def dilated(self, eps):
        """Image under the f(x)=x point transform with parameter eps.

        (U psi)(x) = e^(eps/2) psi(e^eps x):  a -> e^(2 eps) a,
        center -> e^(-eps) center, momentum -> e^(eps) momentum.
        """
        s = float(eps)
        return GaussianState(self.a * np.exp(2.0 * s),
                             self.center * np.exp(-s),
                             self.momentum * np.exp(s),
                             self.phase)

    def quadratic_phased(self, chi):
        """Image under multiplication by exp(-i chi x^2 / 2)."""
        c = float(chi)
        return GaussianState(self.a + 1j * c,
                             self.center,
                             self.momentum - c * self.center,
                             self.phase - 0.5 * c * self.center ** 2)


# -- spectral helpers ---------------------------------------------------------

def spectral_derivative(values, grid, order=1):
    """order-th derivative via FFT (periodic wrap)."""
    return np.fft.ifft((1j * grid.k) ** order * np.fft.fft(values))


def apply_momentum(values, grid, power=1):
    """(p^power psi) with p = -i d/dx, spectrally."""
    return np.fft.ifft(grid.k ** power * np.fft.fft(values))


def momentum_matrix_fd(grid):
    """Hermitian central-difference matrix of p = -i d/dx (Dirichlet ends)."""
    n = grid.n
    s = np.zeros((n, n))
    idx = np.arange(n - 1)
    s[idx, idx + 1] = 1.0 / (2.0 * grid.dx)
    s[idx + 1, idx] = -1.0 / (2.0 * grid.dx)
    return -1j * s


def momentum_matrix_spectral(grid):
    """Dense spectral matrix of p = -i d/dx (exact on band-limited content)."""
    n = grid.n
    fmat = np.fft.fft(np.eye(n), axis=0)
    return np.conj(fmat.T) @ (grid.k[:, None] * fmat) / n


def band_limited_values(psi, points):
    """Evaluate the trigonometric interpolant of psi at arbitrary points.

    Points outside the grid interval are wrapped by the underlying Fourier
    series; callers are expected to mask them beforehand.  Cost is
    O(n * len(points)) with an n x m phase matrix.
    """
    grid = psi.grid
    coeff = np.fft.fft(psi.values) / grid.n
    phases = np.exp(1j * np.outer(np.asarray(points) - grid.x0, grid.k))
    return phases @ coeff


def _interpolate(psi, points, interpolant):
    if interpolant == "spectral":
        return band_limited_values(psi, points)
    if interpolant == "cubic":
        grid = psi.grid
        re = CubicSpline(grid.x, psi.values.real)
        im = CubicSpline(grid.x, psi.values.imag)
        return re(points) + 1j * im(points)
    raise ValueError(f"unknown interpolant {interpolant!r}")


# -- unitaries ----------------------------------------------------------------

def apply_point_unitary(gen, eps, psi, *, interpolant="spectral",
                        leak_tol=LEAK_TOL, mass_leak_tol=None):
    """Apply (U psi)(x) = sqrt(phi'(x)) psi(phi(x)) on the grid.

    Raises ``SupportLeakage`` when the input state does not decay at the
    grid edge (relative amplitude above ``leak_tol``), when the probability
    mass outside the window actually read by the flow exceeds
    ``mass_leak_tol`` (defaults to ``leak_tol``; mass there is lost, never
    silently clamped), or when the transformed support touches the grid
    edge.  Grid points whose flow image is undefined or out of grid are
    zero-filled only after those checks pass.
    """
    if mass_leak_tol is None:
        mass_leak_tol = leak_tol
    if eps == 0.0:
        return WaveFunction(psi.grid, psi.values)
    if not psi.edge_decay_ok(tol=leak_tol):
        raise SupportLeakage("input state does not satisfy edge decay; "
                             "enlarge the grid before resampling")
    grid = psi.grid
    x = grid.x

    # Flow images of the grid; points past a finite-parameter escape are
    # handled individually (their preimage carries no amplitude).
    defined = np.ones(grid.n, dtype=bool)
    try:
        ev = flow_evaluate(gen, eps, x)
        y = np.asarray(ev.x_out)
        jac = np.asarray(ev.jacobian)
    except DomainBlowup:
        y = np.full(grid.n, np.nan)
        jac = np.zeros(grid.n)
        for i, xi in enumerate(x):
            try:
                evi = flow_evaluate(gen, eps, float(xi))
                y[i] = evi.x_out
                jac[i] = evi.jacobian
            except DomainBlowup:
                defined[i] = False
        if not np.any(defined):
            raise

    in_grid = defined & (y >= grid.x0) & (y <= grid.xmax)
    if not np.any(in_grid):
        raise SupportLeakage("flow maps the whole grid outside itself")

    # Probability mass outside the window actually read by the flow is lost;
    # refuse if the fraction is above threshold.
    ylo, yhi = np.min(y[in_grid]), np.max(y[in_grid])
    unread = (x < ylo - grid.dx) | (x > yhi + grid.dx)
    if np.any(unread):
        lost = grid.dx * float(np.sum(np.abs(psi.values[unread]) ** 2))
        if lost > mass_leak_tol * psi.norm() ** 2:
            raise SupportLeakage(
                f"probability mass {lost:.3e} lies outside the window "
                "reachable by the flow")

    out = np.zeros(grid.n, dtype=complex)
    out[in_grid] = np.sqrt(jac[in_grid]) * _interpolate(psi, y[in_grid],
                                                        interpolant)
    result = WaveFunction(grid, out)
    if not result.edge_decay_ok(tol=max(leak_tol, 1e-9)):
        raise SupportLeakage("transformed support reaches the grid edge")
    return result


def apply_quadratic_phase(chi, psi):
    """Multiply by exp(-i chi x^2 / 2); exactly norm-preserving."""
    x = psi.grid.x
    return WaveFunction(psi.grid, np.exp(-0.5j * chi * x * x) * psi.values)


# -- observables --------------------------------------------------------------

_SIMPLE_OBSERVABLES = ("x", "x2", "p", "p2", "xp_anticomm")


def expectation(observable, psi, *, norm_tol=1e-6):
    """<psi|O|psi> for O in {x, x2, p, p2, xp_anticomm, H(a,b,c)}.

    ``observable`` is one of the strings above or an object with fields
    a, b, c meaning H = a p^2 + b x^2 + (c/2){x,p}.  Requires a normalized
    state; the (tiny) imaginary residue of the Hermitian expectation is
    checked and a warning is emitted above 1e-10.
    """
    if abs(psi.norm() - 1.0) > norm_tol:
        raise NotNormalized(f"state norm is {psi.norm():.6g}, expected 1")
    grid = psi.grid
    x = grid.x
    v = psi.values

    def mean_of(wvals):
        return complex(grid.dx * np.vdot(v, wvals))

    if isinstance(observable, str):
        if observable not in _SIMPLE_OBSERVABLES:
            raise ValueError(f"unknown observable {observable!r}")
        if observable == "x":
            val = mean_of(x * v)
        elif observable == "x2":
            val = mean_of(x * x * v)
        elif observable == "p":
            val = mean_of(apply_momentum(v, grid, 1))
        elif observable == "p2":
            val = mean_of(apply_momentum(v, grid, 2))
        else:  # (1/2)<{x,p}> + (1/2)<{p,x}> = <x p> + <p x> = 2 Re <x p>
            pv = apply_momentum(v, grid, 1)
            val = mean_of(x * pv) + mean_of(apply_momentum(x * v, grid, 1))
    else:
        a, b, c = observable.a, observable.b, observable.c
        val = (a * expectation("p2", psi, norm_tol=norm_tol)
               + b * expectation("x2", psi, norm_tol=norm_tol)
               + 0.5 * c * expectation("xp_anticomm", psi, norm_tol=norm_tol))
        return float(val)

    if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
        warnings.warn(f"imaginary residue {val.imag:.3e} in <{observable}>",
                      stacklevel=2)
    return float(val.real)


# -- operator-identity verification -------------------------------------------

@dataclass(frozen=True)
class BracketReport:
    """Max relative residuals of the two commutator identities.

    ``multiplication_identity``:  [{f1,p}, f2]    vs  -2i f1 f2'
    ``generator_identity``:       [{f1,p},{f2,p}] vs  -i {h,p} with
    h = 2 (f1 f2' - f2 f1'), each applied to every probe state.
    """

    multiplication_identity: float
    generator_identity: float


def _anticomm_apply(fvals, dfvals, values, grid):
    """{g(x), p} psi = -i (2 g psi' + g' psi), spectrally."""
    dpsi = spectral_derivative(values, grid, 1)
    return -1j * (2.0 * fvals * dpsi + dfvals * values)


def verify_bracket_identities(f1, f2, grid, probes):
    """Numerically check both commutator identities on a set of probe states.

    Returns the maximum over probes of ||LHS psi - RHS psi|| / ||psi||,
    computed with spectral derivatives, for each identity.
    """
    x = grid.x
    f1v, df1v = f1.f(x), f1.df(x)
    f2v, df2v = f2.f(x), f2.df(x)
    hv = 2.0 * (f1v * df2v - f2v * df1v)
    dhv = _h_derivative(f1, f2, x)

    res1 = res2 = 0.0
    for psi in probes:
        v = psi.values
        nrm = psi.norm()

        # identity 1: [{f1,p}, f2] psi = -2i f1 f2' psi
        lhs1 = (_anticomm_apply(f1v, df1v, f2v * v, grid)
                - f2v * _anticomm_apply(f1v, df1v, v, grid))
        rhs1 = -2j * f1v * df2v * v
        res1 = max(res1, _l2(lhs1 - rhs1, grid) / nrm)

        # identity 2: [{f1,p}, {f2,p}] psi = -(2 h psi' + h' psi)
        lhs2 = (_anticomm_apply(f1v, df1v,
                                _anticomm_apply(f2v, df2v, v, grid), grid)
                - _anticomm_apply(f2v, df2v,
                                  _anticomm_apply(f1v, df1v, v, grid), grid))
        rhs2 = -(2.0 * hv * spectral_derivative(v, grid, 1) + dhv * v)
        res2 = max(res2, _l2(lhs2 - rhs2, grid) / nrm)

    return BracketReport(float(res1), float(res2))


def _h_derivative(f1, f2, x):
    # h' = 2 (f1 f2'' - f2 f1''); second derivatives are analytic for the
    # closed-form generator kinds and finite differences otherwise.
    return 2.0 * (f1.f(x) * f2.d2f(x) - f2.f(x) * f1.d2f(x))


def _l2(values, grid):
    return float(np.sqrt(grid.dx * np.sum(np.abs(values) ** 2)))


# -- CSV interchange ----------------------------------------------------------

def wavefunction_to_csv(psi, path):
    """Write columns x,re,im in full double precision."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "re", "im"])
        for xi, vi in zip(psi.grid.x, psi.values):
            writer.writerow([f"{xi:.17g}", f"{vi.real:.17g}", f"{vi.imag:.17g}"])


def wavefunction_from_csv(path):
    data = np.genfromtxt(path, delimiter=",", names=True)
    x = np.atleast_1d(data["x"])
    vals = np.atleast_1d(data["re"]) + 1j * np.atleast_1d(data["im"])
    dxs = np.diff(x)
    if x.size < 8 or np.max(np.abs(dxs - dxs[0])) > 1e-9 * abs(dxs[0]):
        raise ValueError("CSV grid is not strictly uniform")
    grid = Grid(float(x[0]), float(dxs[0]), int(x.size))
    return WaveFunction(grid, vals)
