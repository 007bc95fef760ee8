"""Tests for the free-particle <-> curved-metric correspondence."""

import numpy as np
import pytest

from canonflow.errors import SingularMetric
from canonflow.flowcore import GeneratorSpec, conjugation_factor, flow_evaluate
from canonflow.gridspace import (GaussianState, Grid, WaveFunction,
                                 apply_point_unitary)
from canonflow.metricmap import (MetricProfile, curved_hamiltonian_matrix,
                                 generator_from_metric, metric_from_generator,
                                 verify_metric_equivalence)

EXP1 = GeneratorSpec.exp_decay(1.0)
QUAD = GeneratorSpec.quadratic()
LIN = GeneratorSpec.linear()


class TestMetricFromGenerator:
    def test_quadratic_closed_form(self):
        metric = metric_from_generator(QUAD, 0.2)
        xs = np.array([-2.0, 0.0, 1.0, 3.0])
        assert np.allclose(metric.g(xs), (1.0 - 0.2 * xs) ** -4, rtol=1e-13)

    def test_zero_parameter_flat(self):
        metric = metric_from_generator(EXP1, 0.0)
        assert np.allclose(metric.g(np.linspace(-3, 3, 7)), 1.0, atol=1e-14)

    def test_expdecay_flow_derived(self):
        # oracle: g = (f / f(phi))^-2 with phi integrated independently
        from scipy.integrate import solve_ivp
        xs = np.array([-1.0, 0.0, 2.0])
        metric = metric_from_generator(EXP1, 0.4)
        for x in xs:
            sol = solve_ivp(lambda s, y: np.exp(-y), (0.0, 0.4), [x],
                            rtol=1e-12, atol=1e-14)
            w = np.exp(-x) / np.exp(-sol.y[0, -1])
            assert metric.g(x) == pytest.approx(w ** -2, rel=1e-9)
        assert np.allclose(metric.g(xs), (1.0 + 0.4 * np.exp(-xs)) ** -2,
                           rtol=1e-13)

    def test_linear_constant_metric(self):
        metric = metric_from_generator(LIN, 0.3)
        assert np.allclose(metric.g(np.linspace(-2, 2, 5)), np.exp(0.6), rtol=1e-13)


class TestCurvedMatrix:
    GRID = Grid.from_interval(-5.0, 5.0, 64)

    def test_flat_equals_flat(self):
        h1 = curved_hamiltonian_matrix(MetricProfile.constant(1.0), 1.0, self.GRID)
        h2 = curved_hamiltonian_matrix(MetricProfile.from_callable(lambda x: 1.0 + 0.0 * x),
                                       1.0, self.GRID)
        assert np.max(np.abs(h1 - h2)) == 0.0

    def test_constant_metric_scaling(self):
        # classical kinetic term p^2/(2 m g): g = 4 scales it by 1/4
        h4 = curved_hamiltonian_matrix(MetricProfile.constant(4.0), 1.0, self.GRID)
        h1 = curved_hamiltonian_matrix(MetricProfile.constant(1.0), 1.0, self.GRID)
        assert np.max(np.abs(h4 - 0.25 * h1)) < 1e-14

    def test_hermitian_by_construction(self):
        metric = metric_from_generator(EXP1, 0.4)
        grid = Grid.from_interval(-3.0, 8.0, 80)
        h_fd = curved_hamiltonian_matrix(metric, 1.0, grid)
        assert np.max(np.abs(h_fd - h_fd.conj().T)) == 0.0
        h_sp = curved_hamiltonian_matrix(metric, 1.0, grid, discretization="spectral")
        assert np.max(np.abs(h_sp - h_sp.conj().T)) < 1e-14

    def test_positive_required(self):
        with pytest.raises(SingularMetric):
            curved_hamiltonian_matrix(
                MetricProfile.from_callable(lambda x: np.asarray(x)), 1.0, self.GRID)

    @pytest.mark.parametrize("gen,eps", [(LIN, 0.3), (EXP1, 0.4)])
    def test_conjugation_identity(self, gen, eps):
        # H_g psi = U H_free U^dag psi on smooth probes, spectral assembly
        grid = Grid.from_interval(-6.0, 14.0, 320)
        hg = curved_hamiltonian_matrix(metric_from_generator(gen, eps), 1.0,
                                       grid, discretization="spectral")
        hfree = curved_hamiltonian_matrix(MetricProfile.constant(1.0), 1.0,
                                          grid, discretization="spectral")
        probes = [GaussianState(a=2.0, center=c, momentum=p).to_wavefunction(grid)
                  for c, p in [(3.5, 0.0), (4.5, 1.0), (4.0, -0.8)]]
        for probe in probes:
            lhs = hg @ probe.values
            staged = apply_point_unitary(gen, -eps, probe, leak_tol=1e-8)
            rhs = apply_point_unitary(gen, eps,
                                      WaveFunction(grid, hfree @ staged.values),
                                      leak_tol=1e-4)
            num = np.sqrt(grid.dx * np.sum(np.abs(lhs - rhs.values) ** 2))
            den = np.sqrt(grid.dx * np.sum(np.abs(lhs) ** 2))
            assert num / den < 1e-6


class TestGeneratorFromMetric:
    def test_flat_gives_shift_flow(self):
        rec = generator_from_metric(MetricProfile.constant(1.0), 0.5,
                                    anchor=0.0, working_interval=(-3.0, 3.0))
        xs = np.linspace(-3.0, 3.0, 13)
        shift = rec.seed_value
        assert shift > 0
        assert np.max(np.abs(rec.flow(xs) - xs - shift)) < 1e-12
        fvals = rec.generator.f(np.linspace(-3.0, 3.0, 11))
        assert np.max(np.abs(fvals - shift / 0.5)) < 1e-10   # constant generator
        w = conjugation_factor(rec.generator, 0.5, xs)
        assert np.max(np.abs(np.asarray(w) ** -2.0 - 1.0)) < 1e-9

    def test_expdecay_recovers_true_flow(self):
        metric = metric_from_generator(EXP1, 0.4)
        rec = generator_from_metric(metric, 0.4, anchor=0.0,
                                    working_interval=(-4.0, 4.0))
        xs = np.linspace(-4.0, 4.0, 81)
        assert np.max(np.abs(rec.flow(xs) - np.log(np.exp(xs) + 0.4))) < 1e-6

    def test_expdecay_round_trip(self):
        metric = metric_from_generator(EXP1, 0.4)
        rec = generator_from_metric(metric, 0.4, anchor=0.0,
                                    working_interval=(-4.0, 4.0))
        xs = np.linspace(-4.0, 4.0, 17)
        ev = flow_evaluate(rec.generator, 0.4, xs, with_jacobian=False,
                           rtol=1e-12, atol=1e-14)
        g_rt = np.asarray(ev.f2) ** -2.0
        assert np.max(np.abs(g_rt - metric.g(xs)) / metric.g(xs)) < 1e-6
        assert np.max(np.abs(ev.x_out - rec.flow(xs))) < 1e-6

    def test_quadratic_round_trip(self):
        metric = metric_from_generator(QUAD, 0.2)
        rec = generator_from_metric(metric, 0.2, anchor=0.0,
                                    working_interval=(-3.0, 3.0))
        xs = np.linspace(-3.0, 3.0, 13)
        w = conjugation_factor(rec.generator, 0.2, xs, rtol=1e-12, atol=1e-14)
        g_rt = np.asarray(w) ** -2.0
        assert np.max(np.abs(g_rt - metric.g(xs)) / metric.g(xs)) < 1e-6

    def test_downward_flow_round_trip(self):
        metric = metric_from_generator(EXP1, 0.4)
        rec = generator_from_metric(metric, -0.3, anchor=0.0,
                                    working_interval=(-2.0, 2.0))
        xs = np.linspace(-2.0, 2.0, 9)
        w = conjugation_factor(rec.generator, -0.3, xs, rtol=1e-12, atol=1e-14)
        assert np.max(np.abs(np.asarray(w) ** -2.0 - metric.g(xs))
                      / metric.g(xs)) < 1e-6

    def test_zero_parameter_rejected(self):
        with pytest.raises(ValueError):
            generator_from_metric(MetricProfile.constant(1.0), 0.0,
                                  anchor=0.0, working_interval=(-1.0, 1.0))

    def test_metric_csv_round_trip(self, tmp_path):
        xs = np.linspace(-5.0, 5.0, 201)
        gs = (1.0 + 0.4 * np.exp(-xs)) ** -2
        metric = MetricProfile.from_samples(xs, gs)
        probe = np.linspace(-3.0, 3.0, 11)
        assert np.max(np.abs(metric.g(probe) - (1.0 + 0.4 * np.exp(-probe)) ** -2)) < 1e-8


class TestEquivalence:
    def test_zero_parameter_paths_identical(self):
        grid = Grid.from_interval(-10.0, 10.0, 2048)
        psi = GaussianState(a=0.5, momentum=0.25).to_wavefunction(grid)
        rep = verify_metric_equivalence(LIN, 0.0, psi, 0.5, dt=2e-4)
        assert rep.fidelity > 1.0 - 1e-10

    def test_expdecay_equivalence(self):
        grid = Grid.from_interval(-4.0, 20.0, 2048)
        psi = GaussianState(a=1.0, center=4.0, momentum=0.5).to_wavefunction(grid)
        rep = verify_metric_equivalence(EXP1, 0.4, psi, 1.0, dt=1e-3)
        assert rep.fidelity > 1.0 - 1e-4
        assert rep.curved_norm_drift < 1e-10

    def test_linear_equivalence_rescaled_kinetic(self):
        # constant metric e^(2 eps): uniformly slower free motion
        grid = Grid.from_interval(-14.0, 14.0, 1024)
        psi = GaussianState(a=1.0, momentum=0.5).to_wavefunction(grid)
        rep = verify_metric_equivalence(LIN, 0.3, psi, 1.0, dt=1e-3)
        assert rep.fidelity > 1.0 - 1e-4


class TestMetricFamily:
    def test_snapshots(self):
        from canonflow.metricmap import MetricFamily
        fam = MetricFamily(g_of_xt=lambda x, t: (1.0 + 0.4 * np.exp(t) * np.exp(-x)) ** -2,
                           name="moving")
        snap = fam.at_time(0.0)
        xs = np.linspace(-2, 2, 7)
        assert np.allclose(snap.g(xs), (1.0 + 0.4 * np.exp(-xs)) ** -2, rtol=1e-13)
        later = fam.at_time(1.0)
        assert np.all(later.g(xs) < snap.g(xs))
