"""Tests for the scaling-flow core: closed forms, adaptive path, brackets."""

import numpy as np
import pytest
import sympy as sp

from canonflow.errors import DomainBlowup
from canonflow.flowcore import (GeneratorSpec, bracket_generator,
                                conjugation_factor, flow_evaluate,
                                flow_jacobian, flow_map)

LIN = GeneratorSpec.linear()
QUAD = GeneratorSpec.quadratic()
EXP1 = GeneratorSpec.exp_decay(1.0)


def custom_twin(kind):
    """The same generator routed through the adaptive (non-closed-form) path."""
    table = {
        "linear": lambda t: t,
        "quadratic": lambda t: t * t,
        "exp_decay": lambda t: np.exp(-t),
    }
    return GeneratorSpec.custom(table[kind], name=f"{kind} twin")


class TestClosedForms:
    def test_linear_map(self):
        # x' = e^eps x
        assert flow_map(LIN, 0.5, 2.0) == pytest.approx(3.2974425414002564, abs=1e-12)

    def test_quadratic_map(self):
        # x' = x / (1 - eps x)
        assert flow_map(QUAD, 0.25, 2.0) == pytest.approx(4.0, abs=1e-12)

    def test_expdecay_map(self):
        # x' = ln(e^x + eps) for unit rate
        assert flow_map(EXP1, 0.5, 0.0) == pytest.approx(0.4054651081081644, abs=1e-12)

    @pytest.mark.parametrize("gen,x", [(LIN, 1.3), (QUAD, -0.7), (EXP1, 0.4)])
    def test_zero_parameter_is_identity(self, gen, x):
        assert flow_map(gen, 0.0, x) == x
        assert flow_jacobian(gen, 0.0, x) == pytest.approx(1.0, abs=1e-15)

    def test_linear_weight(self):
        # w = e^-eps, independent of x
        for x in (-2.0, 0.0, 1.7):
            assert conjugation_factor(LIN, 0.5, x) == pytest.approx(
                0.6065306597126334, abs=1e-12)

    def test_quadratic_weight(self):
        # w = (1 - eps x)^2
        assert conjugation_factor(QUAD, 0.25, 2.0) == pytest.approx(0.25, abs=1e-12)

    def test_expdecay_weight_matches_flow_oracle(self):
        # oracle: w = f(x)/f(phi) with phi integrated independently
        from scipy.integrate import solve_ivp
        sol = solve_ivp(lambda s, y: np.exp(-y), (0, 0.5), [0.0],
                        rtol=1e-12, atol=1e-14)
        phi = sol.y[0, -1]
        oracle = np.exp(-0.0) / np.exp(-phi)
        assert oracle == pytest.approx(1.5, abs=1e-9)
        assert conjugation_factor(EXP1, 0.5, 0.0) == pytest.approx(1.5, abs=1e-12)

    def test_linear_jacobian(self):
        assert flow_jacobian(LIN, 0.5, 1.0) == pytest.approx(
            1.6487212707001282, abs=1e-12)

    def test_quadratic_jacobian_finite_difference_oracle(self):
        h = 1e-6
        fd = (flow_map(QUAD, 0.25, 2.0 + h) - flow_map(QUAD, 0.25, 2.0 - h)) / (2 * h)
        assert fd == pytest.approx(4.0, abs=1e-6)
        assert flow_jacobian(QUAD, 0.25, 2.0) == pytest.approx(4.0, abs=1e-12)


class TestFlowProperties:
    @pytest.mark.parametrize("kind,gen", [("linear", LIN), ("quadratic", QUAD),
                                          ("exp_decay", EXP1)])
    def test_group_law(self, kind, gen):
        rng = np.random.default_rng(3)
        x = rng.uniform(-1.5, 1.5, 50)
        e1, e2 = 0.12, 0.08
        once = flow_map(gen, e1 + e2, x)
        twice = flow_map(gen, e2, flow_map(gen, e1, x))
        assert np.max(np.abs(once - twice)) < 1e-9

    def test_group_law_custom(self):
        gen = GeneratorSpec.custom(lambda t: np.sin(t) + 1.5, name="sin+1.5")
        rng = np.random.default_rng(4)
        x = rng.uniform(-2.0, 2.0, 20)
        once = flow_map(gen, 0.5, x)
        twice = flow_map(gen, 0.3, flow_map(gen, 0.2, x))
        assert np.max(np.abs(once - twice)) < 1e-7

    @pytest.mark.parametrize("gen,eps,x", [(LIN, 0.4, 1.1), (QUAD, 0.2, 1.5),
                                           (EXP1, 0.6, -0.5)])
    def test_inversion(self, gen, eps, x):
        assert flow_map(gen, -eps, flow_map(gen, eps, x)) == pytest.approx(x, abs=1e-9)

    @pytest.mark.parametrize("kind", ["linear", "quadratic", "exp_decay"])
    def test_canonicality_closed(self, kind):
        rng = np.random.default_rng(11)
        gen = {"linear": LIN, "quadratic": QUAD, "exp_decay": EXP1}[kind]
        x = rng.uniform(-1.5, 1.5, 100)
        eps = rng.uniform(0.02, 0.3, 100)
        ev = flow_evaluate(gen, eps, x)
        assert np.max(np.abs(ev.f2 * ev.jacobian - 1.0)) < 1e-12

    @pytest.mark.parametrize("kind", ["linear", "quadratic", "exp_decay"])
    def test_canonicality_adaptive(self, kind):
        # the Jacobian comes from the variational equation, the weight from
        # f(x)/f(phi); their product tests both routes at once
        rng = np.random.default_rng(12)
        x = rng.uniform(-1.5, 1.5, 60)
        eps = rng.uniform(0.02, 0.3, 60)
        ev = flow_evaluate(custom_twin(kind), eps, x)
        assert np.max(np.abs(ev.f2 * ev.jacobian - 1.0)) < 1e-8

    @pytest.mark.parametrize("kind", ["linear", "quadratic", "exp_decay"])
    def test_adaptive_matches_closed(self, kind):
        gen = {"linear": LIN, "quadratic": QUAD, "exp_decay": EXP1}[kind]
        rng = np.random.default_rng(13)
        x = rng.uniform(-1.5, 1.5, 100)
        eps = rng.uniform(-0.1, 0.3, 100)
        if kind == "exp_decay":
            keep = np.exp(x) + eps > 0.1
            x, eps = x[keep], eps[keep]
        closed = flow_map(gen, eps, x)
        adaptive = flow_map(custom_twin(kind), eps, x)
        assert np.max(np.abs(closed - adaptive)) < 1e-8

    def test_fixed_point_limits(self):
        # at a zero of f the weight tends to exp(-eps f')
        ev = flow_evaluate(GeneratorSpec.custom(lambda t: t, name="x"), 0.5, 0.0)
        assert ev.f2 == pytest.approx(np.exp(-0.5), abs=1e-9)
        assert ev.jacobian == pytest.approx(np.exp(0.5), abs=1e-9)


class TestDomains:
    def test_quadratic_blowup(self):
        with pytest.raises(DomainBlowup):
            flow_map(QUAD, 0.5, 2.0)

    def test_quadratic_blowup_negative_side(self):
        with pytest.raises(DomainBlowup):
            flow_map(QUAD, -0.5, -2.0)

    def test_expdecay_domain(self):
        with pytest.raises(DomainBlowup):
            flow_map(EXP1, -0.5, -1.0)   # e^x + eps < 0

    def test_custom_escape_detected(self):
        with pytest.raises(DomainBlowup):
            flow_map(GeneratorSpec.custom(lambda t: t * t, name="x^2"), 0.5, 2.5)

    def test_custom_validity_interval(self):
        gen = GeneratorSpec.custom(lambda t: 1.0 + 0.0 * t, domain=(-1.0, 1.0))
        with pytest.raises(DomainBlowup):
            flow_map(gen, 0.0, 3.0)
        with pytest.raises(DomainBlowup):
            flow_map(gen, 5.0, 0.0)      # constant drift exits the interval

    def test_exp_decay_requires_positive_rate(self):
        with pytest.raises(ValueError):
            GeneratorSpec.exp_decay(-1.0)


class TestBracketGenerator:
    @staticmethod
    def _symbolic_h(f1_expr, f2_expr):
        # oracle: h = 2 f1^2 d/dx (f2 / f1), simplified symbolically
        x = sp.symbols("x")
        h = sp.simplify(2 * f1_expr ** 2 * sp.diff(f2_expr / f1_expr, x))
        return sp.lambdify(x, h, "numpy")

    def test_linear_quadratic(self):
        x = sp.symbols("x")
        oracle = self._symbolic_h(x, x ** 2)
        h = bracket_generator(LIN, QUAD)
        xs = np.linspace(-2, 2, 9)
        assert np.allclose(h(xs), oracle(xs), atol=1e-12)
        assert np.allclose(h(xs), 2.0 * xs ** 2, atol=1e-12)

    def test_equal_generators_vanish(self):
        h = bracket_generator(QUAD, QUAD)
        assert np.allclose(h(np.linspace(-3, 3, 7)), 0.0, atol=1e-14)

    def test_linear_constant(self):
        x = sp.symbols("x")
        oracle = self._symbolic_h(x, sp.Integer(1))
        one = GeneratorSpec.custom(
            lambda t: np.ones_like(np.asarray(t, dtype=float)),
            dfunc=lambda t: np.zeros_like(np.asarray(t, dtype=float)), name="1")
        h = bracket_generator(LIN, one)
        xs = np.linspace(-2, 2, 5)
        assert np.allclose(h(xs), float(oracle(1.0)) * np.ones_like(xs), atol=1e-12)
        assert np.allclose(h(xs), -2.0, atol=1e-12)

    def test_expdecay_pair_symbolic(self):
        x = sp.symbols("x")
        oracle = self._symbolic_h(x ** 2, sp.exp(-x))
        h = bracket_generator(QUAD, EXP1)
        xs = np.linspace(-1.5, 2.0, 11)
        assert np.allclose(h(xs), oracle(xs), rtol=1e-9)
