"""Tests for class-K functions and their decay and growth flows."""

import math

import numpy as np
import pytest

from cbvf.core.classk import (
    ClassKSpec,
    KLFlow,
    alpha_eval,
    alpha_slope_bound,
    beta_comparison_bound,
    beta_eval,
    bundled_alphas,
    escape_time,
    kappa_eval,
)
from cbvf.core.errors import DomainError, KappaBlowupError
from cbvf.utils.sampling import Lcg64

SAMPLES = 1000
BUNDLED = sorted(bundled_alphas())


def _draw(seed: int, lo: float, hi: float) -> np.ndarray:
    return lo + (hi - lo) * Lcg64(seed).uniforms(SAMPLES)


class TestClassKSpec:
    """Tests for ClassKSpec construction and serialization."""

    def test_linear(self):
        """Test a linear spec evaluates gamma * r."""
        spec = ClassKSpec.linear(3.0)
        assert alpha_eval(spec, 2.0) == pytest.approx(6.0)
        assert spec.has_closed_form

    def test_power(self):
        """Test a power spec evaluates c * r**p."""
        spec = ClassKSpec.power(2.0, 3.0)
        assert alpha_eval(spec, 2.0) == pytest.approx(16.0)

    def test_table_interpolates_and_extrapolates(self):
        """Test a table is piecewise linear and continues with its last slope."""
        spec = ClassKSpec.table([(0, 0), (1, 1), (2, 4)])
        assert alpha_eval(spec, 0.5) == pytest.approx(0.5)
        assert alpha_eval(spec, 1.5) == pytest.approx(2.5)
        assert alpha_eval(spec, 3.0) == pytest.approx(7.0)
        assert not spec.has_closed_form

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"kind": "linear", "gamma": 0.0},
            {"kind": "power", "c": -1.0},
            {"kind": "power", "p": 0.5},
            {"kind": "table", "points": ((0.0, 0.0),)},
            {"kind": "table", "points": ((0.5, 0.0), (1.0, 1.0))},
            {"kind": "table", "points": ((0.0, 0.0), (1.0, 1.0), (2.0, 1.0))},
            {"kind": "sigmoid"},
        ],
    )
    def test_invalid_specs(self, kwargs):
        """Test invalid parameters are rejected."""
        with pytest.raises(ValueError):
            ClassKSpec(**kwargs)

    def test_serialization(self):
        """Test serialization."""
        spec = ClassKSpec.table([(0, 0), (1, 2), (3, 5)], lipschitz_hint=2.0)
        data = spec.to_dict()
        restored = ClassKSpec.from_dict(data)

        assert data["kind"] == "table"
        assert restored == spec

    def test_negative_input_rejected(self):
        """Test α refuses negative arguments."""
        with pytest.raises(DomainError):
            alpha_eval(ClassKSpec.linear(), -0.1)

    def test_vectorized(self):
        """Test α evaluates arrays element-wise."""
        out = alpha_eval(ClassKSpec.power(), np.array([0.0, 1.0, 2.0]))
        np.testing.assert_allclose(out, [0.0, 1.0, 4.0])


class TestDecayFlow:
    """Tests for beta_eval."""

    def test_linear_closed_form(self):
        """Test β(1, ln 2) = 0.5 for α(r) = r."""
        assert beta_eval(ClassKSpec.linear(), 1.0, math.log(2.0)) == pytest.approx(0.5)

    def test_quadratic_closed_form(self):
        """Test β(1, 1) = 0.5 for α(r) = r²."""
        assert beta_eval(ClassKSpec.power(1.0, 2.0), 1.0, 1.0) == pytest.approx(0.5)

    def test_table_matches_linear(self):
        """Test a table through α(r) = r integrates to e^{-1}."""
        spec = ClassKSpec.table([(0, 0), (1, 1), (10, 10)])
        assert beta_eval(spec, 1.0, 1.0) == pytest.approx(math.exp(-1.0), abs=1e-4)

    def test_zero_stays_zero(self):
        """Test β(0, t) = 0."""
        for spec in bundled_alphas().values():
            assert beta_eval(spec, 0.0, 3.0) == 0.0

    def test_zero_time(self):
        """Test β(r, 0) = r."""
        for spec in bundled_alphas().values():
            assert beta_eval(spec, 2.5, 0.0) == pytest.approx(2.5)

    def test_negative_time_rejected(self):
        """Test negative times are rejected."""
        with pytest.raises(DomainError):
            beta_eval(ClassKSpec.linear(), 1.0, -1.0)

    def test_batch_matches_single(self):
        """Test batched evaluation reproduces element-wise results exactly."""
        spec = bundled_alphas()["quadratic_table"]
        r = np.array([0.3, 2.0, 7.5])
        t = np.array([0.25, 1.0, 0.004])
        batch = beta_eval(spec, r, t)
        single = [beta_eval(spec, ri, ti) for ri, ti in zip(r, t)]
        assert list(batch) == single

    def test_returns_float_for_scalars(self):
        """Test scalar arguments give a float."""
        assert isinstance(beta_eval(ClassKSpec.linear(), 1.0, 1.0), float)

    def test_flow_object(self):
        """Test KLFlow reports its integration mode and matches beta_eval."""
        table = bundled_alphas()["quadratic_table"]
        flow = KLFlow(table)

        assert not flow.closed_form
        assert flow.ode_step == table.ode_step
        assert KLFlow(ClassKSpec.linear()).closed_form
        assert flow(1.5, 0.5) == beta_eval(table, 1.5, 0.5)
        assert KLFlow(table, "growth")(0.5, 0.1) == kappa_eval(table, 0.5, 0.1)


class TestGrowthFlow:
    """Tests for kappa_eval and escape_time."""

    def test_linear_closed_form(self):
        """Test κ(1, ln 2) = 2 for α(r) = r."""
        assert kappa_eval(ClassKSpec.linear(), 1.0, math.log(2.0)) == pytest.approx(2.0)

    def test_quadratic_closed_form(self):
        """Test κ(1, 0.5) = 2 for α(r) = r²."""
        assert kappa_eval(ClassKSpec.power(1.0, 2.0), 1.0, 0.5) == pytest.approx(2.0)

    def test_quadratic_blowup(self):
        """Test κ(1, 1) blows up with escape time 1 for α(r) = r²."""
        with pytest.raises(KappaBlowupError) as exc:
            kappa_eval(ClassKSpec.power(1.0, 2.0), 1.0, 1.0)
        assert exc.value.escape_time == pytest.approx(1.0)

    def test_linear_ceiling(self):
        """Test exponential growth past the ceiling is reported."""
        with pytest.raises(KappaBlowupError):
            kappa_eval(ClassKSpec.linear(), 1.0, 100.0)

    def test_escape_times(self):
        """Test escape times of the closed-form kinds."""
        assert escape_time(ClassKSpec.linear(), 5.0) == math.inf
        assert escape_time(ClassKSpec.power(1.0, 2.0), 2.0) == pytest.approx(0.5)
        assert escape_time(ClassKSpec.power(1.0, 2.0), 0.0) == math.inf


class TestBounds:
    """Tests for slope and comparison bounds."""

    def test_comparison_linear(self):
        """Test α(r)/r ≡ γ for a linear spec."""
        assert beta_comparison_bound(ClassKSpec.linear(3.0), 100.0) == pytest.approx(3.0)

    def test_comparison_power(self):
        """Test sup r over [0, 2] for α(r) = r²."""
        assert beta_comparison_bound(ClassKSpec.power(1.0, 2.0), 2.0) == pytest.approx(2.0)

    def test_comparison_saturating_table(self):
        """Test the sampled bound for α(r) = min(r, 1)."""
        spec = ClassKSpec.table([(0, 0), (1, 1), (100, 1.0 + 1e-6)])
        assert beta_comparison_bound(spec, 5.0) == pytest.approx(1.0)

    def test_comparison_uses_hint(self):
        """Test a lipschitz hint takes precedence."""
        spec = ClassKSpec.power(1.0, 2.0, lipschitz_hint=7.0)
        assert beta_comparison_bound(spec, 2.0) == 7.0

    def test_comparison_rejects_nonpositive_radius(self):
        """Test R must be positive."""
        with pytest.raises(DomainError):
            beta_comparison_bound(ClassKSpec.linear(), 0.0)

    def test_slope_bounds(self):
        """Test α' bounds per kind."""
        assert alpha_slope_bound(ClassKSpec.linear(2.0), 5.0) == 2.0
        assert alpha_slope_bound(ClassKSpec.power(1.0, 2.0), 3.0) == pytest.approx(6.0)
        table = ClassKSpec.table([(0, 0), (1, 1), (2, 4)])
        assert alpha_slope_bound(table, 0.5) == pytest.approx(1.0)
        assert alpha_slope_bound(table, 5.0) == pytest.approx(3.0)


@pytest.mark.parametrize("name", BUNDLED)
class TestFlowProperties:
    """Identities every bundled α must satisfy on sampled arguments."""

    def test_semigroup(self, name):
        """Test β(β(r, s), t) = β(r, s + t)."""
        spec = bundled_alphas()[name]
        r, s, t = _draw(1, 0.0, 10.0), _draw(2, 0.0, 5.0), _draw(3, 0.0, 5.0)

        chained = beta_eval(spec, beta_eval(spec, r, s), t)
        direct = beta_eval(spec, r, s + t)

        np.testing.assert_allclose(chained, direct, rtol=1e-6, atol=1e-6)

    def test_decay_derivative(self, name):
        """Test ∂_t β = −α(β) and ∂_r β = α(β)/α(r)."""
        spec = bundled_alphas()[name]
        r, t = _draw(4, 0.1, 10.0), _draw(5, 0.01, 5.0)
        eps = 1e-3
        beta = np.asarray(beta_eval(spec, r, t))
        rate = np.asarray(spec(beta))

        d_t = (beta_eval(spec, r, t + eps) - beta_eval(spec, r, t - eps)) / (2 * eps)
        d_r = (beta_eval(spec, r + eps, t) - beta_eval(spec, r - eps, t)) / (2 * eps)

        np.testing.assert_allclose(d_t, -rate, rtol=1e-3, atol=1e-9)
        np.testing.assert_allclose(d_r, rate / spec(r), rtol=1e-3, atol=1e-9)

    def test_growth_derivative(self, name):
        """Test ∂_t κ = α(κ) and ∂_r κ = α(κ)/α(r) before the escape time."""
        spec = bundled_alphas()[name]
        r = _draw(6, 0.1, 10.0)
        t = _draw(7, 0.05, 0.5) / r
        eps_t, eps_r = 0.01 * t, 1e-3 * r
        kappa = np.asarray(kappa_eval(spec, r, t))
        rate = np.asarray(spec(kappa))

        d_t = (kappa_eval(spec, r, t + eps_t) - kappa_eval(spec, r, t - eps_t)) / (2 * eps_t)
        d_r = (kappa_eval(spec, r + eps_r, t) - kappa_eval(spec, r - eps_r, t)) / (2 * eps_r)

        np.testing.assert_allclose(d_t, rate, rtol=1e-3)
        np.testing.assert_allclose(d_r, rate / spec(r), rtol=1e-3)

    def test_inverse_identity(self, name):
        """Test β(κ(r, t), t) = r."""
        spec = bundled_alphas()[name]
        r = _draw(8, 0.0, 10.0)
        t = _draw(9, 0.0, 0.5) / np.maximum(r, 0.1)

        restored = beta_eval(spec, kappa_eval(spec, r, t), t)

        np.testing.assert_allclose(restored, r, rtol=1e-5, atol=1e-5)

    def test_comparison_bound(self, name):
        """Test β(r, t) >= r·e^{−Lt} on [0, R]."""
        spec = bundled_alphas()[name]
        R = 10.0
        lipschitz = beta_comparison_bound(spec, R)
        r, t = _draw(10, 0.0, R), _draw(11, 0.0, 10.0)

        beta = np.asarray(beta_eval(spec, r, t))

        assert np.all(beta >= r * np.exp(-lipschitz * t) - 1e-9)

    def test_monotonicity(self, name):
        """Test β is strictly increasing in r and non-increasing in t."""
        spec = bundled_alphas()[name]
        r = np.unique(_draw(12, 0.01, 10.0))
        t = np.unique(_draw(13, 0.0, 5.0))

        in_r = np.asarray(beta_eval(spec, r, 1.0))
        in_t = np.asarray(beta_eval(spec, 2.0, t))

        assert np.all(np.diff(in_r) > 0)
        assert np.all(np.diff(in_t) <= 1e-9)
