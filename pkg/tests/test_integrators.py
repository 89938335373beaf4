import warnings

import numpy as np
import pytest

from volterra_poisson import (
    IntegrationError,
    LatticeState,
    PositivityLossWarning,
    SingularStepError,
    SplitState,
    StepMethod,
    adjoint_symplectic_euler_step,
    implicit_midpoint_step,
    initial_state,
    integrate,
    invariants,
    lobatto3ab2_residuals,
    lobatto3ab2_stages,
    lobatto3ab2_step,
    merge,
    n_steps,
    rk4_step,
    split,
    step,
    symplectic_euler_step,
)
from volterra_poisson.integrators import _midpoint

S4 = SplitState([1.0, 3.0], [2.0, 4.0])
SPLIT_STEPS = [symplectic_euler_step, adjoint_symplectic_euler_step, lobatto3ab2_step]


def reference(state, h, substeps=100):
    y = state
    for _ in range(substeps):
        y = rk4_step(y, h / substeps)
    return y.y


def local_orders(method, state, hs=(0.1, 0.05, 0.025)):
    errs = [np.linalg.norm(step(method, state, h).y - reference(state, h)) for h in hs]
    return [np.log2(a / b) for a, b in zip(errs, errs[1:])]


class TestSymplecticEuler:
    def test_m4_hand_values(self):
        out = symplectic_euler_step(S4, 0.1)
        np.testing.assert_allclose(out.v, [2.5, 4.0 / 1.2], rtol=1e-15)
        np.testing.assert_allclose(out.u, [1.0 + 0.1 * (2.5 - 4.0 / 1.2), 3.0 * (1.0 + 0.1 * (4.0 / 1.2 - 2.5))],
                                   rtol=1e-15)
        np.testing.assert_allclose(out.u, [0.9166667, 3.25], atol=1e-7)
        assert out.t == pytest.approx(0.1)

    def test_m4_conserves_h1(self):
        out = symplectic_euler_step(S4, 0.1)
        assert out.u.sum() + out.v.sum() == pytest.approx(10.0, abs=1e-14)

    def test_satisfies_implicit_equations(self, states):
        for s in map(split, states(20, 10)):
            out = symplectic_euler_step(s, 0.1)
            h = 0.1
            np.testing.assert_allclose(out.v, s.v + h * out.v * (np.roll(s.u, -1) - s.u), rtol=1e-14)
            np.testing.assert_allclose(out.u, s.u + h * s.u * (out.v - np.roll(out.v, 1)), rtol=1e-14)

    def test_singular_denominator(self):
        # 1 - h (u_2 - u_1) = 0 for h = 0.5, u = (1, 3)
        with pytest.raises(SingularStepError):
            symplectic_euler_step(S4, 0.5)


class TestAdjoint:
    def test_inverts_negative_step(self, states):
        for s in map(split, states(20, 20)):
            back = adjoint_symplectic_euler_step(symplectic_euler_step(s, -0.1), 0.1)
            np.testing.assert_allclose(back.u, s.u, atol=1e-13)
            np.testing.assert_allclose(back.v, s.v, atol=1e-13)

    def test_composition_equals_lobatto(self, states):
        # adjoint(h/2) o se(h/2); the reverse order does not match
        for s in map(split, states(20, 50)):
            lob = lobatto3ab2_step(s, 0.1)
            comp = adjoint_symplectic_euler_step(symplectic_euler_step(s, 0.05), 0.05)
            np.testing.assert_allclose(comp.u, lob.u, rtol=0, atol=1e-12)
            np.testing.assert_allclose(comp.v, lob.v, rtol=0, atol=1e-12)
        rev = symplectic_euler_step(adjoint_symplectic_euler_step(s, 0.05), 0.05)
        assert np.max(np.abs(rev.u - lob.u)) > 1e-6


class TestLobatto:
    def test_m4_conserves_h1(self):
        out = lobatto3ab2_step(S4, 0.1)
        assert abs(out.u.sum() + out.v.sum() - 10.0) <= 1e-14

    def test_constant_state_zero_stages(self):
        s = SplitState(np.full(4, 1.3), np.full(4, 1.3))
        for stage in lobatto3ab2_stages(s, 0.1):
            assert not stage.any()

    def test_stage_residuals(self, states):
        for m in (4, 6, 20):
            for s in map(split, states(m, 20)):
                assert max(lobatto3ab2_residuals(s, 0.1)) <= 1e-13

    def test_symmetric(self, states):
        """100 steps forward then 100 with -h return to the start."""
        s0 = split(states(20, 1)[0])
        s = s0
        for _ in range(100):
            s = lobatto3ab2_step(s, 0.1)
        for _ in range(100):
            s = lobatto3ab2_step(s, -0.1)
        np.testing.assert_allclose(s.u, s0.u, atol=1e-11)
        np.testing.assert_allclose(s.v, s0.v, atol=1e-11)

    def test_local_order(self, states):
        for s in states(6, 5):
            for p in local_orders(StepMethod.LOBATTO3AB2, s):
                assert 2.7 <= p <= 3.3


class TestMidpoint:
    def test_local_order(self, states):
        for s in states(6, 5):
            for p in local_orders(StepMethod.IMPLICIT_MIDPOINT, s):
                assert 2.7 <= p <= 3.3

    def test_solves_equation(self, states):
        for s in states(20, 10):
            out = implicit_midpoint_step(s, 0.1).y
            mid = 0.5 * (s.y + out)
            res = out - s.y - 0.1 * mid * (np.roll(mid, -1) - np.roll(mid, 1))
            assert np.max(np.abs(res)) <= 1e-14 * 2.0

    def test_conserves_quadratic_forms_of_linear_system(self, rng):
        # rotation flow z' = A z with A skew preserves |z|^2; midpoint keeps it to solver tolerance
        A = rng.normal(size=(6, 6))
        A = A - A.T
        z = rng.normal(size=6)
        q0 = z @ z
        h = 0.05
        M = np.linalg.solve(np.eye(6) - 0.5 * h * A, np.eye(6) + 0.5 * h * A)
        for _ in range(1000):
            z = M @ z
        assert abs(z @ z - q0) <= 1e-12 * q0

    def test_newton_fallback_converges(self, states):
        y = np.array(states(6, 1)[0].y)
        # at h = 1 the fixed-point map is not contractive here; Newton takes over
        z = _midpoint(y, 1.0)
        mid = 0.5 * (y + z)
        assert np.max(np.abs(z - y - mid * (np.roll(mid, -1) - np.roll(mid, 1)))) <= 1e-13


class TestRK4:
    def test_local_order(self, states):
        for s in states(6, 5):
            for p in local_orders(StepMethod.RK4, s):
                assert 4.6 <= p <= 5.4


class TestAllMethods:
    @pytest.mark.parametrize("method", list(StepMethod))
    def test_constant_state_fixed_point(self, method):
        s = LatticeState(np.full(8, 1.25))
        assert np.array_equal(step(method, s, 0.1).y, s.y)

    @pytest.mark.parametrize("fn", SPLIT_STEPS)
    def test_split_constant_fixed_point(self, fn):
        s = SplitState(np.full(4, 0.7), np.full(4, 0.7))
        out = fn(s, 0.1)
        assert np.array_equal(out.u, s.u) and np.array_equal(out.v, s.v)

    @pytest.mark.parametrize("method", list(StepMethod))
    def test_h1_exact_per_step(self, method, states):
        for m in (4, 20):
            for s in states(m, 10):
                h1 = s.y.sum()
                assert abs(step(method, s, 0.1).y.sum() - h1) <= 1e-14 * h1

    @pytest.mark.parametrize("method", list(StepMethod))
    def test_step_matches_split_wrapper(self, method, states):
        s = states(8, 1)[0]
        out = step(method, s, 0.1)
        assert out.t == pytest.approx(0.1)
        fn = {StepMethod.SYMPLECTIC_EULER: symplectic_euler_step,
              StepMethod.ADJOINT_SYMPLECTIC_EULER: adjoint_symplectic_euler_step,
              StepMethod.LOBATTO3AB2: lobatto3ab2_step}.get(method)
        if fn is not None:
            np.testing.assert_array_equal(merge(fn(split(s), 0.1)).y, out.y)

    def test_positivity_warning(self):
        s = LatticeState([1.0, 4.0, 0.1, 2.0])
        with pytest.warns(PositivityLossWarning):
            out = rk4_step(s, 2.0)
        assert not out.positive


class TestIntegrate:
    def test_record_count(self):
        traj = integrate(initial_state(20), "se", 0.1, 1.0)
        assert len(traj) == 11
        assert traj.t[-1] == pytest.approx(1.0)
        assert np.all(np.diff(traj.t) > 0)

    def test_stride(self):
        traj = integrate(initial_state(20), "rk4", 0.1, 2.0, record_stride=4)
        assert len(traj) == 1 + 20 // 4
        np.testing.assert_allclose(np.diff(traj.t), 0.4)
        assert traj.final_state.t == pytest.approx(2.0)

    def test_step_count_rounding(self):
        assert n_steps(2000.0, 0.1) == 20000
        assert n_steps(2000.0, 0.05) == 40000
        assert n_steps(1.0, 0.3) == 4

    def test_records_view(self):
        s = initial_state(8)
        traj = integrate(s, "lobatto2", 0.1, 0.5)
        rec = traj.records
        assert rec[0] == pytest.approx(invariants(s))  # dataclass equality on floats
        assert rec[0].h1 == invariants(s).h1

    def test_final_state_matches_steps(self):
        s = initial_state(8)
        y = s
        for _ in range(5):
            y = step("se", y, 0.1)
        np.testing.assert_array_equal(integrate(s, "se", 0.1, 0.5).final_state.y, y.y)

    @pytest.mark.parametrize("method", list(StepMethod))
    def test_deterministic(self, method):
        a = integrate(initial_state(20), method, 0.1, 5.0)
        b = integrate(initial_state(20), method, 0.1, 5.0)
        for name in ("t", "h1", "h0", "iq", "ic"):
            assert np.array_equal(getattr(a, name), getattr(b, name))

    def test_step_index_attached(self):
        s = LatticeState([1.0, 2.0, 3.0, 4.0])
        with pytest.raises(IntegrationError) as info:
            integrate(s, "se", 0.5, 2.0)
        assert info.value.step_index == 1
        assert "step 1" in str(info.value)

    def test_positivity_loss_records_nan(self):
        s = LatticeState([1.0, 4.0, 0.1, 2.0])
        with pytest.warns(PositivityLossWarning):
            traj = integrate(s, "rk4", 2.0, 2.0)
        assert traj.positivity_lost_at is not None
        assert np.isnan(traj.h0[-1])

    @pytest.mark.parametrize("bad", [dict(h=0.0), dict(h=-1.0), dict(t_end=0.0), dict(record_stride=0)])
    def test_bad_arguments(self, bad):
        kw = dict(h=0.1, t_end=1.0, record_stride=1) | bad
        with pytest.raises(ValueError):
            integrate(initial_state(8), "se", **kw)


@pytest.mark.slow
class TestLongRun:
    @pytest.fixture(scope="class")
    @staticmethod
    def runs():
        y0 = initial_state(20)
        return {me: integrate(y0, me, 0.1, 2000.0)
                for me in (StepMethod.SYMPLECTIC_EULER, StepMethod.LOBATTO3AB2, StepMethod.RK4)}

    def test_h1_drift(self, runs):
        for traj in runs.values():
            assert np.max(np.abs(traj.errors("H1"))) <= 1e-13

    def test_no_secular_growth(self, runs):
        # [0, 2000] max vs [0, 200] max; thresholds frozen after measuring
        # ~1.03 (SE), ~1.05 (Lobatto), ~9.9 (RK4, linear drift)
        early = runs[StepMethod.SYMPLECTIC_EULER].t <= 200.0
        for me, traj in runs.items():
            for w in ("H0", "Iq", "Ic"):
                d = np.abs(traj.errors(w))
                ratio = d.max() / d[early].max()
                if me is StepMethod.RK4:
                    assert ratio > 5.0
                else:
                    assert ratio <= 20.0
