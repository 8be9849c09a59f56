import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowprobe import (
    ConstantField,
    FieldSpec,
    RotationField,
    ScheduleParams,
    adaptive_solve,
    euler_solve,
    exact_endpoint,
    probe,
    schedule_steps,
    sweep_probe_horizon,
)
from flowprobe.errors import ContractViolation
from flowprobe.fields import VectorField

PAPER_DEFAULTS = ScheduleParams(epsilon=0.008, dt_probe=0.5, n_min=2, n_max=10, delta_n=2)


class OppositeField(VectorField):
    """Returns +u at t = 0 and -u elsewhere; the antiparallel probe case."""

    def __init__(self):
        super().__init__(2)
        self.u = np.array([1.0, 0.0])

    def _velocity(self, x, t, c):
        return self.u.copy() if t == 0.0 else -self.u


class TestProbe:
    def test_constant_field_similarity_is_exactly_one(self):
        pr = probe(ConstantField([2.0, 1.0]), [0.3, 0.4], params=PAPER_DEFAULTS)
        assert pr.similarity == 1.0

    def test_rotation_closed_form(self):
        # omega=2, dt=0.5, x0=(1,0): v_start=(0,2), x_probe=(1,1),
        # v_probe=(-2,2), S = 4/(2*2*sqrt(2)) = 1/sqrt(2)
        pr = probe(RotationField(2.0), [1.0, 0.0], params=PAPER_DEFAULTS)
        np.testing.assert_allclose(pr.v_start, [0.0, 2.0], atol=1e-15)
        np.testing.assert_allclose(pr.x_probe, [1.0, 1.0], atol=1e-15)
        np.testing.assert_allclose(pr.v_probe, [-2.0, 2.0], atol=1e-15)
        assert pr.similarity == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-12)

    def test_antiparallel_velocities(self):
        pr = probe(OppositeField(), [0.0, 0.0], params=PAPER_DEFAULTS)
        assert pr.similarity == -1.0

    def test_costs_exactly_two_evaluations(self):
        f = RotationField(1.0)
        probe(f, [1.0, 0.0], params=PAPER_DEFAULTS)
        assert f.nfe == 2

    def test_probe_state_is_linear_extrapolation(self):
        params = ScheduleParams(dt_probe=0.25)
        f = ConstantField([4.0, -2.0])
        pr = probe(f, [1.0, 1.0], params=params)
        np.testing.assert_array_equal(pr.x_probe, [2.0, 0.5])

    def test_zero_velocity_is_degenerate(self):
        pr = probe(ConstantField([0.0, 0.0]), [1.0, 1.0], params=PAPER_DEFAULTS)
        assert pr.similarity == 0.0

    def test_similarity_decreases_with_curvature(self):
        sims = [
            probe(RotationField(w), [1.0, 0.0], params=PAPER_DEFAULTS).similarity
            for w in (0.5, 1.0, 2.0, 4.0)
        ]
        assert all(a > b for a, b in zip(sims, sims[1:]))


class TestScheduleSteps:
    @pytest.mark.parametrize(
        "similarity, expected",
        [(1.0, 2), (0.99, 4), (0.9, 10), (-1.0, 10)],
    )
    def test_paper_default_examples(self, similarity, expected):
        assert schedule_steps(similarity, PAPER_DEFAULTS) == expected

    def test_floor_is_mathematical_floor(self):
        # (1 - 0.984) / 0.008 = 2.0 exactly up to rounding; check neighborhood
        params = PAPER_DEFAULTS
        assert schedule_steps(0.9921, params) == 2
        assert schedule_steps(0.9919, params) == 4

    def test_out_of_range_similarity_rejected(self):
        with pytest.raises(ContractViolation):
            schedule_steps(1.5, PAPER_DEFAULTS)

    @given(s=st.floats(-1.0, 1.0))
    @settings(max_examples=200, deadline=None)
    def test_output_always_within_bounds(self, s):
        n = schedule_steps(s, PAPER_DEFAULTS)
        assert PAPER_DEFAULTS.n_min <= n <= PAPER_DEFAULTS.n_max

    @given(
        s1=st.floats(-1.0, 1.0),
        s2=st.floats(-1.0, 1.0),
        eps=st.floats(1e-4, 1.0),
        delta=st.integers(1, 5),
        nmin=st.integers(2, 6),
        span=st.integers(0, 20),
    )
    @settings(max_examples=300, deadline=None)
    def test_monotone_nonincreasing_in_similarity(self, s1, s2, eps, delta, nmin, span):
        params = ScheduleParams(
            epsilon=eps, n_min=nmin, n_max=nmin + span, delta_n=delta
        )
        lo, hi = min(s1, s2), max(s1, s2)
        assert schedule_steps(lo, params) >= schedule_steps(hi, params)

    def test_huge_epsilon_collapses_to_minimum(self):
        assert schedule_steps(-1.0, ScheduleParams(epsilon=1e6)) == 2

    def test_tiny_epsilon_saturates(self):
        assert schedule_steps(0.999999, ScheduleParams(epsilon=1e-12)) == 10

    def test_params_validation(self):
        with pytest.raises(ContractViolation):
            ScheduleParams(n_min=1)
        with pytest.raises(ContractViolation):
            ScheduleParams(dt_probe=1.0)
        with pytest.raises(ContractViolation):
            ScheduleParams(epsilon=-0.1)
        with pytest.raises(ContractViolation):
            ScheduleParams(n_min=8, n_max=4)


class TestAdaptiveSolve:
    def test_straight_field_takes_bypass(self):
        f = ConstantField([1.0, 0.0])
        r = adaptive_solve(f, [0.0, 0.0], params=PAPER_DEFAULTS)
        np.testing.assert_allclose(r.endpoint, [1.0, 0.0], atol=1e-15)
        assert r.scheduled_n == 2
        assert r.steps_taken == 2
        assert r.nfe == 2
        assert r.probe_similarity == 1.0

    def test_curved_field_takes_dense_route(self):
        # S = 1/sqrt(2) -> floor(0.2929/0.008) = 36 -> clipped to 10
        r = adaptive_solve(RotationField(2.0), [1.0, 0.0], params=PAPER_DEFAULTS)
        assert r.scheduled_n == 10
        assert r.nfe == 11

    def test_dense_route_equals_euler_bitwise(self):
        # omega tuned so S ~ 0.99: floor((1-S)/eps) = 1 -> N = 4
        omega = 0.285
        r_adaptive = adaptive_solve(RotationField(omega), [1.0, 0.0], params=PAPER_DEFAULTS)
        assert r_adaptive.scheduled_n == 4
        assert r_adaptive.nfe == 5
        r_euler = euler_solve(RotationField(omega), [1.0, 0.0], n=4)
        assert r_adaptive.endpoint.tolist() == r_euler.endpoint.tolist()

    def test_dense_route_on_piecewise_field(self):
        spec = FieldSpec(
            "piecewise-curvature",
            {"velocity": [3.0, 0.0], "breakpoints": [0.2], "omega": 2.0},
        )
        r = adaptive_solve(spec.build(), [0.0, 1.0], params=PAPER_DEFAULTS)
        assert r.scheduled_n > 2
        assert r.nfe == r.scheduled_n + 1
        r_euler = euler_solve(spec.build(), [0.0, 1.0], n=r.scheduled_n)
        assert r.endpoint.tolist() == r_euler.endpoint.tolist()

    def test_bypass_reuses_probe_state(self):
        params = ScheduleParams(dt_probe=0.25)
        f = ConstantField([2.0, 2.0])
        r = adaptive_solve(f, [0.0, 0.0], params=params)
        # endpoint = x_probe + v_probe*(1 - dt_probe) = 0.5 + 1.5 = 2.0 each
        np.testing.assert_allclose(r.endpoint, [2.0, 2.0], atol=1e-15)
        assert r.nfe == 2

    def test_report_carries_probe_fields(self):
        r = adaptive_solve(RotationField(1.0), [1.0, 0.0], params=PAPER_DEFAULTS)
        assert r.solver_name == "adaptive"
        assert -1.0 <= r.probe_similarity <= 1.0
        assert r.scheduled_n == r.steps_taken

    def test_step_record_times_increase_to_one(self):
        for field in (ConstantField([1.0, 0.0]), RotationField(3.0)):
            r = adaptive_solve(field, [1.0, 0.0], params=PAPER_DEFAULTS)
            times = [t for t, _, _ in r.step_record]
            assert times[0] == 0.0
            assert times[-1] == 1.0
            assert all(a < b for a, b in zip(times, times[1:]))


class TestNfeAccounting:
    @given(
        omega=st.floats(0.0, 6.0),
        x=st.floats(-2.0, 2.0),
        y=st.floats(-2.0, 2.0),
        eps=st.floats(1e-3, 0.1),
    )
    @settings(max_examples=200, deadline=None)
    def test_two_or_n_plus_one(self, omega, x, y, eps):
        if abs(x) < 1e-6 and abs(y) < 1e-6:
            return  # zero state on a rotation field has degenerate velocity
        params = ScheduleParams(epsilon=eps)
        f = RotationField(omega)
        r = adaptive_solve(f, [x, y], params=params)
        if r.scheduled_n == params.n_min:
            assert r.nfe == 2
        else:
            assert r.nfe == r.scheduled_n + 1
        assert r.nfe == f.nfe

    def test_curvature_accuracy_dominance(self):
        # adaptive never does worse than fixed Euler at n_min on curved fields
        for omega in (0.5, 1.0, 2.0, 4.0):
            spec = FieldSpec("rotation", {"omega": omega})
            x0 = [1.0, 0.0]
            exact = exact_endpoint(spec, x0)
            r_a = adaptive_solve(spec.build(), x0, params=PAPER_DEFAULTS)
            r_e = euler_solve(spec.build(), x0, n=PAPER_DEFAULTS.n_min)
            err_a = np.linalg.norm(r_a.endpoint - exact)
            err_e = np.linalg.norm(r_e.endpoint - exact)
            assert err_a <= err_e


class TestSweepProbeHorizon:
    def test_constant_corpus_is_horizon_independent(self):
        corpus = [FieldSpec("constant", {"velocity": [1.0, 0.5]})]
        rows = sweep_probe_horizon(corpus, [0.1, 0.5, 0.9], runs=5, seed=0)
        for row in rows:
            assert row.mean_steps == 2.0
            assert row.failure_rate == 0.0

    def test_myopic_probe_schedules_fewer_steps(self):
        corpus = [FieldSpec("rotation", {"omega": w}) for w in (1.5, 2.5, 4.0)]
        rows = sweep_probe_horizon(corpus, [0.1, 0.5], runs=10, seed=1)
        assert rows[0].mean_steps <= rows[1].mean_steps

    def test_long_horizon_schedules_more_steps_on_piecewise(self):
        corpus = [
            FieldSpec(
                "piecewise-curvature",
                {"velocity": [1.5, 0.5], "breakpoints": [b], "omega": 0.8},
            )
            for b in (0.55, 0.65, 0.75)
        ]
        rows = sweep_probe_horizon(corpus, [0.5, 0.9], runs=10, seed=2)
        assert rows[1].mean_steps >= rows[0].mean_steps

    def test_single_row_schema(self):
        corpus = [FieldSpec("constant", {"velocity": [1.0, 0.0]})]
        rows = sweep_probe_horizon(corpus, [0.5], runs=3, seed=0)
        assert len(rows) == 1
        row = rows[0]
        assert row.dt_probe == 0.5
        assert {"dt_probe", "mean_steps", "mean_error", "failure_rate"} <= set(
            row.__dict__
        )

    def test_rejects_empty_inputs(self):
        with pytest.raises(ContractViolation):
            sweep_probe_horizon([], [0.5])
        with pytest.raises(ContractViolation):
            sweep_probe_horizon([FieldSpec("constant", {"velocity": [1.0]})], [])
