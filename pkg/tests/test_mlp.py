import numpy as np
import pytest

from flowprobe import (
    MlpField,
    TrainingConfig,
    fm_loss,
    fm_loss_and_grads,
    load_weights,
    probe,
    sample_batch,
    sample_pair,
    save_weights,
    train,
)
from flowprobe.errors import (
    ContractViolation,
    TrainingDiverged,
    WeightFormatError,
    WeightSchemaError,
)
from flowprobe.mlp import (
    SINGLE_POINT_TARGET,
    TWO_GAUSSIAN_MEANS,
    TWO_GAUSSIAN_SIGMA,
    ot_pairing,
)


class TestSamplePair:
    def test_single_point_target_is_degenerate(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            _, x1 = sample_pair("single-point", rng)
            np.testing.assert_array_equal(x1, SINGLE_POINT_TARGET)

    def test_two_gaussians_land_near_a_mean(self):
        # P(outside 4 sigma) = exp(-8) ~ 3.4e-4 per draw for a 2-D gaussian,
        # so out of 1e4 draws P(more than 20 outliers) is astronomically small
        rng = np.random.default_rng(1)
        _, x1 = sample_batch("two-gaussians", 10**4, rng)
        d = np.minimum(
            np.linalg.norm(x1 - TWO_GAUSSIAN_MEANS[0], axis=1),
            np.linalg.norm(x1 - TWO_GAUSSIAN_MEANS[1], axis=1),
        )
        assert np.mean(d < 4 * TWO_GAUSSIAN_SIGMA) >= 0.998

    def test_noise_is_standard_normal(self):
        rng = np.random.default_rng(2)
        x0, _ = sample_batch("two-moons", 10**4, rng)
        assert abs(x0.mean()) < 0.05
        assert abs(x0.std() - 1.0) < 0.05

    def test_fixed_seed_reproduces_sequence(self):
        a = [sample_pair("two-gaussians", np.random.default_rng(7)) for _ in range(1)]
        pairs1 = []
        rng = np.random.default_rng(7)
        for _ in range(5):
            pairs1.append(sample_pair("two-gaussians", rng))
        rng = np.random.default_rng(7)
        pairs2 = [sample_pair("two-gaussians", rng) for _ in range(5)]
        for (a0, a1), (b0, b1) in zip(pairs1, pairs2):
            np.testing.assert_array_equal(a0, b0)
            np.testing.assert_array_equal(a1, b1)

    def test_unknown_dataset_rejected(self):
        with pytest.raises(ContractViolation):
            sample_pair("three-moons", np.random.default_rng(0))


class TestFmLoss:
    def test_zero_when_field_matches_displacement(self):
        # zero-output field with zero displacement: output equals x1 - x0
        field = MlpField.initialize(2, rng=np.random.default_rng(0))
        field.layers[-1] = (np.zeros_like(field.layers[-1][0]), np.zeros(2))
        x0 = np.array([0.5, -0.5])
        assert fm_loss(field, x0, x0.copy(), 0.25) == 0.0

    def test_zero_output_field_unit_displacement(self):
        field = MlpField.initialize(2, rng=np.random.default_rng(0))
        field.layers[-1] = (np.zeros_like(field.layers[-1][0]), np.zeros(2))
        x0 = np.zeros(2)
        assert fm_loss(field, x0, np.array([1.0, 0.0]), 0.0) == pytest.approx(1.0)
        assert fm_loss(field, x0, np.array([3.0, 4.0]), 0.0) == pytest.approx(25.0)

    def test_pure_per_sample(self):
        field = MlpField.initialize(2, rng=np.random.default_rng(1))
        x0 = np.array([0.1, 0.2])
        x1 = np.array([1.5, -0.3])
        assert fm_loss(field, x0, x1, 0.6) == fm_loss(field, x0, x1, 0.6)

    def test_batch_order_irrelevant(self):
        field = MlpField.initialize(2, rng=np.random.default_rng(2))
        rng = np.random.default_rng(3)
        batch = [(rng.standard_normal(2), rng.standard_normal(2), float(rng.uniform()))
                 for _ in range(8)]
        forward = sum(fm_loss(field, *s) for s in batch)
        backward = sum(fm_loss(field, *s) for s in reversed(batch))
        assert forward == pytest.approx(backward, rel=1e-15)


class TestConditionedField:
    def test_condition_is_a_real_input(self):
        field = MlpField.initialize(2, cond_dim=3, rng=np.random.default_rng(0))
        x = np.array([0.5, -0.5])
        a = field.evaluate(x, 0.3, np.array([1.0, 0.0, 0.0]))
        b = field.evaluate(x, 0.3, np.array([0.0, 1.0, 0.0]))
        assert not np.array_equal(a, b)

    def test_missing_condition_defaults_to_zeros(self):
        field = MlpField.initialize(2, cond_dim=2, rng=np.random.default_rng(0))
        x = np.array([0.1, 0.1])
        np.testing.assert_array_equal(
            field.evaluate(x, 0.0, None), field.evaluate(x, 0.0, np.zeros(2))
        )

    def test_condition_shape_checked(self):
        field = MlpField.initialize(2, cond_dim=2, rng=np.random.default_rng(0))
        with pytest.raises(ContractViolation):
            field.evaluate(np.zeros(2), 0.0, np.zeros(5))

    def test_condition_threads_through_solvers(self):
        from flowprobe import adaptive_solve, euler_solve

        field = MlpField.initialize(2, cond_dim=2, rng=np.random.default_rng(1))
        c1, c2 = np.array([2.0, 0.0]), np.array([-2.0, 0.5])
        e1 = euler_solve(field, [0.0, 0.0], c=c1, n=8).endpoint
        e2 = euler_solve(field, [0.0, 0.0], c=c2, n=8).endpoint
        assert not np.array_equal(e1, e2)
        a1 = adaptive_solve(field, [0.0, 0.0], c=c1).endpoint
        a2 = adaptive_solve(field, [0.0, 0.0], c=c2).endpoint
        assert not np.array_equal(a1, a2)


class TestGradients:
    def test_analytic_matches_central_differences(self):
        # relative error of the full gradient vector, step 1e-5
        rng = np.random.default_rng(7)
        for _ in range(10):
            field = MlpField.initialize(2, rng=rng)
            x0 = rng.standard_normal(2)
            x1 = rng.standard_normal(2)
            t = float(rng.uniform())
            _, grads = fm_loss_and_grads(field, x0, x1, t)
            num, den = 0.0, 0.0
            h = 1e-5
            for li, (w, b) in enumerate(field.layers):
                for arr, g in ((w, grads[li][0]), (b, grads[li][1])):
                    it = np.nditer(arr, flags=["multi_index"])
                    for _ in it:
                        idx = it.multi_index
                        orig = arr[idx]
                        arr[idx] = orig + h
                        lp = fm_loss(field, x0, x1, t)
                        arr[idx] = orig - h
                        lm = fm_loss(field, x0, x1, t)
                        arr[idx] = orig
                        fd = (lp - lm) / (2 * h)
                        num += (fd - g[idx]) ** 2
                        den += fd**2
            assert np.sqrt(num) / np.sqrt(den) < 1e-4


class TestOtPairing:
    def test_preserves_multiset(self):
        rng = np.random.default_rng(3)
        x0, x1 = sample_batch("two-gaussians", 32, rng)
        paired = ot_pairing(x0, x1)
        assert sorted(map(tuple, paired)) == sorted(map(tuple, x1))

    def test_reduces_transport_cost(self):
        rng = np.random.default_rng(4)
        x0, x1 = sample_batch("two-gaussians", 64, rng)
        paired = ot_pairing(x0, x1)
        assert np.sum((paired - x0) ** 2) <= np.sum((x1 - x0) ** 2)


class TestTraining:
    def test_single_point_learns_constant_displacement(self, single_point_field):
        field = single_point_field.field
        v = field.evaluate(np.zeros(2), 0.0)
        assert np.linalg.norm(v - SINGLE_POINT_TARGET) < 0.1

    def test_trace_shows_progress(self, single_point_field):
        trace = single_point_field.trace
        assert trace.last < trace.first

    def test_two_gaussians_field_is_near_straight(self, two_gaussians_field):
        field = two_gaussians_field.field
        rng = np.random.default_rng(123)
        sims = [probe(field, rng.standard_normal(2)).similarity for _ in range(100)]
        assert np.mean(sims) > 0.9

    def test_fixed_seed_is_bitwise_deterministic(self):
        cfg = TrainingConfig(
            dataset="two-moons", batch_size=16, steps=60, learning_rate=1e-3, seed=5
        )
        f1, t1 = train(cfg)
        f2, t2 = train(cfg)
        for (w1, b1), (w2, b2) in zip(f1.layers, f2.layers):
            np.testing.assert_array_equal(w1, w2)
            np.testing.assert_array_equal(b1, b2)
        assert t1.interval_losses == t2.interval_losses

    def test_divergence_reports_step(self):
        # a rate this absurd overflows the squared loss within a step or two
        cfg = TrainingConfig(
            dataset="two-gaussians",
            batch_size=8,
            steps=500,
            learning_rate=1e200,
            seed=0,
        )
        with pytest.raises(TrainingDiverged) as info:
            train(cfg)
        assert info.value.step >= 0

    def test_config_validation(self):
        with pytest.raises(ContractViolation):
            TrainingConfig(dataset="nope")
        with pytest.raises(ContractViolation):
            TrainingConfig(learning_rate=0.0)
        with pytest.raises(ContractViolation):
            TrainingConfig(steps=0)
        with pytest.raises(ContractViolation):
            TrainingConfig(coupling="sinkhorn")


class TestWeightDocument:
    def test_round_trip_is_bitwise(self, two_gaussians_field):
        field = two_gaussians_field.field
        again = load_weights(save_weights(field))
        rng = np.random.default_rng(11)
        for _ in range(100):
            x = rng.standard_normal(2)
            t = float(rng.uniform())
            np.testing.assert_array_equal(
                field.evaluate(x, t), again.evaluate(x, t)
            )

    def test_truncated_document_is_a_parse_error(self):
        field = MlpField.initialize(2, rng=np.random.default_rng(0))
        blob = save_weights(field)
        with pytest.raises(WeightFormatError) as info:
            load_weights(blob[: len(blob) // 2])
        assert info.value.offset is not None

    def test_truncated_header(self):
        with pytest.raises(WeightFormatError):
            load_weights(b"MLPW\x01")

    def test_bad_magic(self):
        field = MlpField.initialize(2, rng=np.random.default_rng(0))
        blob = save_weights(field)
        with pytest.raises(WeightFormatError):
            load_weights(b"XXXX" + blob[4:])

    def test_mismatched_layer_size_is_a_schema_error(self):
        import struct

        field = MlpField.initialize(2, rng=np.random.default_rng(0))
        blob = bytearray(save_weights(field))
        # corrupt the first layer's declared column count
        rows, cols = struct.unpack("<II", blob[20:28])
        blob[20:28] = struct.pack("<II", rows, cols + 1)
        with pytest.raises(WeightSchemaError):
            load_weights(bytes(blob))

    def test_trailing_garbage_rejected(self):
        field = MlpField.initialize(2, rng=np.random.default_rng(0))
        with pytest.raises(WeightFormatError):
            load_weights(save_weights(field) + b"\x00")
