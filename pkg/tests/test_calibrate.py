"""
Tests for coefficient identification from two-date observations
"""

import numpy as np
import pytest

from calibrate import (
    CoefficientVector,
    ObservationVector,
    build_training_set,
    calibrate_root,
    calibrate_samples,
    observe_batch,
    synthesize_observations,
    synthesize_sample_set,
)
from config import EFFORT_MODEL_TRUTH
from neural import TrainConfig
from sde_core import effort_model_params, sample_state, simulate_paths, solve_deterministic

Q, B0, E0 = EFFORT_MODEL_TRUTH["q"], EFFORT_MODEL_TRUTH["B0"], EFFORT_MODEL_TRUTH["E0"]
T1, T2 = EFFORT_MODEL_TRUTH["t1"], EFFORT_MODEL_TRUTH["t2"]
COARSE_DT = 1e-2


def _observe(z, sigma=0.0, seed=0, dt=COARSE_DT):
    return synthesize_observations(z, Q, B0, E0, T1, T2, sigma=sigma, seed=seed, dt=dt)


class TestVectors:
    def test_truth(self, truth):
        np.testing.assert_array_equal(truth.as_array(), [2.0, 1.0, 1.1, 1.0])

    @pytest.mark.parametrize("values", [(0.0, 1.0, 1.0, 1.0), (2.0, -1.0, 1.0, 1.0), (2.0, 1.0, -0.1, 1.0)])
    def test_invalid_coefficients(self, values):
        with pytest.raises(ValueError):
            CoefficientVector(*values)

    def test_observation_dates_must_be_ordered(self):
        with pytest.raises(ValueError):
            ObservationVector((1.0, 1.0, 1.0, 1.0), 0.5, 0.2)
        with pytest.raises(ValueError):
            ObservationVector((1.0, 1.0, 1.0), 0.1, 0.2)


class TestObservations:
    def test_noiseless_observations_match_the_effort_model(self, truth):
        dt = 1e-3
        Z = _observe(truth, dt=dt).as_array()
        path = solve_deterministic(effort_model_params(), None, dt)
        B1, E1 = sample_state(path, T1)
        np.testing.assert_allclose(Z, [B1[0], E1, path.B[-1, 0], path.E[-1]], rtol=1e-10)

    def test_noisy_observation_uses_the_same_path_stream(self, truth):
        dt = 1e-3
        Z = synthesize_observations(truth, Q, B0, E0, T1, T2, sigma=0.1, seed=3, path_index=2, dt=dt)
        path = simulate_paths(effort_model_params().with_noise(0.1), None, dt, 3, seed=3)[2]
        assert Z.Z[2] == pytest.approx(path.B[-1, 0], rel=1e-12)
        assert Z.Z[3] == pytest.approx(path.E[-1], rel=1e-12)

    def test_batch_evaluates_each_row_independently(self, truth):
        other = CoefficientVector(1.5, 0.8, 1.0, 0.5)
        batch = observe_batch(np.stack([truth.as_array(), other.as_array()]), Q, B0, E0, T1, T2, dt=COARSE_DT)
        np.testing.assert_array_equal(batch[1], _observe(other).as_array())

    def test_rejects_bad_inputs(self, truth):
        with pytest.raises(ValueError):
            observe_batch(np.ones((2, 3)), Q, B0, E0, T1, T2)
        with pytest.raises(ValueError):
            observe_batch(truth.as_array(), Q, B0, E0, 0.5, 0.1)
        with pytest.raises(ValueError):
            _observe(truth, sigma=-0.1)

    def test_sample_set_is_reproducible(self, truth):
        first = synthesize_sample_set(truth, Q, B0, E0, T1, T2, 0.1, 5, seed=4, dt=COARSE_DT)
        second = synthesize_sample_set(truth, Q, B0, E0, T1, T2, 0.1, 5, seed=4, dt=COARSE_DT)
        other = synthesize_sample_set(truth, Q, B0, E0, T1, T2, 0.1, 5, seed=5, dt=COARSE_DT)
        assert [s.Z for s in first] == [s.Z for s in second]
        assert first[0].Z != other[0].Z
        assert len({s.Z for s in first}) == 5

    def test_noiseless_sample_set_repeats_the_deterministic_observation(self, truth):
        samples = synthesize_sample_set(truth, Q, B0, E0, T1, T2, 0.0, 3, seed=1, dt=COARSE_DT)
        expected = _observe(truth).as_array()
        for s in samples:
            np.testing.assert_array_equal(s.as_array(), expected)


class TestRootCalibration:
    def test_recovers_truth_from_exact_data(self, truth):
        target = _observe(truth)
        start = CoefficientVector.from_array(1.2 * truth.as_array())
        result = calibrate_root(target, start, Q, B0, E0, dt=COARSE_DT)
        assert result.converged
        assert result.residual_norm < 1e-10
        np.testing.assert_allclose(result.z.as_array(), truth.as_array(), rtol=1e-5)
        assert result.evaluations > result.iterations

    def test_already_at_the_root(self, truth):
        result = calibrate_root(_observe(truth), truth, Q, B0, E0, dt=COARSE_DT)
        assert result.converged
        assert result.iterations == 0


class TestSampleCalibration:
    def test_least_squares_on_a_noiseless_sample(self, truth):
        samples = [_observe(truth)]
        start = CoefficientVector.from_array(1.1 * truth.as_array())
        result = calibrate_samples(samples, method="least_squares", z0=start, dt=COARSE_DT)
        np.testing.assert_allclose(result.mean.as_array(), truth.as_array(), rtol=1e-2)
        np.testing.assert_array_equal(result.std, np.zeros(4))

    def test_training_set_respects_the_box(self, truth):
        Z, z = build_training_set(truth, Q, B0, E0, T1, T2, M=40, seed=2, spread=0.5, dt=COARSE_DT)
        assert Z.shape == (40, 4) and z.shape == (40, 4)
        ref = truth.as_array()
        assert np.all(z >= 0.5 * ref) and np.all(z <= 1.5 * ref)
        Z2, z2 = build_training_set(truth, Q, B0, E0, T1, T2, M=40, seed=2, spread=0.5, dt=COARSE_DT)
        np.testing.assert_array_equal(z, z2)
        np.testing.assert_array_equal(Z, Z2)

    @pytest.mark.parametrize("kwargs", [{"M": 0}, {"spread": 1.0}])
    def test_training_set_arguments(self, truth, kwargs):
        with pytest.raises(ValueError):
            build_training_set(truth, Q, B0, E0, T1, T2, dt=COARSE_DT, **kwargs)

    def test_regressor_reports_prediction_moments(self, truth):
        training = build_training_set(truth, Q, B0, E0, T1, T2, M=64, seed=1, dt=COARSE_DT)
        samples = synthesize_sample_set(truth, Q, B0, E0, T1, T2, 0.01, 10, seed=3, dt=COARSE_DT)
        result = calibrate_samples(samples, method="regressor", training_set=training, hidden=[8],
                                   config=TrainConfig(epochs=5, seed=1))
        assert result.estimates.shape == (10, 4)
        np.testing.assert_allclose(result.mean.as_array(), result.estimates.mean(axis=0))
        np.testing.assert_allclose(result.std, result.estimates.std(axis=0))
        assert len(result.history.losses) == 5

    def test_regressor_needs_a_training_set(self, truth):
        with pytest.raises(ValueError):
            calibrate_samples([_observe(truth)], method="regressor")

    def test_unknown_method_and_empty_samples(self, truth):
        with pytest.raises(ValueError):
            calibrate_samples([_observe(truth)], method="bayesian")
        with pytest.raises(ValueError):
            calibrate_samples([], method="least_squares")


# Reported spread of the regressor estimates, ordered r, kappa, a, c
REGRESSOR_SPREAD = {0.01: [0.09, 0.30, 0.04, 0.06], 0.25: [0.16, 0.34, 0.15, 0.23]}


@pytest.mark.slow
@pytest.mark.parametrize("sigma", sorted(REGRESSOR_SPREAD))
def test_regressor_recovers_all_coefficients(truth, sigma):
    training = build_training_set(truth, Q, B0, E0, T1, T2, M=1000, seed=1235, sigma=sigma)
    samples = synthesize_sample_set(truth, Q, B0, E0, T1, T2, sigma, 1000, seed=1234)
    result = calibrate_samples(samples, method="regressor", training_set=training,
                               config=TrainConfig(epochs=200, seed=1234))
    error = np.abs(result.mean.as_array() - truth.as_array())
    assert np.all(error <= 3.0 * np.array(REGRESSOR_SPREAD[sigma]))
