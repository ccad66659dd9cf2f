#!/usr/bin/env python
# -*- coding: utf-8 -*-

import unittest

import numpy as np

from behavior.policy import PolicyKind, PolicyParams
from estimation.motion_model import ProcessNoiseSpec
from estimation.ukf import MeasurementSpec
from prediction.pipeline import (
    ModuleConfigs,
    PredictionConfig,
    evaluate_prediction,
    predict_trajectory,
    rollout_policy,
)
from simulation.scenario import (
    RoundaboutGeometry,
    Route,
    build_route_path,
    compose_policy_pieces,
    inject_process_noise,
    noise_seeds,
    observe,
)
from utils.errors import ConfigurationError, HorizonRangeError, PipelineError

LK = PolicyKind.LANE_KEEP
MERGE = PolicyKind.MERGE
PRECISE = MeasurementSpec(1e-4, 1e-4, 1e-4)
RING_YAW = 8.0 / 15.0


def build(pieces):
    return compose_policy_pieces(pieces, 0.1)


def observed_prefix(truth, count, meas=PRECISE, seed=0):
    return observe(truth, meas, seed).window(0, count)


def terminal_errors(predicted, truth, at):
    n = len(predicted)
    diff = predicted.values[:, :2] - truth.states.values[at + 1:at + 1 + n, :2]
    return np.hypot(diff[:, 0], diff[:, 1])


class PredictionConfigTests(unittest.TestCase):
    def test_step_count(self):
        self.assertEqual(20, PredictionConfig().n_steps)
        self.assertEqual(35, PredictionConfig(horizon=3.5).n_steps)

    def test_invalid_horizon(self):
        with self.assertRaises(ConfigurationError):
            PredictionConfig(horizon=0.0)
        with self.assertRaises(ConfigurationError):
            PredictionConfig(horizon=0.01)


class PredictTrajectoryTests(unittest.TestCase):
    def test_straight_road_is_lane_keep(self):
        truth = build([(LK, PolicyParams(LK, 8.0, 0.0), 60)])
        result = predict_trajectory(observed_prefix(truth, 60))
        self.assertIs(LK, result.current_policy)
        self.assertLess(abs(result.estimated_state.mean[4]), 0.05)
        self.assertEqual(20, len(result.predicted))
        self.assertAlmostEqual(6.0, result.predicted.t0)
        self.assertEqual(59, result.last_index)

    def test_raw_measurements_give_same_policy(self):
        truth = build([(LK, PolicyParams(LK, 8.0, 0.0), 60)])
        result = predict_trajectory(observed_prefix(truth, 60), PredictionConfig(use_filter=False))
        self.assertIs(LK, result.current_policy)

    def test_inside_ring_is_lane_keep(self):
        truth = build([(LK, PolicyParams(LK, 8.0, RING_YAW), 60)])
        result = predict_trajectory(observed_prefix(truth, 60))
        self.assertIs(LK, result.current_policy)
        self.assertAlmostEqual(RING_YAW, result.estimated_state.mean[4], delta=0.05)

    def test_consistent_rollout_tracks_truth(self):
        truth = build([(LK, PolicyParams(LK, 8.0, RING_YAW), 100)])
        modules = ModuleConfigs(process=ProcessNoiseSpec(1e-6, 1e-6))
        result = predict_trajectory(observed_prefix(truth, 80, MeasurementSpec(1e-6, 1e-6, 1e-6)), modules=modules)
        errors = evaluate_prediction(result, truth, 79)
        self.assertEqual(20, errors.shape[0])
        self.assertLess(errors[-1], 0.1)

    def test_wrong_policy_drifts(self):
        truth = build([(LK, PolicyParams(LK, 8.0, 0.0), 60), (LK, PolicyParams(LK, 8.0, 0.5), 40)])
        result = predict_trajectory(observed_prefix(truth, 60))
        self.assertGreater(evaluate_prediction(result, truth, 59)[-1], 1.0)

    def test_merge_rollout_beats_lane_keep_during_merge(self):
        truth = build([(LK, PolicyParams(LK, 8.0, 0.0), 40), (MERGE, PolicyParams(MERGE, 8.0, 0.0, 0.05), 80)])
        result = predict_trajectory(observed_prefix(truth, 100))
        merge_errors = terminal_errors(rollout_policy(result, MERGE), truth, 99)
        lane_errors = terminal_errors(rollout_policy(result, LK), truth, 99)
        self.assertLess(merge_errors[-1], lane_errors[-1])

    def test_yaw_cap_limits_rollout(self):
        truth = build([(MERGE, PolicyParams(MERGE, 8.0, 0.2, 0.3), 60)])
        modules = ModuleConfigs(geometry=RoundaboutGeometry(ring_radius=15.0))
        result = predict_trajectory(observed_prefix(truth, 60), modules=modules)
        speed = result.estimated_state.mean[3]
        self.assertLessEqual(np.abs(result.predicted.values[:, 4]).max(), abs(speed) / 15.0 + 1e-12)

    def test_lane_keep_rollout_is_not_capped(self):
        truth = build([(LK, PolicyParams(LK, 8.0, 0.8), 60)])
        modules = ModuleConfigs(geometry=RoundaboutGeometry(ring_radius=15.0))
        result = predict_trajectory(observed_prefix(truth, 60), modules=modules)
        self.assertIs(LK, result.current_policy)
        np.testing.assert_allclose(result.predicted.values[:, 4], 0.8, atol=0.05)
        other = rollout_policy(result, MERGE, modules=modules)
        self.assertGreater(np.abs(other.values[:, 4]).max(), 8.0 / 15.0 + 0.1)

    def test_rollouts_use_each_policy_fit(self):
        truth = build([(LK, PolicyParams(LK, 8.0, 0.0), 40), (MERGE, PolicyParams(MERGE, 8.0, 0.0, 0.05), 80)])
        result = predict_trajectory(observed_prefix(truth, 100))
        start, stop = result.path.segment_bounds[-1]
        merge_fit = result.last_segment_fits[MERGE]
        lane = rollout_policy(result, LK)
        merge = rollout_policy(result, MERGE)
        np.testing.assert_allclose(lane.values[:, 4], result.last_segment_fits[LK].params.w)
        self.assertEqual(stop - start, merge_fit.n_samples)
        self.assertAlmostEqual(merge_fit.params.yaw_rate_at(stop - start, 0.1), merge.values[0, 4])
        self.assertGreater(merge.values[-1, 4], merge.values[0, 4])

    def test_short_series_rejected(self):
        truth = build([(LK, PolicyParams(LK, 8.0, 0.0), 10)])
        with self.assertRaises(PipelineError):
            predict_trajectory(observed_prefix(truth, 10))

    def test_truth_too_short_for_horizon(self):
        truth = build([(LK, PolicyParams(LK, 8.0, 0.0), 70)])
        result = predict_trajectory(observed_prefix(truth, 60))
        with self.assertRaises(HorizonRangeError):
            evaluate_prediction(result, truth, 59)


class RolloutComparisonTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.route = build_route_path(RoundaboutGeometry(), Route(0, 2))

    def terminal_pair(self, seed, at):
        process_seed, measurement_seed = noise_seeds(seed)
        truth = inject_process_noise(self.route, ProcessNoiseSpec(), process_seed)
        z = observe(truth, MeasurementSpec(), measurement_seed).window(0, at + 1)
        result = predict_trajectory(z)
        merge = terminal_errors(rollout_policy(result, MERGE), truth, at)[-1]
        lane = terminal_errors(rollout_policy(result, LK), truth, at)[-1]
        return merge, lane

    def test_merge_rollout_wins_inside_entry_transition(self):
        pairs = np.array([self.terminal_pair(seed, 79) for seed in range(100)])
        self.assertGreaterEqual(int(np.sum(pairs[:, 0] < pairs[:, 1])), 80)
        self.assertLess(pairs[:, 0].mean(), pairs[:, 1].mean())

    def test_lane_keep_rollout_wins_on_ring(self):
        pairs = np.array([self.terminal_pair(seed, 129) for seed in range(100)])
        self.assertGreater(int(np.sum(pairs[:, 1] < pairs[:, 0])), 50)
        self.assertLess(pairs[:, 1].mean(), pairs[:, 0].mean())


if __name__ == "__main__":
    unittest.main()
