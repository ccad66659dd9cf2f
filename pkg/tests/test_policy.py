#!/usr/bin/env python
# -*- coding: utf-8 -*-

import math
import unittest

import numpy as np

from behavior.policy import (
    LikelihoodSpec,
    PolicyKind,
    PolicyParams,
    bic_penalty,
    classify_segment,
    fit_policy,
    forward_simulate,
)
from estimation.motion_model import State5, wrap_angle
from estimation.trajectory import Trajectory
from estimation.ukf import MeasurementSpec
from simulation.scenario import compose_policy_pieces, observe
from utils.errors import ConfigurationError, DataError

LK = PolicyKind.LANE_KEEP
MERGE = PolicyKind.MERGE


def poses_of(pieces, start=None):
    return compose_policy_pieces(pieces, 0.1, start).states.poses()


class ForwardSimulateTests(unittest.TestCase):
    def test_lane_keep_stays_on_circle(self):
        radius, v = 15.0, 8.0
        out = forward_simulate(LK, PolicyParams(LK, v, v / radius), State5(radius, 0.0, math.pi / 2, 0.0, 0.0), 60, 0.1)
        np.testing.assert_allclose(np.hypot(out.values[:, 0], out.values[:, 1]), radius, atol=1e-9)
        self.assertEqual(60, len(out))
        self.assertAlmostEqual(0.1, out.t0)

    def test_merge_heading_is_discrete_quadratic(self):
        c, dt, n = 0.2, 0.1, 30
        out = forward_simulate(MERGE, PolicyParams(MERGE, 8.0, 0.0, c), State5(0.0, 0.0, 0.0, 0.0, 0.0), n, dt)
        self.assertAlmostEqual(c * dt ** 2 * n * (n - 1) / 2, out.values[-1, 2], places=12)
        self.assertLess(abs(out.values[-1, 2] - 0.5 * c * (n * dt) ** 2), c * dt * n * dt)

    def test_yaw_limit_caps_merge(self):
        out = forward_simulate(MERGE, PolicyParams(MERGE, 8.0, 0.0, 1.0), State5(0.0, 0.0, 0.0, 0.0, 0.0), 20, 0.1,
                               yaw_limit=0.5)
        self.assertLessEqual(np.abs(out.values[:, 4]).max(), 0.5)

    def test_policy_mismatch_rejected(self):
        with self.assertRaises(ConfigurationError):
            forward_simulate(LK, PolicyParams(MERGE, 8.0, 0.0, 0.1), State5(0.0, 0.0, 0.0, 0.0, 0.0), 5, 0.1)


class FitTests(unittest.TestCase):
    def test_lane_keep_recovers_parameters(self):
        segment = poses_of([(LK, PolicyParams(LK, 8.0, 0.5), 51)], State5(3.0, -2.0, 0.4, 0.0, 0.0))
        fit = fit_policy(segment, LK)
        self.assertLess(fit.total_sse, 1e-9)
        self.assertAlmostEqual(8.0, fit.params.v, delta=1e-3)
        self.assertAlmostEqual(0.5, fit.params.w, delta=1e-3)

    def test_merge_recovers_parameters(self):
        segment = poses_of([(MERGE, PolicyParams(MERGE, 8.0, 0.1, 0.2), 51)])
        policy, fits = classify_segment(segment)
        self.assertIs(MERGE, policy)
        params = fits[MERGE].params
        self.assertAlmostEqual(8.0, params.v, delta=1e-2)
        self.assertAlmostEqual(0.1, params.w, delta=1e-2)
        self.assertAlmostEqual(0.2, params.w_dot, delta=1e-2)

    def test_straight_segment_prefers_lane_keep(self):
        segment = poses_of([(LK, PolicyParams(LK, 8.0, 0.0), 40)])
        policy, fits = classify_segment(segment)
        self.assertIs(LK, policy)
        self.assertGreaterEqual(fits[MERGE].log_likelihood, fits[LK].log_likelihood - 1e-9)

    def test_merge_never_fits_worse_than_lane_keep(self):
        clean = compose_policy_pieces([(LK, PolicyParams(LK, 8.0, 8.0 / 15.0), 50)], 0.1)
        for seed in range(5):
            segment = observe(clean, MeasurementSpec(), seed)
            _, fits = classify_segment(segment)
            self.assertGreaterEqual(fits[MERGE].log_likelihood, fits[LK].log_likelihood - 1e-9)

    def test_penalty_is_half_k_log_n(self):
        segment = poses_of([(LK, PolicyParams(LK, 8.0, 0.2), 30)])
        for policy in (LK, MERGE):
            fit = fit_policy(segment, policy)
            self.assertAlmostEqual(0.5 * policy.n_params * math.log(30), fit.log_likelihood - fit.bic_evidence)
            self.assertAlmostEqual(bic_penalty(policy, 30), fit.log_likelihood - fit.bic_evidence)

    def test_invariant_under_rigid_motion(self):
        clean = compose_policy_pieces([(MERGE, PolicyParams(MERGE, 8.0, 0.0, 0.2), 40)], 0.1)
        segment = observe(clean, MeasurementSpec(0.05, 0.05, 0.01), 7)
        phi, shift = 2.0, np.array([40.0, -25.0])
        rotation = np.array([[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]])
        moved = np.column_stack([
            segment.values[:, :2] @ rotation.T + shift,
            wrap_angle(segment.values[:, 2] + phi),
        ])
        policy_a, fits_a = classify_segment(segment)
        policy_b, fits_b = classify_segment(Trajectory(moved, 0.1))
        self.assertIs(policy_a, policy_b)
        for kind in (LK, MERGE):
            self.assertAlmostEqual(fits_a[kind].bic_evidence, fits_b[kind].bic_evidence, delta=1e-4)

    def test_noisy_ring_yaw_rate_is_unbiased(self):
        clean = compose_policy_pieces([(LK, PolicyParams(LK, 8.0, 8.0 / 15.0), 50)], 0.1)
        estimates = [fit_policy(observe(clean, MeasurementSpec(), seed), LK).params.w for seed in range(20)]
        self.assertAlmostEqual(8.0 / 15.0, float(np.mean(estimates)), delta=0.05)

    def test_likelihood_scale_keeps_ordering(self):
        clean = compose_policy_pieces([(MERGE, PolicyParams(MERGE, 8.0, 0.0, 0.1), 50)], 0.1)
        segment = observe(clean, MeasurementSpec(0.1, 0.1, 0.05), 3)
        orders = []
        for sigma in (0.5, 2.0):
            _, fits = classify_segment(segment, LikelihoodSpec(sigma))
            orders.append(fits[MERGE].log_likelihood > fits[LK].log_likelihood)
        self.assertEqual(orders[0], orders[1])

    def test_identical_samples_are_degenerate(self):
        segment = Trajectory(np.tile([1.0, 2.0, 0.3], (30, 1)), 0.1)
        fit = fit_policy(segment, LK)
        self.assertTrue(fit.degenerate)
        self.assertEqual(0.0, fit.params.v)

    def test_single_sample_rejected(self):
        with self.assertRaises(DataError):
            fit_policy(Trajectory(np.zeros((1, 3)), 0.1), LK)

    def test_invalid_likelihood_scale(self):
        with self.assertRaises(ConfigurationError):
            LikelihoodSpec(0.0)


if __name__ == "__main__":
    unittest.main()
