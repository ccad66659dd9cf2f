#!/usr/bin/env python
# -*- coding: utf-8 -*-

import math
import unittest

import numpy as np

from behavior.policy import PolicyKind
from estimation.trajectory import Trajectory
from utils.errors import AlignmentError, DataError
from utils.metrics import average_reports, compute_metrics, label_error_rate, match_changepoints

LK = PolicyKind.LANE_KEEP
MERGE = PolicyKind.MERGE


def states(rows):
    return Trajectory(np.array(rows, dtype=float), 0.1)


class ComputeMetricsTests(unittest.TestCase):
    def test_identical_series_have_zero_error(self):
        truth = states([[k, 0.0, 0.0, 8.0, 0.0] for k in range(10)])
        report = compute_metrics(truth, truth)
        self.assertEqual(0.0, report.avg_euclid)
        self.assertEqual(0.0, report.rmse_theta)
        self.assertEqual(10, report.n_samples)

    def test_heading_error_is_wrapped(self):
        truth = states([[0.0, 0.0, math.pi - 0.01, 8.0, 0.0]] * 4)
        estimate = states([[0.0, 0.0, -math.pi + 0.01, 8.0, 0.0]] * 4)
        self.assertAlmostEqual(0.02, compute_metrics(truth, estimate).rmse_theta, places=9)

    def test_lateral_and_longitudinal_errors(self):
        truth = states([[k, 0.0, 0.0, 8.0, 0.0] for k in range(5)])
        estimate = states([[k + 0.3, 0.4, 0.0, 8.0, 0.0] for k in range(4)] + [[4.0, 0.0, 0.0, 8.0, 0.0]])
        report = compute_metrics(truth, estimate)
        self.assertAlmostEqual(0.32, report.avg_lat_err, places=9)
        self.assertAlmostEqual(0.4, report.max_lat_err, places=9)
        self.assertAlmostEqual(0.24, report.avg_lon_err, places=9)
        self.assertAlmostEqual(0.3, report.max_lon_err, places=9)
        self.assertAlmostEqual(0.4, report.avg_euclid, places=9)
        self.assertAlmostEqual(0.5, report.max_euclid, places=9)

    def test_burn_in_skips_leading_samples(self):
        truth = states([[0.0, 0.0, 0.0, 8.0, 0.0]] * 10)
        estimate = states([[3.0, 4.0, 0.0, 8.0, 0.0]] * 2 + [[0.0, 0.0, 0.0, 8.0, 0.0]] * 8)
        self.assertAlmostEqual(1.0, compute_metrics(truth, estimate).avg_euclid)
        report = compute_metrics(truth, estimate, burn_in=2)
        self.assertEqual(0.0, report.avg_euclid)
        self.assertEqual(8, report.n_samples)

    def test_length_mismatch(self):
        with self.assertRaises(AlignmentError):
            compute_metrics(states([[0.0] * 5] * 3), states([[0.0] * 5] * 4))

    def test_burn_in_out_of_range(self):
        with self.assertRaises(DataError):
            compute_metrics(states([[0.0] * 5] * 3), states([[0.0] * 5] * 3), burn_in=3)

    def test_average_reports(self):
        a = compute_metrics(states([[0.0] * 5] * 4), states([[1.0, 0.0, 0.0, 0.0, 0.0]] * 4))
        b = compute_metrics(states([[0.0] * 5] * 4), states([[3.0, 0.0, 0.0, 0.0, 0.0]] * 4))
        self.assertAlmostEqual(2.0, average_reports([a, b]).rmse_x)
        with self.assertRaises(DataError):
            average_reports([])


class SegmentationMetricsTests(unittest.TestCase):
    def test_label_error_rate(self):
        self.assertEqual(0.25, label_error_rate([LK, LK, MERGE, MERGE], [LK, MERGE, MERGE, MERGE]))
        with self.assertRaises(AlignmentError):
            label_error_rate([LK], [LK, LK])

    def test_changepoints_match_one_to_one(self):
        self.assertEqual(2, match_changepoints([48, 101, 300], [49, 99, 158], 5))
        self.assertEqual(1, match_changepoints([50], [49, 51], 5))
        self.assertEqual(0, match_changepoints([], [49], 5))


if __name__ == "__main__":
    unittest.main()
