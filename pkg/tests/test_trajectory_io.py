#!/usr/bin/env python
# -*- coding: utf-8 -*-

import io
import json
import tempfile
import unittest
from pathlib import Path

import numpy as np

from behavior.policy import PolicyKind
from estimation.trajectory import Trajectory
from utils.errors import DataError, ParseError
from utils.trajectory_io import (
    TRUTH_COLUMNS,
    read_poses,
    read_trajectory,
    write_metrics,
    write_segment_report,
    write_truth,
)


class TrajectoryFileTests(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def write(self, name, text):
        path = self.dir / name
        path.write_text(text, encoding="utf-8")
        return str(path)

    def test_truth_file_keeps_labels_and_precision(self):
        values = np.array([[0.1, 0.2, 0.3, 8.0, 1 / 3], [0.9, 0.2, 0.3, 8.0, 1 / 3]])
        path = str(self.dir / "truth.csv")
        write_truth(path, Trajectory(values, 0.1), [PolicyKind.LANE_KEEP, PolicyKind.MERGE])
        loaded = read_trajectory(path, TRUTH_COLUMNS[:-1])
        np.testing.assert_array_equal(values, loaded.trajectory.values)
        self.assertEqual(("lane-keep", "merge"), loaded.labels)
        self.assertFalse((self.dir / "truth.csv.tmp").exists())

    def test_bad_header(self):
        path = self.write("m.csv", "time,x,y,theta\n0,0,0,0\n0.1,1,0,0\n")
        with self.assertRaises(ParseError) as ctx:
            read_poses(path)
        self.assertEqual(1, ctx.exception.row)

    def test_bad_cell_reports_row_and_column(self):
        path = self.write("m.csv", "t,x,y,theta\n0,0,0,0\n0.1,abc,0,0\n")
        with self.assertRaises(ParseError) as ctx:
            read_poses(path)
        self.assertEqual(3, ctx.exception.row)
        self.assertEqual("x", ctx.exception.column)

    def test_heading_out_of_range(self):
        path = self.write("m.csv", "t,x,y,theta\n0,0,0,0\n0.1,1,0,4\n")
        with self.assertRaises(ParseError):
            read_poses(path)

    def test_uneven_time_axis(self):
        path = self.write("m.csv", "t,x,y,theta\n0,0,0,0\n0.1,1,0,0\n0.25,2,0,0\n")
        with self.assertRaises(ParseError) as ctx:
            read_poses(path)
        self.assertEqual(4, ctx.exception.row)

    def test_missing_file(self):
        with self.assertRaises(DataError):
            read_poses(str(self.dir / "absent.csv"))

    def test_metrics_file(self):
        path = str(self.dir / "metrics.txt")
        write_metrics(path, {"avg_euclid": 0.25, "trials": 3})
        with open(path, encoding="utf-8") as f:
            self.assertEqual(["avg_euclid=0.25", "trials=3"], f.read().splitlines())

    def test_segment_report_to_stream(self):
        stream = io.StringIO()
        write_segment_report(None, [{"segment": 0, "policy": "merge"}], stream=stream)
        self.assertEqual({"segment": 0, "policy": "merge"}, json.loads(stream.getvalue()))


if __name__ == "__main__":
    unittest.main()
