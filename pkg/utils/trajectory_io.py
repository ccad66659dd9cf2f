#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
轨迹文件读写

CSV 均带表头，浮点数以 17 位有效数字输出，保证同一输入重复运行得到
逐字节相同的文件。片段报告为 JSON-lines，指标文件为 key=value 行。
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

from estimation.trajectory import EstimateTrajectory, Trajectory
from utils.errors import DataError, ParseError
from utils.logger import get_logger

logger = get_logger("trajectory_io")

POSE_COLUMNS = ("t", "x", "y", "theta")
STATE_COLUMNS = POSE_COLUMNS + ("v", "w")
TRUTH_COLUMNS = STATE_COLUMNS + ("label",)
MEASUREMENT_COLUMNS = POSE_COLUMNS
ESTIMATE_COLUMNS = STATE_COLUMNS + ("var_x", "var_y", "var_theta", "var_v", "var_w")
PREDICTED_COLUMNS = STATE_COLUMNS

TIME_TOLERANCE = 1e-9


def format_float(value: float) -> str:
    return format(float(value), ".17g")


@dataclass(frozen=True)
class TrajectoryFile:
    """读入的 CSV：表头、数值列与可选的标签列"""

    columns: Tuple[str, ...]
    trajectory: Trajectory
    labels: Optional[Tuple[str, ...]] = None


def _atomic_write(path: str, text: str):
    # 先写临时文件再替换
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    temp_path = path + ".tmp"
    try:
        with open(temp_path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(temp_path, path)
    except OSError as e:
        if os.path.exists(temp_path):
            try:
                os.remove(temp_path)
            except OSError:
                pass
        raise DataError(f"无法写入 {path}: {e}") from e
    logger.info(f"已写入 {path}")


def _write_rows(path: str, columns: Sequence[str], times: np.ndarray, values: np.ndarray,
                extra: Optional[Sequence[str]] = None):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for k in range(values.shape[0]):
        row = [format_float(times[k])] + [format_float(v) for v in values[k]]
        if extra is not None:
            row.append(extra[k])
        writer.writerow(row)
    _atomic_write(path, buffer.getvalue())


def write_measurements(path: str, traj: Trajectory):
    _write_rows(path, MEASUREMENT_COLUMNS, traj.times, traj.values[:, :3])


def write_truth(path: str, states: Trajectory, labels: Sequence):
    names = [getattr(label, "value", label) for label in labels]
    _write_rows(path, TRUTH_COLUMNS, states.times, states.values[:, :5], names)


def write_estimates(path: str, est: EstimateTrajectory):
    values = np.hstack([est.means, est.variances()])
    _write_rows(path, ESTIMATE_COLUMNS, est.times, values)


def write_predicted(path: str, traj: Trajectory):
    _write_rows(path, PREDICTED_COLUMNS, traj.times, traj.values[:, :5])


def write_table(path: str, columns: Sequence[str], rows: Iterable[Sequence]):
    """任意列的 CSV（绘图数据）"""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    _atomic_write(path, buffer.getvalue())


def read_trajectory(path: str, expected: Sequence[str]) -> TrajectoryFile:
    """
    读取 CSV 并校验表头、数值与时间轴

    Args:
        path: 文件路径
        expected: 期望的表头（前缀匹配：文件可以多出后续列）

    Returns:
        TrajectoryFile

    Raises:
        ParseError: 表头、数值或时间轴不合法
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            rows = list(csv.reader(f))
    except OSError as e:
        raise DataError(f"无法读取 {path}: {e}") from e

    if not rows:
        raise ParseError("文件为空，缺少表头", row=1)
    header = tuple(cell.strip() for cell in rows[0])
    if header[:len(expected)] != tuple(expected):
        raise ParseError(f"表头应以 {','.join(expected)} 开头，实际为 {','.join(header)}", row=1)

    has_label = "label" in header
    numeric = [c for c in header if c != "label"]
    data, labels = [], []
    for r, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(f"列数 {len(row)} 与表头 {len(header)} 不一致", row=r)
        values = []
        for name, cell in zip(header, row):
            if name == "label":
                labels.append(cell.strip())
                continue
            try:
                value = float(cell)
            except ValueError:
                raise ParseError(f"无法解析数值 {cell!r}", row=r, column=name) from None
            if not np.isfinite(value):
                raise ParseError(f"数值非有限 {cell!r}", row=r, column=name)
            if name == "theta" and not (-np.pi < value <= np.pi + 1e-12):
                raise ParseError(f"航向 {value} 不在 (-pi, pi] 内", row=r, column=name)
            values.append(value)
        data.append(values)

    if len(data) < 2:
        raise ParseError("至少需要两行数据才能确定采样间隔", row=len(rows))
    arr = np.array(data)
    times = arr[:, 0]
    dt = times[1] - times[0]
    if not dt > 0:
        raise ParseError("时间必须严格递增", row=3, column="t")
    gaps = np.diff(times)
    bad = np.flatnonzero(np.abs(gaps - dt) > TIME_TOLERANCE)
    if bad.size:
        raise ParseError(f"时间间隔不均匀 (期望 {dt})", row=int(bad[0]) + 3, column="t")

    traj = Trajectory(arr[:, 1:], float(dt), float(times[0]))
    return TrajectoryFile(tuple(numeric), traj, tuple(labels) if has_label else None)


def read_poses(path: str) -> Trajectory:
    """读取任一轨迹文件的 (x, y, theta) 列"""
    return read_trajectory(path, POSE_COLUMNS).trajectory.poses()


def read_states(path: str) -> Trajectory:
    """读取真值、估计或预测文件的 5 个状态列"""
    f = read_trajectory(path, STATE_COLUMNS)
    return Trajectory(f.trajectory.values[:, :5], f.trajectory.dt, f.trajectory.t0)


def write_segment_report(path: Optional[str], records: Sequence[Mapping], stream=None):
    """JSON-lines 片段报告；path 为空时写到 stream"""
    text = "".join(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n" for rec in records)
    if path:
        _atomic_write(path, text)
    elif stream is not None:
        stream.write(text)


def write_metrics(path: str, metrics: Mapping[str, object]):
    lines = []
    for key, value in metrics.items():
        text = format_float(value) if isinstance(value, float) else str(value)
        lines.append(f"{key}={text}\n")
    _atomic_write(path, "".join(lines))


def write_json(path: str, data: Mapping):
    _atomic_write(path, json.dumps(data, ensure_ascii=False, indent=2, sort_keys=True) + "\n")
