#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
评估指标

包括状态估计的横向、纵向与欧氏误差（平均值与最大值）、逐分量 RMSE，以及分段结果的逐样本
标签错误率和变点匹配数。
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Dict, List, Sequence

import numpy as np

from estimation.motion_model import _wrap
from estimation.trajectory import EstimateTrajectory, Trajectory
from utils.errors import AlignmentError, DataError


@dataclass(frozen=True)
class MetricsReport:
    avg_lat_err: float
    max_lat_err: float
    avg_lon_err: float
    max_lon_err: float
    avg_euclid: float
    max_euclid: float
    rmse_x: float
    rmse_y: float
    rmse_theta: float
    rmse_v: float
    rmse_w: float
    burn_in: int
    n_samples: int

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)


def _state_values(series) -> np.ndarray:
    if isinstance(series, EstimateTrajectory):
        return series.means
    if isinstance(series, Trajectory):
        return series.values
    return np.asarray(series, dtype=float)


def compute_metrics(truth, estimate, burn_in: int = 0) -> MetricsReport:
    """
    计算估计相对真值的误差指标

    Args:
        truth: 5 列真值状态
        estimate: EstimateTrajectory 或 5 列状态
        burn_in: 跳过的起始样本数

    Returns:
        MetricsReport

    Raises:
        AlignmentError: 长度或列数不一致
        DataError: 跳过后没有剩余样本
    """
    truth_values = _state_values(truth)
    est_values = _state_values(estimate)
    if truth_values.shape[0] != est_values.shape[0]:
        raise AlignmentError(f"真值 {truth_values.shape[0]} 行与估计 {est_values.shape[0]} 行不一致")
    if truth_values.shape[1] < 5 or est_values.shape[1] < 5:
        raise AlignmentError("真值与估计都需要 5 个状态分量")
    if burn_in < 0 or burn_in >= truth_values.shape[0]:
        raise DataError(f"burn-in {burn_in} 超出样本范围 {truth_values.shape[0]}")

    err = est_values[burn_in:, :5] - truth_values[burn_in:, :5]
    err[:, 2] = _wrap(err[:, 2])
    rmse = np.sqrt(np.mean(err ** 2, axis=0))
    # 横向取 y 误差，纵向取 x 误差
    lat = np.abs(err[:, 1])
    lon = np.abs(err[:, 0])
    euclid = np.hypot(err[:, 0], err[:, 1])
    return MetricsReport(
        avg_lat_err=float(lat.mean()),
        max_lat_err=float(lat.max()),
        avg_lon_err=float(lon.mean()),
        max_lon_err=float(lon.max()),
        avg_euclid=float(euclid.mean()),
        max_euclid=float(euclid.max()),
        rmse_x=float(rmse[0]),
        rmse_y=float(rmse[1]),
        rmse_theta=float(rmse[2]),
        rmse_v=float(rmse[3]),
        rmse_w=float(rmse[4]),
        burn_in=int(burn_in),
        n_samples=int(err.shape[0]),
    )


def average_reports(reports: Sequence[MetricsReport]) -> MetricsReport:
    """多次试验的逐项平均"""
    if not reports:
        raise DataError("没有可平均的指标")
    values = {}
    for f in fields(MetricsReport):
        column = [getattr(r, f.name) for r in reports]
        if f.name in ("burn_in", "n_samples"):
            values[f.name] = int(round(float(np.mean(column))))
        else:
            values[f.name] = float(np.mean(column))
    return MetricsReport(**values)


def label_error_rate(predicted: Sequence, truth: Sequence) -> float:
    """逐样本策略标签不一致的比例"""
    if len(predicted) != len(truth):
        raise AlignmentError(f"标签长度不一致: {len(predicted)} vs {len(truth)}")
    if not truth:
        raise DataError("标签序列为空")
    return sum(p != t for p, t in zip(predicted, truth)) / len(truth)


def match_changepoints(detected: Sequence[int], truth: Sequence[int], tolerance: int) -> int:
    """
    容差内一一匹配的真值变点个数（按距离从近到远贪心匹配）
    """
    pairs: List[tuple] = sorted(
        (abs(d - t), i, j)
        for i, t in enumerate(truth)
        for j, d in enumerate(detected)
        if abs(d - t) <= tolerance
    )
    used_truth, used_detected = set(), set()
    for _, i, j in pairs:
        if i not in used_truth and j not in used_detected:
            used_truth.add(i)
            used_detected.add(j)
    return len(used_truth)
