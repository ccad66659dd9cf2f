#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
各处理阶段共用的等间隔时间序列容器
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from utils.errors import DataError, DomainError

MEASUREMENT_DIM = 3


@dataclass(frozen=True)
class Trajectory:
    """
    从 ``t0`` 开始每隔 ``dt`` 秒一个样本

    ``values`` 每行一个样本；状态为 5 列 (x, y, theta, v, w)，
    测量与位姿为 3 列 (x, y, theta)。
    """

    values: np.ndarray
    dt: float
    t0: float = 0.0

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2:
            raise DataError(f"轨迹数据维度错误: {arr.shape}")
        if not np.isfinite(arr).all():
            raise DomainError("轨迹数据包含非有限值")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise DataError(f"采样间隔必须为正: {self.dt}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "t0", float(self.t0))

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self))

    def window(self, start: int, stop: int) -> "Trajectory":
        """取 [start, stop) 区间的样本，保留时间轴"""
        return Trajectory(self.values[start:stop], self.dt, self.t0 + start * self.dt)

    def poses(self) -> "Trajectory":
        """(x, y, theta) 三列"""
        return Trajectory(self.values[:, :MEASUREMENT_DIM], self.dt, self.t0)


@dataclass(frozen=True)
class EstimateTrajectory:
    """一次滤波得到的后验均值、协方差与折叠后的新息"""

    means: np.ndarray
    covs: np.ndarray
    innovations: np.ndarray
    dt: float
    t0: float = 0.0

    def __len__(self) -> int:
        return self.means.shape[0]

    def __getitem__(self, index: int):
        from estimation.ukf import GaussianState

        return GaussianState(self.means[index], self.covs[index])

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self))

    def poses(self) -> Trajectory:
        return Trajectory(self.means[:, :MEASUREMENT_DIM], self.dt, self.t0)

    def variances(self) -> np.ndarray:
        return np.diagonal(self.covs, axis1=1, axis2=2).copy()
