#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
恒定转弯率与速度（CTRV）运动模型

状态向量为 [x, y, theta, v, w]，theta 始终折叠到 (-pi, pi]。
所有数组函数都支持在前导维度上批量计算，供 sigma 点传播使用。
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from utils.errors import ConfigurationError, DomainError

IX, IY, ITHETA, IV, IW = 0, 1, 2, 3, 4
STATE_DIM = 5
NOISE_DIM = 2

# 低于该转弯率时使用直线分支
YAW_RATE_EPS = 1e-6


def _wrap(angle):
    wrapped = np.mod(np.asarray(angle, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    return np.where(wrapped <= -np.pi, wrapped + 2.0 * np.pi, wrapped)


def wrap_angle(angle):
    """
    将角度折叠到 (-pi, pi]

    Args:
        angle: 标量或数组

    Returns:
        与输入形状相同的折叠结果

    Raises:
        DomainError: 输入包含 NaN 或无穷大
    """
    arr = np.asarray(angle, dtype=float)
    if not np.isfinite(arr).all():
        raise DomainError(f"无法折叠非有限角度: {angle}")
    wrapped = _wrap(arr)
    return float(wrapped) if wrapped.ndim == 0 else wrapped


@dataclass(frozen=True)
class State5:
    """CTRV 状态"""

    x: float
    y: float
    theta: float
    v: float
    w: float

    def __post_init__(self):
        values = (self.x, self.y, self.theta, self.v, self.w)
        if not np.isfinite(values).all():
            raise DomainError(f"状态包含非有限值: {values}")
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta, self.v, self.w], dtype=float)

    @classmethod
    def from_array(cls, values) -> "State5":
        arr = np.asarray(values, dtype=float).reshape(-1)
        if arr.shape[0] != STATE_DIM:
            raise DomainError(f"状态维度应为 {STATE_DIM}，当前为 {arr.shape[0]}")
        return cls(*(float(v) for v in arr))


@dataclass(frozen=True)
class ProcessNoiseSpec:
    """加速度与角加速度白噪声的方差"""

    sigma_va: float = 0.01
    sigma_vw: float = 0.01

    def __post_init__(self):
        for name in ("sigma_va", "sigma_vw"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ConfigurationError(f"{name} 必须是非负有限数，当前为 {value}")

    def covariance(self) -> np.ndarray:
        return np.diag([self.sigma_va, self.sigma_vw])

    @property
    def is_zero(self) -> bool:
        return self.sigma_va == 0 and self.sigma_vw == 0


@dataclass(frozen=True)
class NoiseMapG:
    """噪声输入到状态的映射矩阵（依赖步长和航向）"""

    dt: float
    theta: float

    def as_matrix(self) -> np.ndarray:
        half = 0.5 * self.dt ** 2
        return np.array([
            [half * np.cos(self.theta), 0.0],
            [half * np.sin(self.theta), 0.0],
            [0.0, half],
            [self.dt, 0.0],
            [0.0, self.dt],
        ])


def _displacement(theta, v, w, dt):
    turning = np.abs(w) > YAW_RATE_EPS
    safe_w = np.where(turning, w, 1.0)
    heading_end = theta + w * dt
    dx = np.where(turning, v / safe_w * (np.sin(heading_end) - np.sin(theta)), v * np.cos(theta) * dt)
    dy = np.where(turning, v / safe_w * (np.cos(theta) - np.cos(heading_end)), v * np.sin(theta) * dt)
    return dx, dy


def ctrv_propagate(states: np.ndarray, dt: float, noise: np.ndarray = None) -> np.ndarray:
    """
    批量 CTRV 一步传播

    Args:
        states: (..., 5) 状态数组
        dt: 步长（秒），必须为正
        noise: 可选 (..., 2) 噪声样本 [v_a, v_w]，在起始航向下叠加

    Returns:
        (..., 5) 新状态，航向已折叠
    """
    if not (np.isfinite(dt) and dt > 0):
        raise DomainError(f"步长必须为正有限数: {dt}")
    states = np.asarray(states, dtype=float)
    if not np.isfinite(states).all():
        raise DomainError("状态包含非有限值")

    theta = states[..., ITHETA]
    v = states[..., IV]
    w = states[..., IW]
    dx, dy = _displacement(theta, v, w, dt)

    out = np.array(states, copy=True)
    out[..., IX] += dx
    out[..., IY] += dy
    out[..., ITHETA] = theta + w * dt

    if noise is not None:
        noise = np.asarray(noise, dtype=float)
        half = 0.5 * dt ** 2
        accel = noise[..., 0]
        yaw_accel = noise[..., 1]
        out[..., IX] += half * np.cos(theta) * accel
        out[..., IY] += half * np.sin(theta) * accel
        out[..., ITHETA] += half * yaw_accel
        out[..., IV] += dt * accel
        out[..., IW] += dt * yaw_accel

    if not np.isfinite(out).all():
        raise DomainError("CTRV 传播结果非有限")
    out[..., ITHETA] = _wrap(out[..., ITHETA])
    return out


StateLike = Union[State5, np.ndarray]


def ctrv_step(s: StateLike, dt: float) -> StateLike:
    """无噪声 CTRV 一步传播，返回与输入同类型的结果"""
    if isinstance(s, State5):
        return State5.from_array(ctrv_propagate(s.as_array(), dt))
    return ctrv_propagate(s, dt)


def ctrv_step_noisy(s: StateLike, noise, dt: float) -> StateLike:
    """带噪声 CTRV 一步传播；noise 为 [v_a, v_w]"""
    if isinstance(s, State5):
        return State5.from_array(ctrv_propagate(s.as_array(), dt, np.asarray(noise, dtype=float)))
    return ctrv_propagate(s, dt, noise)


def process_cov(theta: float, dt: float, spec: ProcessNoiseSpec) -> np.ndarray:
    """
    过程噪声协方差 Q = G diag(sigma_va, sigma_vw) G^T

    Args:
        theta: 起始航向
        dt: 步长
        spec: 噪声方差

    Returns:
        5x5 对称半正定矩阵
    """
    g = NoiseMapG(dt, theta).as_matrix()
    q = g @ spec.covariance() @ g.T
    return 0.5 * (q + q.T)
