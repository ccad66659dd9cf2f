#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
驾驶策略：车道保持（LaneKeep）与汇入/汇出（Merge）

两种策略都是对 CTRV 的约束：LaneKeep 保持 (v, w) 不变，Merge 的转弯率
随时间线性变化 w(t) = w0 + w_dot * t。片段拟合先把策略从原点展开，再用
闭式刚体对齐（旋转 + 平移）把展开结果贴到观测上，三个通道的残差平方和
给出高斯对数似然，BIC 惩罚项为 k/2 * log(n)。
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np
import scipy.optimize

from estimation.motion_model import IW, State5, _wrap, ctrv_step
from estimation.trajectory import Trajectory
from utils.errors import ConfigurationError, DataError
from utils.logger import get_logger

logger = get_logger("policy")

_LOG_2PI = float(np.log(2.0 * np.pi))


class PolicyKind(Enum):
    LANE_KEEP = "lane-keep"
    MERGE = "merge"

    @property
    def n_params(self) -> int:
        return 2 if self is PolicyKind.LANE_KEEP else 3

    @classmethod
    def parse(cls, label: str) -> "PolicyKind":
        try:
            return cls(label)
        except ValueError as e:
            raise DataError(f"未知策略标签: {label}") from e


@dataclass(frozen=True)
class PolicyParams:
    """策略参数；LaneKeep 的 w_dot 恒为 0，Merge 的 w 表示起始转弯率 w0"""

    kind: PolicyKind
    v: float
    w: float
    w_dot: float = 0.0

    def __post_init__(self):
        if self.kind is PolicyKind.LANE_KEEP and self.w_dot != 0.0:
            raise ConfigurationError("LaneKeep 参数不能包含 w_dot")
        if not np.isfinite([self.v, self.w, self.w_dot]).all():
            raise ConfigurationError(f"策略参数非有限: {self}")

    def as_vector(self) -> np.ndarray:
        if self.kind is PolicyKind.LANE_KEEP:
            return np.array([self.v, self.w])
        return np.array([self.v, self.w, self.w_dot])

    @classmethod
    def from_vector(cls, kind: PolicyKind, vector) -> "PolicyParams":
        vector = [float(x) for x in vector]
        if kind is PolicyKind.LANE_KEEP:
            return cls(kind, abs(vector[0]), vector[1])
        return cls(kind, abs(vector[0]), vector[1], vector[2])

    def yaw_rate_at(self, step: int, dt: float) -> float:
        return self.w + self.w_dot * step * dt

    def to_dict(self) -> Dict[str, float]:
        if self.kind is PolicyKind.LANE_KEEP:
            return {"v": self.v, "w": self.w}
        return {"v": self.v, "w0": self.w, "w_dot": self.w_dot}


@dataclass(frozen=True)
class LikelihoodSpec:
    """观测似然的公共标准差（三个通道相同）"""

    sigma_lik: float = 0.1

    def __post_init__(self):
        if not (np.isfinite(self.sigma_lik) and self.sigma_lik > 0):
            raise ConfigurationError(f"sigma_lik 必须为正，当前为 {self.sigma_lik}")


@dataclass(frozen=True)
class PolicyFit:
    policy: PolicyKind
    params: PolicyParams
    log_likelihood: float
    bic_evidence: float
    sse: Tuple[float, float, float]
    n_samples: int
    degenerate: bool = False

    @property
    def total_sse(self) -> float:
        return float(sum(self.sse))


def forward_simulate(
    policy: PolicyKind,
    params: PolicyParams,
    start: State5,
    n_steps: int,
    dt: float,
    yaw_limit: Optional[float] = None,
) -> Trajectory:
    """
    按策略从起点展开 n_steps 步（结果不含起点）

    Args:
        policy: 策略类型
        params: 策略参数（起点自身的 v、w 会被参数覆盖）
        start: 起始状态
        n_steps: 步数
        dt: 步长
        yaw_limit: 可选的 |w| 上限

    Returns:
        n_steps 行的 5 列状态轨迹，时间从 dt 开始
    """
    if policy is not params.kind:
        raise ConfigurationError(f"参数类型 {params.kind.value} 与策略 {policy.value} 不一致")
    if n_steps < 1:
        raise ConfigurationError(f"展开步数必须为正: {n_steps}")

    def yaw(step):
        w = params.yaw_rate_at(step, dt)
        if yaw_limit is not None:
            w = float(np.clip(w, -yaw_limit, yaw_limit))
        return w

    state = start.as_array()
    state[3] = params.v
    state[IW] = yaw(0)
    out = np.empty((n_steps, 5))
    for m in range(n_steps):
        state = ctrv_step(state, dt)
        state[IW] = yaw(m + 1)
        out[m] = state
    return Trajectory(out, dt, dt)


# ---------------------------------------------------------------------------
# 批量展开与对齐（候选片段在第 0 维并行）
# ---------------------------------------------------------------------------

def rollout_unit(yaw_rates: np.ndarray, dt: float):
    """
    从原点、航向 0 出发的单位速度展开

    Args:
        yaw_rates: (C, L) 第 m 步使用的转弯率
        dt: 步长

    Returns:
        (q, psi)：复数位置与航向，均为 (C, L)，第 0 列为原点
    """
    delta = yaw_rates[:, :-1] * dt
    psi = np.zeros_like(yaw_rates)
    psi[:, 1:] = np.cumsum(delta, axis=1)
    # CTRV 单步位移 v*dt*sinc(delta/2)*exp(i*(psi + delta/2))，在 w=0 处连续
    steps = dt * np.sinc(delta / (2.0 * np.pi)) * np.exp(1j * (psi[:, :-1] + 0.5 * delta))
    q = np.zeros(yaw_rates.shape, dtype=complex)
    q[:, 1:] = np.cumsum(steps, axis=1)
    return q, psi


def aligned_sse(q, psi, z, theta, mask, scale=None):
    """
    闭式刚体对齐后的三通道残差平方和

    Args:
        q, psi: 单位速度展开的位置（复数）与航向，(C, L)
        z, theta: 观测位置（复数）与航向，(C, L)
        mask: (C, L) 有效样本
        scale: 可选速度 (C,)；为 None 时取最小二乘尺度

    Returns:
        (sse_x, sse_y, sse_theta, speed)，均为 (C,)
    """
    m = mask.astype(float)
    count = m.sum(axis=1)
    z_bar = (z * m).sum(axis=1) / count
    q_bar = (q * m).sum(axis=1) / count
    z_c = (z - z_bar[:, None]) * m
    q_c = (q - q_bar[:, None]) * m

    cross = (z_c * np.conj(q_c)).sum(axis=1)
    if scale is None:
        norm = (np.abs(q_c) ** 2).sum(axis=1)
        scale = np.where(norm > 0, np.abs(cross) / np.where(norm > 0, norm, 1.0), 0.0)
    scale = np.abs(np.asarray(scale, dtype=float))

    heading_term = (np.exp(1j * (theta - psi)) * m).sum(axis=1)
    rotation = np.exp(1j * np.angle(scale * cross + heading_term))
    shift = z_bar - rotation * scale * q_bar

    fitted = rotation[:, None] * scale[:, None] * q + shift[:, None]
    res = (z - fitted) * m
    head = _wrap(theta - psi - np.angle(rotation)[:, None]) * m
    return (res.real ** 2).sum(axis=1), (res.imag ** 2).sum(axis=1), (head ** 2).sum(axis=1), scale


def gaussian_log_likelihood(sse_total, n_samples, spec: LikelihoodSpec):
    """三通道各 n 个样本、标准差 sigma_lik 的高斯对数似然"""
    var = spec.sigma_lik ** 2
    return -1.5 * n_samples * (_LOG_2PI + np.log(var)) - 0.5 * sse_total / var


def bic_penalty(policy: PolicyKind, n_samples) -> float:
    return 0.5 * policy.n_params * np.log(n_samples)


# ---------------------------------------------------------------------------
# 非线性拟合
# ---------------------------------------------------------------------------

def _yaw_schedule(params_vector, n, dt):
    steps = np.arange(n) * dt
    if len(params_vector) == 2:
        return np.full(n, params_vector[1])
    return params_vector[1] + params_vector[2] * steps


def _segment_sse(params_vector, z, theta, dt):
    n = z.shape[0]
    q, psi = rollout_unit(_yaw_schedule(params_vector, n, dt)[None, :], dt)
    sx, sy, st, _ = aligned_sse(
        q, psi, z[None, :], theta[None, :], np.ones((1, n), dtype=bool),
        scale=np.array([abs(params_vector[0])]),
    )
    return float(sx[0]), float(sy[0]), float(st[0])


def _objective(params_vector, z, theta, dt):
    return sum(_segment_sse(params_vector, z, theta, dt))


def _chord_seeds(z, dt):
    """用较长基线的弦估计速度、转弯率及其变化率的初值"""
    n = z.shape[0]
    lag = max(1, n // 8)
    chords = z[lag:] - z[:-lag]
    speed = float(np.median(np.abs(chords))) / (lag * dt)
    if chords.shape[0] < 3:
        return speed, 0.0, None
    angles = np.unwrap(np.angle(chords))
    times = (np.arange(chords.shape[0]) + 0.5 * lag) * dt
    w_lin = float(np.polyfit(times, angles, 1)[0])
    quad = np.polyfit(times, angles, 2)
    w_dot = float(2.0 * quad[0])
    w0 = float(quad[1])
    return speed, w_lin, (w0, w_dot)


def _nelder_mead(x0, steps, z, theta, dt):
    x0 = np.asarray(x0, dtype=float)
    simplex = np.vstack([x0] + [x0 + np.eye(len(x0))[i] * steps[i] for i in range(len(x0))])
    result = scipy.optimize.minimize(
        _objective,
        x0,
        args=(z, theta, dt),
        method="Nelder-Mead",
        options={
            "initial_simplex": simplex,
            "xatol": 1e-10,
            "fatol": 1e-12,
            "maxiter": 4000 * len(x0),
            "maxfev": 8000 * len(x0),
        },
    )
    best = np.asarray(result.x, dtype=float)
    value = float(result.fun)
    start_value = _objective(x0, z, theta, dt)
    if start_value < value:
        return x0, start_value
    return best, value


def _build_fit(policy, vector, z, theta, dt, spec, degenerate=False) -> PolicyFit:
    n = z.shape[0]
    sse = _segment_sse(vector, z, theta, dt)
    ll = float(gaussian_log_likelihood(sum(sse), n, spec))
    params = PolicyParams.from_vector(policy, vector)
    return PolicyFit(
        policy=policy,
        params=params,
        log_likelihood=ll,
        bic_evidence=ll - bic_penalty(policy, n),
        sse=sse,
        n_samples=n,
        degenerate=degenerate,
    )


def _fit_both(segment: Trajectory, spec: LikelihoodSpec) -> Dict[PolicyKind, PolicyFit]:
    values = segment.values
    if values.shape[0] < 2:
        raise DataError(f"片段至少需要 2 个样本，当前为 {values.shape[0]}")
    dt = segment.dt
    z = values[:, 0] + 1j * values[:, 1]
    theta = values[:, 2]

    if np.ptp(values[:, 0]) == 0 and np.ptp(values[:, 1]) == 0 and np.ptp(_wrap(theta - theta[0])) == 0:
        logger.info(f"片段 {values.shape[0]} 个样本完全相同，按静止退化处理")
        return {
            PolicyKind.LANE_KEEP: _build_fit(PolicyKind.LANE_KEEP, [0.0, 0.0], z, theta, dt, spec, True),
            PolicyKind.MERGE: _build_fit(PolicyKind.MERGE, [0.0, 0.0, 0.0], z, theta, dt, spec, True),
        }

    speed, w_lin, quad = _chord_seeds(z, dt)
    w_step = max(0.02, 0.25 * abs(w_lin))

    # LaneKeep：在弦估计附近做粗网格，再用 Nelder-Mead 精修
    grid = [(speed, w_lin + k * w_step) for k in (-2, -1, 0, 1, 2)]
    lk_seed = min(grid, key=lambda x: _objective(x, z, theta, dt))
    lk_vector, lk_value = _nelder_mead(lk_seed, [max(0.1, 0.05 * speed), 0.05], z, theta, dt)

    # Merge：以 LaneKeep 最优解（w_dot = 0）为种子之一，保证嵌套关系
    seeds = [np.array([lk_vector[0], lk_vector[1], 0.0])]
    if quad is not None:
        seeds.append(np.array([speed, quad[0], quad[1]]))
    merge_seed = min(seeds, key=lambda x: _objective(x, z, theta, dt))
    merge_vector, merge_value = _nelder_mead(merge_seed, [max(0.1, 0.05 * speed), 0.05, 0.05], z, theta, dt)
    if merge_value > lk_value:
        merge_vector = np.array([lk_vector[0], lk_vector[1], 0.0])

    return {
        PolicyKind.LANE_KEEP: _build_fit(PolicyKind.LANE_KEEP, lk_vector, z, theta, dt, spec),
        PolicyKind.MERGE: _build_fit(PolicyKind.MERGE, merge_vector, z, theta, dt, spec),
    }


def fit_policy(segment: Trajectory, policy: PolicyKind, spec: LikelihoodSpec = LikelihoodSpec()) -> PolicyFit:
    """
    策略参数的最大似然拟合

    Args:
        segment: 3 列位姿片段（至少 2 个样本）
        policy: 策略类型
        spec: 似然参数

    Returns:
        PolicyFit
    """
    return _fit_both(segment, spec)[policy]


def classify_segment(
    segment: Trajectory,
    spec: LikelihoodSpec = LikelihoodSpec(),
) -> Tuple[PolicyKind, Dict[PolicyKind, PolicyFit]]:
    """
    按 BIC 证据选择片段的策略，相等时取 LaneKeep

    Returns:
        (最优策略, 两种策略的拟合结果)
    """
    fits = _fit_both(segment, spec)
    lk = fits[PolicyKind.LANE_KEEP]
    merge = fits[PolicyKind.MERGE]
    best = PolicyKind.MERGE if merge.bic_evidence > lk.bic_evidence else PolicyKind.LANE_KEEP
    logger.debug(
        f"片段分类: {best.value} (LaneKeep BIC={lk.bic_evidence:.3f}, Merge BIC={merge.bic_evidence:.3f})"
    )
    return best, fits
