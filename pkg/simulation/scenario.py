#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
环岛场景生成

路线由五段组成：直线驶近（LaneKeep）、入环过渡（Merge，转弯率线性升到 v/R）、
环内行驶（LaneKeep，w = v/R）、出环过渡（Merge，转弯率线性降到 0）、直线驶离
（LaneKeep）。先在局部坐标系里逐步滚动 CTRV，再整体做刚体变换，使第一个
环内样本落在入口方位角对应的环上、航向沿逆时针切线方向。
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from behavior.policy import PolicyKind, PolicyParams
from estimation.motion_model import (
    ITHETA,
    IV,
    IW,
    STATE_DIM,
    ProcessNoiseSpec,
    State5,
    _displacement,
    _wrap,
    ctrv_propagate,
)
from estimation.trajectory import MEASUREMENT_DIM, Trajectory
from estimation.ukf import MeasurementSpec
from utils.errors import ConfigurationError
from utils.logger import get_logger

logger = get_logger("scenario")

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class RoundaboutGeometry:
    center: Tuple[float, float] = (0.0, 0.0)
    ring_radius: float = 15.0
    leg_angles: Tuple[float, ...] = (0.0, 0.5 * np.pi, np.pi, 1.5 * np.pi)
    leg_length: float = 80.0
    transition_length: float = 40.0

    def __post_init__(self):
        if not (np.isfinite(self.ring_radius) and self.ring_radius > 0):
            raise ConfigurationError(f"环半径必须为正: {self.ring_radius}")
        if not self.leg_angles:
            raise ConfigurationError("至少需要一个路口")
        object.__setattr__(self, "leg_angles", tuple(float(a) for a in self.leg_angles))
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        bearings = np.sort(np.mod(self.leg_angles, TWO_PI))
        if len(bearings) > 1 and np.min(np.diff(np.append(bearings, bearings[0] + TWO_PI))) <= 0:
            raise ConfigurationError(f"路口方位角不能重复: {self.leg_angles}")
        if not (self.leg_length > 0 and self.transition_length > 0):
            raise ConfigurationError("路口长度和过渡段长度必须为正")
        if self.transition_length >= self.leg_length:
            raise ConfigurationError(
                f"过渡段长度 {self.transition_length} 必须小于路口长度 {self.leg_length}"
            )


@dataclass(frozen=True)
class Route:
    entry_leg: int
    exit_leg: int
    cruise_speed: float = 8.0
    dt: float = 0.1

    def __post_init__(self):
        if not (np.isfinite(self.cruise_speed) and self.cruise_speed > 0):
            raise ConfigurationError(f"巡航速度必须为正: {self.cruise_speed}")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ConfigurationError(f"采样间隔必须为正: {self.dt}")


@dataclass(frozen=True)
class LabeledTrajectory:
    """带逐样本策略标签与真值变点的状态轨迹"""

    states: Trajectory
    labels: Tuple[PolicyKind, ...]
    changepoints: Tuple[int, ...]

    def __len__(self) -> int:
        return len(self.states)

    def segments(self) -> List[Tuple[int, int, PolicyKind]]:
        """(起点, 终点(不含), 策略) 列表"""
        bounds = [0] + [tau + 1 for tau in self.changepoints] + [len(self)]
        return [(a, b, self.labels[a]) for a, b in zip(bounds[:-1], bounds[1:])]


Piece = Tuple[PolicyKind, PolicyParams, int]


def compose_policy_pieces(
    pieces: Sequence[Piece],
    dt: float,
    start: Optional[State5] = None,
) -> LabeledTrajectory:
    """
    按策略片段逐步滚动 CTRV 生成轨迹

    每个片段内第 m 个样本的转弯率为 w + w_dot * m * dt，速度为 v；
    样本 k+1 的位姿由样本 k 的状态走一步 CTRV 得到。

    Args:
        pieces: (策略, 参数, 样本数) 序列
        dt: 步长
        start: 起始位姿（只使用 x、y、theta），缺省为原点朝 +x

    Returns:
        LabeledTrajectory，变点为每段（除最后一段）的最后一个样本索引
    """
    if not pieces:
        raise ConfigurationError("至少需要一个策略片段")
    speeds, yaws, labels, changepoints = [], [], [], []
    for kind, params, count in pieces:
        if count < 1:
            raise ConfigurationError(f"片段样本数必须为正: {count}")
        if params.kind is not kind:
            raise ConfigurationError(f"片段参数类型 {params.kind.value} 与策略 {kind.value} 不一致")
        m = np.arange(count)
        speeds.append(np.full(count, params.v))
        yaws.append(params.w + params.w_dot * m * dt)
        labels.extend([kind] * count)
        changepoints.append(len(labels) - 1)
    changepoints.pop()

    v = np.concatenate(speeds)
    w = np.concatenate(yaws)
    n = v.shape[0]
    states = np.empty((n, STATE_DIM))
    states[:, IV] = v
    states[:, IW] = w
    states[0, :MEASUREMENT_DIM] = (0.0, 0.0, 0.0) if start is None else (start.x, start.y, start.theta)
    for k in range(n - 1):
        states[k + 1, :MEASUREMENT_DIM] = ctrv_propagate(states[k], dt)[:MEASUREMENT_DIM]

    return LabeledTrajectory(Trajectory(states, dt), tuple(labels), tuple(changepoints))


@dataclass(frozen=True)
class _RoutePlan:
    n_straight: int
    n_transition: int
    n_ring: int
    ring_yaw_rate: float
    entry_angle: float
    pieces: Tuple[Piece, ...]

    @property
    def ring_start(self) -> int:
        return self.n_straight + self.n_transition


def _plan_route(geom: RoundaboutGeometry, route: Route) -> _RoutePlan:
    n_legs = len(geom.leg_angles)
    for leg in (route.entry_leg, route.exit_leg):
        if not 0 <= leg < n_legs:
            raise ConfigurationError(f"路口编号 {leg} 超出范围 [0, {n_legs})")

    v, dt = route.cruise_speed, route.dt
    step = v * dt
    n_straight = int(round((geom.leg_length - geom.transition_length) / step))
    n_transition = int(round(geom.transition_length / step))
    if n_straight < 1 or n_transition < 1:
        raise ConfigurationError(
            f"路口几何过短：直线 {n_straight} 个样本，过渡 {n_transition} 个样本"
        )

    yaw = v / geom.ring_radius
    entry_angle = geom.leg_angles[route.entry_leg]
    sweep = float(np.mod(geom.leg_angles[route.exit_leg] - entry_angle, TWO_PI))
    if sweep <= 1e-12:
        sweep = TWO_PI
    n_ring = int(round(sweep / (yaw * dt)))
    if n_ring < 1:
        raise ConfigurationError(f"过渡段长于可用弧长：环内样本数为 {n_ring}")

    ramp = yaw / (n_transition * dt)
    lk, merge = PolicyKind.LANE_KEEP, PolicyKind.MERGE
    pieces = (
        (lk, PolicyParams(lk, v, 0.0), n_straight),
        (merge, PolicyParams(merge, v, yaw / n_transition, ramp), n_transition),
        (lk, PolicyParams(lk, v, yaw), n_ring),
        (merge, PolicyParams(merge, v, yaw * (1.0 - 1.0 / n_transition), -ramp), n_transition),
        (lk, PolicyParams(lk, v, 0.0), n_straight),
    )
    return _RoutePlan(n_straight, n_transition, n_ring, yaw, entry_angle, pieces)


def _ring_entry_pose(geom: RoundaboutGeometry, entry_angle: float) -> Tuple[complex, float]:
    center = complex(*geom.center)
    return center + geom.ring_radius * np.exp(1j * entry_angle), float(_wrap(entry_angle + 0.5 * np.pi))


def build_route_path(geom: RoundaboutGeometry, route: Route) -> LabeledTrajectory:
    """
    生成一条无噪声的环岛路线

    Args:
        geom: 环岛几何
        route: 入口、出口、巡航速度与步长

    Returns:
        LabeledTrajectory，真值变点依次为驶近、入环、环内、出环各段的最后一个样本

    Raises:
        ConfigurationError: 几何不可行
    """
    plan = _plan_route(geom, route)
    local = compose_policy_pieces(plan.pieces, route.dt)
    states = np.array(local.states.values)

    anchor = states[plan.ring_start]
    target_pos, target_heading = _ring_entry_pose(geom, plan.entry_angle)
    phi = target_heading - anchor[ITHETA]
    rotation = np.exp(1j * phi)
    xy = states[:, 0] + 1j * states[:, 1]
    placed = rotation * (xy - complex(anchor[0], anchor[1])) + target_pos
    states[:, 0] = placed.real
    states[:, 1] = placed.imag
    states[:, ITHETA] = _wrap(states[:, ITHETA] + phi)

    logger.info(
        f"生成路线 {route.entry_leg}->{route.exit_leg}: {states.shape[0]} 个样本，"
        f"环内 {plan.n_ring} 个样本"
    )
    return LabeledTrajectory(Trajectory(states, route.dt), local.labels, local.changepoints)


def entry_tangent_point(geom: RoundaboutGeometry, route: Route) -> Tuple[float, float, float]:
    """
    入环过渡段起点的位姿 (x, y, theta)

    从环上入口位姿出发，按入环过渡的转弯率序列逐步反推 CTRV。
    """
    plan = _plan_route(geom, route)
    pos, heading = _ring_entry_pose(geom, plan.entry_angle)
    v, dt = route.cruise_speed, route.dt
    for m in reversed(range(plan.n_transition)):
        w = plan.ring_yaw_rate * (m + 1) / plan.n_transition
        heading = heading - w * dt
        dx, dy = _displacement(heading, v, w, dt)
        pos = pos - complex(float(dx), float(dy))
    return float(pos.real), float(pos.imag), float(_wrap(heading))


def noise_seeds(seed: int) -> Tuple[int, int]:
    """从一个种子派生过程噪声与测量噪声两个独立种子"""
    children = np.random.SeedSequence(seed).spawn(2)
    return tuple(int(child.generate_state(1)[0]) for child in children)


def inject_process_noise(traj: LabeledTrajectory, spec: ProcessNoiseSpec, seed: int) -> LabeledTrajectory:
    """
    沿干净路线重新滚动一条带过程噪声的轨迹

    速度与转弯率跟随干净轨迹的逐步增量，再叠加累积的随机游走；
    位姿由带噪声的 CTRV 一步一步得到，速度不低于 0。

    Args:
        traj: 干净的路线
        spec: 过程噪声方差
        seed: 随机种子

    Returns:
        标签与变点不变的新轨迹
    """
    if spec.is_zero:
        return traj
    clean = traj.states.values
    dt = traj.states.dt
    n = clean.shape[0]
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((n - 1, 2)) * np.sqrt([spec.sigma_va, spec.sigma_vw])

    out = np.empty_like(clean)
    out[0] = clean[0]
    for k in range(n - 1):
        nxt = ctrv_propagate(out[k], dt, noise[k])
        nxt[IV] = max(nxt[IV] + clean[k + 1, IV] - clean[k, IV], 0.0)
        nxt[IW] += clean[k + 1, IW] - clean[k, IW]
        out[k + 1] = nxt

    return LabeledTrajectory(Trajectory(out, dt, traj.states.t0), traj.labels, traj.changepoints)


def observe(traj, meas: MeasurementSpec, seed: int) -> Trajectory:
    """
    对状态轨迹加测量噪声，得到 (x, y, theta) 测量序列

    Args:
        traj: LabeledTrajectory 或 5 列 Trajectory
        meas: 测量噪声方差
        seed: 随机种子

    Returns:
        3 列测量轨迹，航向已折叠
    """
    states = traj.states if isinstance(traj, LabeledTrajectory) else traj
    poses = np.array(states.values[:, :MEASUREMENT_DIM])
    rng = np.random.default_rng(seed)
    std = np.sqrt([meas.sigma_nx, meas.sigma_ny, meas.sigma_ntheta])
    poses = poses + rng.standard_normal(poses.shape) * std
    poses[:, 2] = _wrap(poses[:, 2])
    return Trajectory(poses, states.dt, states.t0)
