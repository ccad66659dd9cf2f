#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
预测流水线：UKF 滤波 -> 在线分段 -> 当前策略识别 -> 按策略展开未来轨迹
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from behavior.changepoint import SegmentLengthPrior, ViterbiPath, detect_changepoints
from behavior.policy import (
    LikelihoodSpec,
    PolicyFit,
    PolicyKind,
    PolicyParams,
    classify_segment,
    forward_simulate,
)
from estimation.motion_model import IV, ProcessNoiseSpec, State5
from estimation.trajectory import MEASUREMENT_DIM, EstimateTrajectory, Trajectory
from estimation.ukf import GaussianState, MeasurementSpec, UtConfig, filter_trajectory
from simulation.scenario import LabeledTrajectory, RoundaboutGeometry
from utils.errors import ConfigurationError, DataError, HorizonRangeError, PipelineError
from utils.logger import get_logger

logger = get_logger("pipeline")


@dataclass(frozen=True)
class PredictionConfig:
    horizon: float = 2.0
    dt: float = 0.1
    use_filter: bool = True

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ConfigurationError(f"预测步长必须为正: {self.dt}")
        if not (np.isfinite(self.horizon) and self.horizon > 0):
            raise ConfigurationError(f"预测时域必须为正: {self.horizon}")
        if self.n_steps < 1:
            raise ConfigurationError(f"预测时域 {self.horizon} 不足一个步长 {self.dt}")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass(frozen=True)
class ModuleConfigs:
    """各模块的参数集合"""

    process: ProcessNoiseSpec = ProcessNoiseSpec()
    measurement: MeasurementSpec = MeasurementSpec()
    ut: UtConfig = UtConfig()
    prior: SegmentLengthPrior = SegmentLengthPrior()
    likelihood: LikelihoodSpec = LikelihoodSpec()
    geometry: Optional[RoundaboutGeometry] = None
    init: Optional[GaussianState] = None
    prune_after: int = 1000
    prune_nats: float = 40.0
    max_candidates: int = 512


@dataclass
class PredictionResult:
    current_policy: PolicyKind
    current_fit: PolicyFit
    estimated_state: GaussianState
    predicted: Trajectory
    path: ViterbiPath
    estimates: EstimateTrajectory
    last_segment_fits: Dict[PolicyKind, PolicyFit] = field(default_factory=dict)

    @property
    def last_index(self) -> int:
        return len(self.estimates) - 1


def _rollout(policy, fit, estimate, cfg, modules, t0, segment_dt, capped):
    """
    从估计状态按策略展开

    速度与起始位姿取滤波估计；转弯率取该策略在末段上的拟合：
    LaneKeep 沿用拟合的常转弯率，Merge 从末段最后一个样本处的转弯率
    继续按拟合的 w_dot 变化。capped 为真且给出环道几何时限制 |w| <= v / R。
    """
    mean = estimate.mean
    v = abs(float(mean[IV]))
    if policy is PolicyKind.MERGE:
        w = fit.params.yaw_rate_at(fit.n_samples - 1, segment_dt)
        params = PolicyParams(policy, v, w, fit.params.w_dot)
    else:
        params = PolicyParams(policy, v, fit.params.w)
    yaw_limit = None
    if capped and modules.geometry is not None:
        yaw_limit = v / modules.geometry.ring_radius
    start = State5.from_array(mean)
    predicted = forward_simulate(policy, params, start, cfg.n_steps, cfg.dt, yaw_limit)
    return Trajectory(predicted.values, cfg.dt, t0)


def predict_trajectory(
    z_series: Trajectory,
    cfg: PredictionConfig = PredictionConfig(),
    modules: ModuleConfigs = ModuleConfigs(),
) -> PredictionResult:
    """
    对测量序列做完整的预测

    Args:
        z_series: 3 列测量序列
        cfg: 预测配置
        modules: 各模块参数

    Returns:
        PredictionResult，predicted 的第 k 行对应最后一个测量之后 (k+1)*dt 秒

    Raises:
        PipelineError: 测量数少于最小片段长度
    """
    if z_series.dim != MEASUREMENT_DIM:
        raise DataError(f"测量应为 {MEASUREMENT_DIM} 列，当前为 {z_series.dim}")
    if len(z_series) < modules.prior.min_len:
        raise PipelineError(f"测量数 {len(z_series)} 少于最小片段长度 {modules.prior.min_len}")

    estimates = filter_trajectory(z_series, modules.init, modules.process, modules.measurement, modules.ut)
    observations = estimates.poses() if cfg.use_filter else z_series
    path = detect_changepoints(
        observations,
        modules.prior,
        modules.likelihood,
        prune_after=modules.prune_after,
        prune_nats=modules.prune_nats,
        max_candidates=modules.max_candidates,
    )

    start, stop = path.segment_bounds[-1]
    policy, fits = classify_segment(observations.window(start, stop), modules.likelihood)
    if policy is not path.segment_policies[-1]:
        logger.info(
            f"末段重新拟合后策略由 {path.segment_policies[-1].value} 变为 {policy.value}"
        )
    estimate = estimates[len(estimates) - 1]
    t0 = z_series.t0 + (len(z_series) - 1) * z_series.dt + cfg.dt
    predicted = _rollout(
        policy, fits[policy], estimate, cfg, modules, t0, z_series.dt, capped=policy is PolicyKind.MERGE,
    )
    logger.info(f"当前策略 {policy.value}，展开 {cfg.n_steps} 步")

    return PredictionResult(
        current_policy=policy,
        current_fit=fits[policy],
        estimated_state=estimate,
        predicted=predicted,
        path=path,
        estimates=estimates,
        last_segment_fits=fits,
    )


def rollout_policy(
    result: PredictionResult,
    policy: PolicyKind,
    cfg: PredictionConfig = PredictionConfig(),
    modules: ModuleConfigs = ModuleConfigs(),
) -> Trajectory:
    """在指定策略（可与识别结果不同）下从同一估计状态展开"""
    fit = result.last_segment_fits.get(policy)
    if fit is None:
        raise DataError(f"缺少策略 {policy.value} 的拟合结果")
    capped = policy is PolicyKind.MERGE and policy is result.current_policy
    return _rollout(
        policy, fit, result.estimated_state, cfg, modules, result.predicted.t0, result.estimates.dt, capped,
    )


def evaluate_prediction(result: PredictionResult, truth, at: int) -> np.ndarray:
    """
    逐步欧氏误差：predicted[k] 对比 truth[at + 1 + k]

    Args:
        result: 预测结果
        truth: LabeledTrajectory 或状态 Trajectory
        at: 最后一个测量在真值中的索引

    Raises:
        HorizonRangeError: 真值长度不足
    """
    states = truth.states if isinstance(truth, LabeledTrajectory) else truth
    n = len(result.predicted)
    if at < 0 or at + n >= len(states):
        raise HorizonRangeError(f"真值长度 {len(states)} 不足以覆盖索引 {at} 之后的 {n} 步")
    diff = result.predicted.values[:, :2] - states.values[at + 1:at + 1 + n, :2]
    return np.hypot(diff[:, 0], diff[:, 1])
