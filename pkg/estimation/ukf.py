#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
无迹卡尔曼滤波（UKF）

预测步对 [状态, 过程噪声] 的 7 维增广向量做无迹变换；更新步使用加性测量噪声。
航向分量的均值按圆均值计算，残差一律折叠到 (-pi, pi]。
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from estimation.motion_model import (
    ITHETA,
    IV,
    IW,
    NOISE_DIM,
    STATE_DIM,
    ProcessNoiseSpec,
    _wrap,
    ctrv_propagate,
)
from estimation.trajectory import MEASUREMENT_DIM, EstimateTrajectory, Trajectory
from utils.errors import (
    AlignmentError,
    ConfigurationError,
    DomainError,
    FilterStepError,
    NumericalError,
    PropagationError,
    SquareRootError,
)
from utils.logger import get_logger

logger = get_logger("ukf")

# 抖动修复：首次加入 1e-9 * max(trace / n, 1)，之后每次放大 10 倍，最多 3 次
JITTER_SCALE = 1e-9
JITTER_ESCALATIONS = 3


@dataclass(frozen=True)
class UtConfig:
    """缩放无迹变换参数；kappa 为 None 时取 3 - n"""

    alpha: float = 1e-3
    beta: float = 2.0
    kappa: Optional[float] = None

    def __post_init__(self):
        if not (0 < self.alpha <= 1):
            raise ConfigurationError(f"alpha 必须位于 (0, 1]，当前为 {self.alpha}")
        if not np.isfinite(self.beta):
            raise ConfigurationError(f"beta 必须是有限数，当前为 {self.beta}")
        if self.kappa is not None and not np.isfinite(self.kappa):
            raise ConfigurationError(f"kappa 必须是有限数，当前为 {self.kappa}")

    def kappa_for(self, n: int) -> float:
        return 3.0 - n if self.kappa is None else self.kappa

    def lambda_for(self, n: int) -> float:
        return self.alpha ** 2 * (n + self.kappa_for(n)) - n


@dataclass(frozen=True)
class MeasurementSpec:
    """测量噪声方差 (x, y, theta)"""

    sigma_nx: float = 0.25
    sigma_ny: float = 0.25
    sigma_ntheta: float = 0.25

    def __post_init__(self):
        for name in ("sigma_nx", "sigma_ny", "sigma_ntheta"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ConfigurationError(f"{name} 必须是非负有限数，当前为 {value}")

    def covariance(self) -> np.ndarray:
        return np.diag([self.sigma_nx, self.sigma_ny, self.sigma_ntheta])


@dataclass(frozen=True)
class GaussianState:
    """均值与协方差"""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        cov = np.array(self.cov, dtype=float)
        n = mean.shape[0]
        if cov.shape != (n, n):
            raise DomainError(f"协方差形状 {cov.shape} 与均值维度 {n} 不匹配")
        if not (np.isfinite(mean).all() and np.isfinite(cov).all()):
            raise DomainError("高斯状态包含非有限值")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", 0.5 * (cov + cov.T))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class SigmaSet:
    points: np.ndarray
    wm: np.ndarray
    wc: np.ndarray


def matrix_sqrt(matrix: np.ndarray) -> np.ndarray:
    """
    下三角平方根 L，满足 L L^T = matrix

    方差为零的维度不参与分解，对应行列保持为零，因此退化的半正定矩阵
    也能得到精确的平方根。其余部分用 Cholesky 分解，失败时按阶梯加入抖动。

    Raises:
        SquareRootError: 抖动修复后仍无法分解
    """
    sym = 0.5 * (matrix + matrix.T)
    if not np.isfinite(sym).all():
        raise SquareRootError(matrix, "矩阵包含非有限值")
    root = np.zeros_like(sym)
    active = np.diag(sym) != 0
    if not active.any():
        return root

    idx = np.ix_(active, active)
    sub = sym[idx]
    n = sub.shape[0]
    base = JITTER_SCALE * max(abs(np.trace(sub)) / n, 1.0)
    jitter = 0.0
    for attempt in range(JITTER_ESCALATIONS + 1):
        try:
            root[idx] = scipy.linalg.cholesky(sub + jitter * np.eye(n), lower=True)
            if attempt:
                logger.debug(f"Cholesky 分解在抖动 {jitter:.3e} 下成功")
            return root
        except np.linalg.LinAlgError:
            jitter = base if attempt == 0 else jitter * 10.0
    raise SquareRootError(matrix)


def make_sigma_points(g: GaussianState, cfg: UtConfig = UtConfig()) -> SigmaSet:
    """
    生成 2n+1 个缩放 sigma 点及其权重

    Args:
        g: 高斯状态
        cfg: 无迹变换参数

    Returns:
        SigmaSet，points 形状为 (2n+1, n)
    """
    n = g.dim
    lam = cfg.lambda_for(n)
    scale = n + lam
    if scale <= 0:
        raise SquareRootError(g.cov, f"n + lambda = {scale} 不为正")

    root = matrix_sqrt(scale * g.cov)
    points = np.empty((2 * n + 1, n))
    points[0] = g.mean
    points[1:n + 1] = g.mean + root.T
    points[n + 1:] = g.mean - root.T

    wm = np.full(2 * n + 1, 1.0 / (2.0 * scale))
    wc = wm.copy()
    wm[0] = lam / scale
    wc[0] = wm[0] + 1.0 - cfg.alpha ** 2 + cfg.beta
    return SigmaSet(points, wm, wc)


def _weighted_mean(points: np.ndarray, wm: np.ndarray, angle_dims: Sequence[int]) -> np.ndarray:
    # 以中心点为参考累加偏差，避免负的中心权重带来的抵消误差
    center = points[0]
    offsets = points[1:] - center
    mean = center + wm[1:] @ offsets
    for d in angle_dims:
        delta = _wrap(offsets[:, d])
        s = wm[1:] @ np.sin(delta)
        c = 1.0 - 2.0 * (wm[1:] @ np.sin(0.5 * delta) ** 2)
        mean[d] = _wrap(center[d] + np.arctan2(s, c))
    return mean


def _residuals(points: np.ndarray, mean: np.ndarray, angle_dims: Sequence[int]) -> np.ndarray:
    res = points - mean
    for d in angle_dims:
        res[:, d] = _wrap(res[:, d])
    return res


def unscented_transform(
    sigma: SigmaSet,
    f: Callable[[np.ndarray], np.ndarray],
    angle_dims: Sequence[int] = (),
) -> GaussianState:
    """
    将 sigma 点经 f 传播并重建高斯分布

    Args:
        sigma: sigma 点集
        f: 向量到向量的映射
        angle_dims: 输出中按角度处理的分量

    Returns:
        变换后的 GaussianState

    Raises:
        PropagationError: 某个点的输出非有限
    """
    outputs = []
    for i, point in enumerate(sigma.points):
        try:
            y = np.asarray(f(point), dtype=float).reshape(-1)
        except DomainError as e:
            raise PropagationError(i) from e
        if not np.isfinite(y).all():
            raise PropagationError(i)
        outputs.append(y)
    ys = np.vstack(outputs)

    mean = _weighted_mean(ys, sigma.wm, angle_dims)
    res = _residuals(ys, mean, angle_dims)
    cov = (res.T * sigma.wc) @ res
    return GaussianState(mean, cov)


def _repair_psd(cov: np.ndarray) -> np.ndarray:
    sym = 0.5 * (cov + cov.T)
    eigvals, eigvecs = np.linalg.eigh(sym)
    if eigvals.min() >= 0:
        return sym
    logger.debug(f"协方差最小特征值 {eigvals.min():.3e}，执行半正定修复")
    clipped = (eigvecs * np.clip(eigvals, 0.0, None)) @ eigvecs.T
    return 0.5 * (clipped + clipped.T)


def ukf_predict(
    belief: GaussianState,
    spec: ProcessNoiseSpec,
    dt: float,
    cfg: UtConfig = UtConfig(),
) -> GaussianState:
    """
    UKF 预测步

    Args:
        belief: 5 维后验
        spec: 过程噪声方差
        dt: 步长
        cfg: 无迹变换参数

    Returns:
        5 维先验
    """
    n_aug = STATE_DIM + NOISE_DIM
    mean = np.zeros(n_aug)
    mean[:STATE_DIM] = belief.mean
    cov = np.zeros((n_aug, n_aug))
    cov[:STATE_DIM, :STATE_DIM] = belief.cov
    cov[STATE_DIM:, STATE_DIM:] = spec.covariance()

    sigma = make_sigma_points(GaussianState(mean, cov), cfg)

    def propagate(point):
        return ctrv_propagate(point[:STATE_DIM], dt, point[STATE_DIM:])

    prior = unscented_transform(sigma, propagate, angle_dims=(ITHETA,))
    return GaussianState(prior.mean, _repair_psd(prior.cov))


def _observe(point: np.ndarray) -> np.ndarray:
    return point[:MEASUREMENT_DIM]


def ukf_update(
    pred: GaussianState,
    z: np.ndarray,
    meas: MeasurementSpec,
    cfg: UtConfig = UtConfig(),
) -> Tuple[GaussianState, np.ndarray]:
    """
    UKF 更新步

    Args:
        pred: 5 维先验
        z: 测量 [x, y, theta]
        meas: 测量噪声方差
        cfg: 无迹变换参数

    Returns:
        (后验, 新息) 二元组：后验为 5 维 GaussianState；新息为 z 减去预测测量
        均值的 3 维向量，航向分量已折叠
    """
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.shape[0] != MEASUREMENT_DIM or not np.isfinite(z).all():
        raise DomainError(f"测量非法: {z}")

    sigma = make_sigma_points(pred, cfg)
    predicted_z = unscented_transform(sigma, _observe, angle_dims=(2,))
    s_cov = predicted_z.cov + meas.covariance()

    x_res = _residuals(sigma.points, pred.mean, (ITHETA,))
    z_res = _residuals(sigma.points[:, :MEASUREMENT_DIM], predicted_z.mean, (2,))
    cross = (x_res.T * sigma.wc) @ z_res

    try:
        gain = scipy.linalg.solve(s_cov, cross.T, assume_a="pos").T
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NumericalError(f"新息协方差不可逆: {e}") from e

    innovation = z - predicted_z.mean
    innovation[2] = _wrap(innovation[2])

    mean = pred.mean + gain @ innovation
    mean[ITHETA] = _wrap(mean[ITHETA])
    cov = _repair_psd(pred.cov - gain @ s_cov @ gain.T)
    return GaussianState(mean, cov), innovation


def default_initial_belief(
    z0: np.ndarray,
    speed: float = 8.0,
    yaw_rate: float = 0.0,
    variances: Sequence[float] = (1.0, 1.0, 0.5, 16.0, 1.0),
) -> GaussianState:
    """以首个测量为位姿的默认初始信念"""
    mean = np.array([z0[0], z0[1], z0[2], speed, yaw_rate], dtype=float)
    return GaussianState(mean, np.diag(np.asarray(variances, dtype=float)))


def filter_trajectory(
    z_series: Trajectory,
    init: Optional[GaussianState] = None,
    spec: ProcessNoiseSpec = ProcessNoiseSpec(),
    meas: MeasurementSpec = MeasurementSpec(),
    cfg: UtConfig = UtConfig(),
) -> EstimateTrajectory:
    """
    对整条测量序列运行 UKF

    第 0 步只对初始信念做更新，其后每步先预测再更新。

    Args:
        z_series: 3 列测量轨迹
        init: 初始信念，缺省时由首个测量构造
        spec: 过程噪声
        meas: 测量噪声
        cfg: 无迹变换参数

    Returns:
        与输入等长的 EstimateTrajectory

    Raises:
        FilterStepError: 某一步数值失败（携带时间索引）
    """
    if z_series.dim != MEASUREMENT_DIM:
        raise AlignmentError(f"测量应为 {MEASUREMENT_DIM} 列，当前为 {z_series.dim}")
    n = len(z_series)
    if n == 0:
        raise AlignmentError("测量序列为空")

    zs = z_series.values
    belief = init if init is not None else default_initial_belief(zs[0])
    means = np.empty((n, STATE_DIM))
    covs = np.empty((n, STATE_DIM, STATE_DIM))
    innovations = np.empty((n, MEASUREMENT_DIM))

    logger.info(f"开始滤波: {n} 个测量, dt={z_series.dt}")
    for k in range(n):
        try:
            prior = belief if k == 0 else ukf_predict(belief, spec, z_series.dt, cfg)
            belief, innovations[k] = ukf_update(prior, zs[k], meas, cfg)
        except NumericalError as e:
            logger.error(f"滤波在第 {k} 步失败: {e}")
            raise FilterStepError(k, f"滤波在时间步 {k} 失败: {e}") from e
        means[k] = belief.mean
        covs[k] = belief.cov

    logger.info(f"滤波完成: 末速度 {means[-1, IV]:.3f}, 末转弯率 {means[-1, IW]:.3f}")
    return EstimateTrajectory(means, covs, innovations, z_series.dt, z_series.t0)
