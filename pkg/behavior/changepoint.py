#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
在线变点检测与策略分段

检测器按时间逐个接收位姿，维护以 j 为起点、当前时刻为终点的候选片段，
在对数空间计算

    log P_t(j, pi)  = log(1 - G(t-j-1)) + log L(j, t, pi) + log P(pi) + log P_j^MAP
    log P_t^MAP     = max_{j, pi} [log g(t-j) + log L(j, t, pi) + log P(pi) + log P_j^MAP]

并记录回溯指针。内部时间按已接收样本数计数（从 1 开始），候选 j 覆盖
0 起索引的样本 j..t-1；对外报告的变点是前一段最后一个样本的 0 起索引 j-1。

在线阶段的片段证据使用近似参数：航向的最小二乘拟合由增量维护的充分
统计量给出（LaneKeep 用 {1, tau}，Merge 用 {1, tau, tau^2}），速度与起始
位姿由闭式对齐得到。回溯时再对每个片段做完整的非线性拟合。
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm

from behavior.policy import (
    LikelihoodSpec,
    PolicyFit,
    PolicyKind,
    aligned_sse,
    bic_penalty,
    fit_policy,
    gaussian_log_likelihood,
    rollout_unit,
)
from estimation.motion_model import _wrap
from estimation.trajectory import MEASUREMENT_DIM, Trajectory
from utils.errors import ConfigurationError, DataError, DomainError, EvidenceError
from utils.logger import get_logger

logger = get_logger("changepoint")

DEFAULT_POLICIES = (PolicyKind.LANE_KEEP, PolicyKind.MERGE)


@dataclass(frozen=True)
class SegmentLengthPrior:
    """截断正态的片段长度先验（单位：样本）"""

    mu_len: float = 50.0
    sigma_len: float = 50.0
    min_len: int = 25

    def __post_init__(self):
        if not (np.isfinite(self.sigma_len) and self.sigma_len > 0):
            raise ConfigurationError(f"sigma_len 必须为正: {self.sigma_len}")
        if not np.isfinite(self.mu_len):
            raise ConfigurationError(f"mu_len 必须是有限数: {self.mu_len}")
        if int(self.min_len) != self.min_len or self.min_len < 3:
            raise ConfigurationError(f"min_len 必须是不小于 3 的整数: {self.min_len}")
        object.__setattr__(self, "min_len", int(self.min_len))

    def _z(self, t):
        return (np.asarray(t, dtype=float) - self.mu_len) / self.sigma_len

    @property
    def _log_mass(self) -> float:
        return float(norm.logsf(self._z(self.min_len)))

    def log_pdf(self, t):
        t = np.asarray(t, dtype=float)
        value = norm.logpdf(self._z(t)) - np.log(self.sigma_len) - self._log_mass
        return np.where(t >= self.min_len, value, -np.inf)

    def log_survival(self, t):
        """log(1 - G(t))"""
        t = np.asarray(t, dtype=float)
        value = norm.logsf(self._z(t)) - self._log_mass
        return np.where(t >= self.min_len, np.minimum(value, 0.0), 0.0)


def seg_len_pdf(t, prior: SegmentLengthPrior = SegmentLengthPrior()):
    """片段长度密度 g(t)，t < min_len 时为 0"""
    value = np.exp(prior.log_pdf(t))
    return float(value) if np.ndim(value) == 0 else value


def seg_len_cdf(t, prior: SegmentLengthPrior = SegmentLengthPrior()):
    """片段长度分布函数 G(t)，限制在 [0, 1)"""
    value = np.clip(-np.expm1(prior.log_survival(t)), 0.0, np.nextafter(1.0, 0.0))
    return float(value) if np.ndim(value) == 0 else value


@dataclass(frozen=True)
class EvidenceResult:
    policy: PolicyKind
    log_evidence: float
    penalty: float
    fit: PolicyFit


def policy_evidence(
    segment: Trajectory,
    policy: PolicyKind,
    spec: LikelihoodSpec = LikelihoodSpec(),
    min_len: int = SegmentLengthPrior().min_len,
) -> EvidenceResult:
    """
    片段在某策略下的 BIC 近似对数证据

    Raises:
        EvidenceError: 片段短于 min_len
    """
    if len(segment) < min_len:
        raise EvidenceError(f"片段长度 {len(segment)} 小于最小长度 {min_len}")
    fit = fit_policy(segment, policy, spec)
    return EvidenceResult(policy, fit.bic_evidence, float(bic_penalty(policy, fit.n_samples)), fit)


# ---------------------------------------------------------------------------
# 近似证据（在线与批量共用）
# ---------------------------------------------------------------------------

def _heading_rates(policy: PolicyKind, sums: np.ndarray, cross: np.ndarray, dt: float):
    """
    由航向最小二乘的充分统计量求转弯率参数

    sums[:, p] = sum tau^p (p = 0..4)，cross[:, p] = sum tau^p * theta (p = 0..2)
    """
    if policy is PolicyKind.LANE_KEEP:
        det = sums[:, 0] * sums[:, 2] - sums[:, 1] ** 2
        w = (sums[:, 0] * cross[:, 1] - sums[:, 1] * cross[:, 0]) / det
        return w, np.zeros_like(w)
    # 按片段时长缩放 tau，改善正规方程的条件数
    span = np.maximum(2.0 * sums[:, 1] / sums[:, 0], dt)
    powers = span[:, None] ** np.arange(5)[None, :]
    scaled = sums / powers
    normal = np.stack([scaled[:, 0:3], scaled[:, 1:4], scaled[:, 2:5]], axis=1)
    coef = np.linalg.solve(normal, (cross / powers[:, :3])[:, :, None])[:, :, 0] / powers[:, :3]
    # 离散展开的航向为 w0*tau + w_dot/2*tau^2 - w_dot*dt/2*tau
    w_dot = 2.0 * coef[:, 2]
    w0 = coef[:, 1] + 0.5 * w_dot * dt
    return w0, w_dot


def _approximate_log_likelihood(policy, sums, cross, z, theta, mask, lengths, dt, spec):
    w0, w_dot = _heading_rates(policy, sums, cross, dt)
    steps = np.arange(z.shape[1]) * dt
    yaw = w0[:, None] + w_dot[:, None] * steps[None, :]
    q, psi = rollout_unit(yaw, dt)
    sx, sy, st, _ = aligned_sse(q, psi, z, theta, mask)
    return gaussian_log_likelihood(sx + sy + st, lengths, spec)


def _heading_sums(theta_unwrapped: np.ndarray, dt: float):
    tau = np.arange(theta_unwrapped.shape[0]) * dt
    powers = tau[None, :] ** np.arange(5)[:, None]
    return powers.sum(axis=1)[None, :], (powers[:3] * theta_unwrapped[None, :]).sum(axis=1)[None, :]


def approximate_segment_evidence(
    segment: Trajectory,
    policy: PolicyKind,
    spec: LikelihoodSpec = LikelihoodSpec(),
) -> float:
    """
    在线检测器使用的片段近似 BIC 证据（批量计算版本）
    """
    values = segment.values
    n = values.shape[0]
    if n < 3:
        raise EvidenceError(f"片段长度 {n} 不足以估计航向参数")
    theta = values[:, 2]
    sums, cross = _heading_sums(np.unwrap(theta), segment.dt)
    z = (values[:, 0] + 1j * values[:, 1])[None, :]
    ll = _approximate_log_likelihood(
        policy, sums, cross, z, theta[None, :], np.ones((1, n), dtype=bool),
        np.array([n]), segment.dt, spec,
    )
    return float(ll[0] - bic_penalty(policy, n))


# ---------------------------------------------------------------------------
# 在线检测器
# ---------------------------------------------------------------------------

@dataclass
class ViterbiPath:
    changepoints: Tuple[int, ...]
    segment_policies: Tuple[PolicyKind, ...]
    segment_fits: Tuple[PolicyFit, ...]
    segment_bounds: Tuple[Tuple[int, int], ...]
    log_score: float

    def labels(self, n: Optional[int] = None) -> List[PolicyKind]:
        """逐样本标签"""
        n = self.segment_bounds[-1][1] if n is None else n
        out: List[PolicyKind] = []
        for (start, stop), policy in zip(self.segment_bounds, self.segment_policies):
            out.extend([policy] * (min(stop, n) - start))
        return out[:n]

    def records(self) -> List[dict]:
        """每段一条记录，供 JSON-lines 报告使用"""
        rows = []
        for i, ((start, stop), policy, fit) in enumerate(
            zip(self.segment_bounds, self.segment_policies, self.segment_fits)
        ):
            rows.append({
                "segment": i,
                "start": start,
                "end": stop - 1,
                "tau": stop - 1 if i < len(self.changepoints) else None,
                "policy": policy.value,
                "bic": fit.bic_evidence,
                "log_likelihood": fit.log_likelihood,
                "params": fit.params.to_dict(),
                "degenerate": fit.degenerate,
            })
        return rows


@dataclass
class _Candidates:
    start: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    sums: np.ndarray = field(default_factory=lambda: np.zeros((0, 5)))
    cross: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))

    def add(self, start: int):
        self.start = np.append(self.start, start)
        self.sums = np.vstack([self.sums, np.zeros((1, 5))])
        self.cross = np.vstack([self.cross, np.zeros((1, 3))])

    def keep(self, selector):
        self.start = self.start[selector]
        self.sums = self.sums[selector]
        self.cross = self.cross[selector]

    def __len__(self):
        return self.start.shape[0]


class ChampDetector:
    """
    单条轨迹的在线变点检测器

    同一实例只能按时间顺序串行调用 step；对相同前缀的重复处理给出相同的格点。
    """

    def __init__(
        self,
        dt: float,
        prior: SegmentLengthPrior = SegmentLengthPrior(),
        spec: LikelihoodSpec = LikelihoodSpec(),
        policies: Sequence[PolicyKind] = DEFAULT_POLICIES,
        prune_after: int = 1000,
        prune_nats: float = 40.0,
        max_candidates: int = 512,
    ):
        if not (np.isfinite(dt) and dt > 0):
            raise ConfigurationError(f"采样间隔必须为正: {dt}")
        if not policies or len(set(policies)) != len(policies):
            raise ConfigurationError(f"策略集合非法: {policies}")
        if prune_after < 0 or prune_nats <= 0 or max_candidates < 1:
            raise ConfigurationError("剪枝参数非法")
        self.dt = float(dt)
        self.prior = prior
        self.spec = spec
        self.policies = tuple(policies)
        self.log_policy_prior = -np.log(len(self.policies))
        self.prune_after = int(prune_after)
        self.prune_nats = float(prune_nats)
        self.max_candidates = int(max_candidates)

        self._xy = np.zeros(64, dtype=complex)
        self._theta = np.zeros(64)
        self._unwrapped = np.zeros(64)
        self.t = 0
        # 格点：索引为已接收样本数
        self.map_log: List[float] = [0.0]
        self.back_start: List[int] = [-1]
        self.back_policy: List[int] = [-1]
        self.open_best: List[Tuple[float, int, int]] = [(-np.inf, -1, -1)]
        self._candidates = _Candidates()
        self._candidates.add(0)

    def __len__(self) -> int:
        return self.t

    def observations(self) -> np.ndarray:
        """已接收的 (x, y, theta)"""
        xy = self._xy[:self.t]
        return np.column_stack([xy.real, xy.imag, self._theta[:self.t]])

    def lattice(self) -> Dict[str, np.ndarray]:
        return {
            "map_log": np.array(self.map_log),
            "back_start": np.array(self.back_start),
            "back_policy": np.array(self.back_policy),
        }

    def _append(self, obs: np.ndarray):
        if self.t == self._xy.shape[0]:
            grow = self._xy.shape[0]
            self._xy = np.concatenate([self._xy, np.zeros(grow, dtype=complex)])
            self._theta = np.concatenate([self._theta, np.zeros(grow)])
            self._unwrapped = np.concatenate([self._unwrapped, np.zeros(grow)])
        k = self.t
        self._xy[k] = complex(obs[0], obs[1])
        self._theta[k] = obs[2]
        if k == 0:
            self._unwrapped[k] = obs[2]
        else:
            self._unwrapped[k] = self._unwrapped[k - 1] + _wrap(obs[2] - self._theta[k - 1])
        self.t += 1

    def _update_sums(self):
        k = self.t - 1
        cands = self._candidates
        tau = (k - cands.start) * self.dt
        powers = tau[:, None] ** np.arange(5)[None, :]
        cands.sums += powers
        cands.cross += powers[:, :3] * self._unwrapped[k]

    def _candidate_scores(self, eligible: np.ndarray):
        """返回 (C_e, P) 的 log L 矩阵"""
        cands = self._candidates
        starts = cands.start[eligible]
        lengths = self.t - starts
        width = int(lengths.max())
        offsets = np.arange(width)
        idx = np.minimum(starts[:, None] + offsets[None, :], self.t - 1)
        mask = offsets[None, :] < lengths[:, None]
        z = self._xy[idx]
        theta = self._theta[idx]
        scores = np.empty((starts.shape[0], len(self.policies)))
        for p, policy in enumerate(self.policies):
            ll = _approximate_log_likelihood(
                policy, cands.sums[eligible], cands.cross[eligible],
                z, theta, mask, lengths, self.dt, self.spec,
            )
            scores[:, p] = ll - bic_penalty(policy, lengths)
        return scores

    def step(self, obs) -> "ChampDetector":
        """接收一个位姿并更新格点"""
        obs = np.asarray(obs, dtype=float).reshape(-1)
        if obs.shape[0] != MEASUREMENT_DIM or not np.isfinite(obs).all():
            raise DomainError(f"观测非法: {obs}")
        self._append(obs)
        self._update_sums()

        cands = self._candidates
        lengths = self.t - cands.start
        eligible = lengths >= self.prior.min_len
        best_open = (-np.inf, -1, -1)
        map_value, map_start, map_policy = -np.inf, -1, -1

        if eligible.any():
            scores = self._candidate_scores(eligible)
            starts = cands.start[eligible]
            n = lengths[eligible]
            base = scores + self.log_policy_prior + np.array([self.map_log[j] for j in starts])[:, None]
            closed = base + self.prior.log_pdf(n)[:, None]
            open_ = base + self.prior.log_survival(n - 1)[:, None]

            ci, pi = np.unravel_index(np.argmax(closed), closed.shape)
            map_value, map_start, map_policy = float(closed[ci, pi]), int(starts[ci]), int(pi)
            oi, op = np.unravel_index(np.argmax(open_), open_.shape)
            best_open = (float(open_[oi, op]), int(starts[oi]), int(op))

            if self.t >= self.prune_after:
                self._prune(eligible, open_.max(axis=1))

        self.map_log.append(map_value)
        self.back_start.append(map_start)
        self.back_policy.append(map_policy)
        self.open_best.append(best_open)

        if np.isfinite(map_value):
            self._candidates.add(self.t)
        return self

    def _prune(self, eligible: np.ndarray, open_scores: np.ndarray):
        cands = self._candidates
        keep = np.ones(len(cands), dtype=bool)
        eligible_idx = np.flatnonzero(eligible)
        threshold = open_scores.max() - self.prune_nats
        keep[eligible_idx[open_scores < threshold]] = False
        survivors = eligible_idx[open_scores >= threshold]
        if survivors.shape[0] > self.max_candidates:
            order = np.argsort(-open_scores[open_scores >= threshold], kind="stable")
            keep[survivors[order[self.max_candidates:]]] = False
        dropped = int((~keep).sum())
        if dropped:
            cands.keep(keep)
            logger.debug(f"t={self.t} 剪除 {dropped} 个候选，剩余 {len(cands)}")

    def backtrack(self) -> ViterbiPath:
        """从当前最优开放片段沿回溯指针恢复 MAP 分段，并对每段做完整拟合"""
        if self.t < self.prior.min_len:
            raise DataError(f"观测数 {self.t} 少于最小片段长度 {self.prior.min_len}")
        score, start, policy = self.open_best[self.t]
        bounds = [(start, self.t)]
        policies = [self.policies[policy]]
        while start > 0:
            prev_start, prev_policy = self.back_start[start], self.back_policy[start]
            bounds.append((prev_start, start))
            policies.append(self.policies[prev_policy])
            start = prev_start
        bounds.reverse()
        policies.reverse()

        observations = Trajectory(self.observations(), self.dt)
        fits = tuple(
            fit_policy(observations.window(a, b), p, self.spec) for (a, b), p in zip(bounds, policies)
        )
        changepoints = tuple(b - 1 for (_, b) in bounds[:-1])
        logger.info(
            f"回溯完成: {self.t} 个样本, 变点 {list(changepoints)}, "
            f"策略 {[p.value for p in policies]}"
        )
        return ViterbiPath(changepoints, tuple(policies), fits, tuple(bounds), float(score))


def champ_step(state: ChampDetector, o_t) -> ChampDetector:
    """向检测器推送一个位姿，返回同一个（已更新的）检测器"""
    return state.step(o_t)


def viterbi_backtrack(state: ChampDetector) -> ViterbiPath:
    return state.backtrack()


def detect_changepoints(
    observations: Trajectory,
    prior: SegmentLengthPrior = SegmentLengthPrior(),
    spec: LikelihoodSpec = LikelihoodSpec(),
    policies: Sequence[PolicyKind] = DEFAULT_POLICIES,
    prune_after: int = 1000,
    prune_nats: float = 40.0,
    max_candidates: int = 512,
) -> ViterbiPath:
    """对整条位姿序列运行检测器并回溯"""
    if observations.dim < MEASUREMENT_DIM:
        raise DataError(f"位姿序列至少需要 {MEASUREMENT_DIM} 列")
    detector = ChampDetector(
        observations.dt, prior, spec, policies,
        prune_after=prune_after, prune_nats=prune_nats, max_candidates=max_candidates,
    )
    for obs in observations.values[:, :MEASUREMENT_DIM]:
        champ_step(detector, obs)
    return viterbi_backtrack(detector)
