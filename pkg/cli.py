#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
命令行入口

子命令：
  generate  生成环岛路线的真值与测量
  filter    对测量运行 UKF
  segment   在线分段并输出 JSON-lines 片段报告
  predict   识别当前策略并输出预测轨迹
  evaluate  计算估计误差指标（文件模式或多次试验基准模式）

退出码：0 成功，1 用法/配置错误，2 数据错误，3 数值错误。
"""

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Dict, List, Optional

import numpy as np

from behavior.changepoint import SegmentLengthPrior, detect_changepoints
from behavior.policy import LikelihoodSpec
from estimation.motion_model import ProcessNoiseSpec
from estimation.trajectory import Trajectory
from estimation.ukf import GaussianState, MeasurementSpec, UtConfig, default_initial_belief, filter_trajectory
from prediction.pipeline import ModuleConfigs, PredictionConfig, predict_trajectory
from simulation.scenario import (
    RoundaboutGeometry,
    Route,
    build_route_path,
    inject_process_noise,
    noise_seeds,
    observe,
)
from utils.config_manager import (
    apply_overrides,
    get_bool,
    get_float,
    get_float_list,
    get_int,
    get_optional_float,
    get_section,
    load_config,
)
from utils.errors import RoundaboutError, UsageError
from utils.logger import get_logger, set_log_level
from utils.metrics import MetricsReport, average_reports, compute_metrics
from utils.trajectory_io import (
    read_poses,
    read_states,
    write_estimates,
    write_json,
    write_measurements,
    write_metrics,
    write_predicted,
    write_segment_report,
    write_table,
    write_truth,
)
from utils.ui_utils import format_table, print_colored

logger = get_logger("cli")


class _ArgumentParser(argparse.ArgumentParser):
    """参数错误抛出 UsageError，由 main 统一转为退出码 1"""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# 配置 -> 模块参数
# ---------------------------------------------------------------------------

def build_geometry(config: Dict) -> RoundaboutGeometry:
    return RoundaboutGeometry(
        center=tuple(get_float_list(config, "geometry", "center", length=2)),
        ring_radius=get_float(config, "geometry", "ring_radius", strictly_positive=True),
        leg_angles=tuple(np.deg2rad(get_float_list(config, "geometry", "leg_angles_deg"))),
        leg_length=get_float(config, "geometry", "leg_length", strictly_positive=True),
        transition_length=get_float(config, "geometry", "transition_length", strictly_positive=True),
    )


def build_modules(config: Dict, geometry: Optional[RoundaboutGeometry] = None) -> ModuleConfigs:
    return ModuleConfigs(
        process=ProcessNoiseSpec(
            get_float(config, "process_noise", "sigma_va", minimum=0.0),
            get_float(config, "process_noise", "sigma_vw", minimum=0.0),
        ),
        measurement=MeasurementSpec(
            get_float(config, "measurement_noise", "sigma_nx", minimum=0.0),
            get_float(config, "measurement_noise", "sigma_ny", minimum=0.0),
            get_float(config, "measurement_noise", "sigma_ntheta", minimum=0.0),
        ),
        ut=UtConfig(
            get_float(config, "unscented", "alpha", strictly_positive=True),
            get_float(config, "unscented", "beta"),
            get_optional_float(config, "unscented", "kappa"),
        ),
        prior=SegmentLengthPrior(
            get_float(config, "segmentation", "mu_len"),
            get_float(config, "segmentation", "sigma_len", strictly_positive=True),
            get_int(config, "segmentation", "min_len", minimum=3),
        ),
        likelihood=LikelihoodSpec(get_float(config, "likelihood", "sigma_lik", strictly_positive=True)),
        geometry=geometry,
        prune_after=get_int(config, "segmentation", "prune_after"),
        prune_nats=get_float(config, "segmentation", "prune_nats", strictly_positive=True),
        max_candidates=get_int(config, "segmentation", "max_candidates", minimum=1),
    )


def initial_belief(config: Dict, z0) -> GaussianState:
    return default_initial_belief(
        z0,
        speed=get_float(config, "initial_belief", "speed"),
        yaw_rate=get_float(config, "initial_belief", "yaw_rate"),
        variances=get_float_list(config, "initial_belief", "variances", length=5),
    )


def parse_route(text: str, config: Dict) -> Route:
    try:
        entry, exit_ = (int(part) for part in text.split(":"))
    except ValueError:
        raise UsageError(f"路线格式应为 入口:出口，例如 0:2，实际为 {text!r}") from None
    return Route(
        entry,
        exit_,
        cruise_speed=get_float(config, "route", "cruise_speed", strictly_positive=True),
        dt=get_float(config, "route", "dt", strictly_positive=True),
    )


def simulate_route(config: Dict, route_text: str, seed: int):
    """生成带过程噪声的真值和测量"""
    geometry = build_geometry(config)
    modules = build_modules(config, geometry)
    clean = build_route_path(geometry, parse_route(route_text, config))
    process_seed, measurement_seed = noise_seeds(seed)
    truth = inject_process_noise(clean, modules.process, process_seed)
    measurements = observe(truth, modules.measurement, measurement_seed)
    return truth, measurements


def _with_initial_belief(config: Dict, modules: ModuleConfigs, z: Trajectory) -> ModuleConfigs:
    return replace(modules, init=initial_belief(config, z.values[0]))


# ---------------------------------------------------------------------------
# 子命令
# ---------------------------------------------------------------------------

def cmd_generate(args, config) -> int:
    truth, measurements = simulate_route(config, args.route, args.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    write_truth(os.path.join(args.out_dir, "truth.csv"), truth.states, truth.labels)
    write_measurements(os.path.join(args.out_dir, "measurements.csv"), measurements)
    write_json(os.path.join(args.out_dir, "manifest.json"), {
        "seed": args.seed,
        "route": args.route,
        "changepoints": list(truth.changepoints),
        "config": config,
    })
    print_colored(f"✓ 已生成 {len(truth)} 个样本到 {args.out_dir}", "green", sys.stderr)
    return 0


def _emit_filter_plots(directory, measurements, estimates, truth):
    columns = ["t", "x_meas", "y_meas", "x_filt", "y_filt"]
    stacks = [measurements.times, measurements.values[:, 0], measurements.values[:, 1],
              estimates.means[:, 0], estimates.means[:, 1]]
    hidden_columns = ["t", "v_hat", "w_hat"]
    hidden = [estimates.times, estimates.means[:, 3], estimates.means[:, 4]]
    if truth is not None:
        columns += ["x_true", "y_true"]
        stacks += [truth.values[:, 0], truth.values[:, 1]]
        hidden_columns += ["v_true", "w_true"]
        hidden += [truth.values[:, 3], truth.values[:, 4]]
    write_table(os.path.join(directory, "trace_plot.csv"), columns, np.column_stack(stacks).tolist())
    write_table(os.path.join(directory, "hidden_state_plot.csv"), hidden_columns, np.column_stack(hidden).tolist())


def cmd_filter(args, config) -> int:
    measurements = read_poses(args.measurements)
    modules = _with_initial_belief(config, build_modules(config), measurements)
    estimates = filter_trajectory(measurements, modules.init, modules.process, modules.measurement, modules.ut)
    write_estimates(args.out, estimates)

    truth = read_states(args.truth) if args.truth else None
    if truth is not None:
        _print_metrics(_metrics_pair(truth, estimates, _burn_in(args, config)))
    if args.emit_plot_data:
        _emit_filter_plots(args.emit_plot_data, measurements, estimates, truth)
    return 0


def cmd_segment(args, config) -> int:
    poses = read_poses(args.input)
    modules = build_modules(config)
    if not args.raw:
        modules = _with_initial_belief(config, modules, poses)
        poses = filter_trajectory(poses, modules.init, modules.process, modules.measurement, modules.ut).poses()
    path = detect_changepoints(
        poses, modules.prior, modules.likelihood,
        prune_after=modules.prune_after, prune_nats=modules.prune_nats, max_candidates=modules.max_candidates,
    )
    write_segment_report(args.out, path.records(), stream=sys.stdout)

    if args.emit_plot_data:
        labels = path.labels(len(poses))
        segment_index = np.concatenate([
            np.full(stop - start, i) for i, (start, stop) in enumerate(path.segment_bounds)
        ])
        rows = [
            [float(t), float(x), float(y), int(s), label.value]
            for t, x, y, s, label in zip(poses.times, poses.values[:, 0], poses.values[:, 1], segment_index, labels)
        ]
        write_table(os.path.join(args.emit_plot_data, "segments_plot.csv"), ["t", "x", "y", "segment", "label"], rows)
    return 0


def cmd_predict(args, config) -> int:
    measurements = read_poses(args.measurements)
    geometry = build_geometry(config) if args.cap_yaw else None
    modules = _with_initial_belief(config, build_modules(config, geometry), measurements)
    horizon = args.horizon if args.horizon is not None else get_float(config, "prediction", "horizon", strictly_positive=True)
    use_filter = get_bool(config, "prediction", "use_filter") and not args.raw
    cfg = PredictionConfig(horizon=horizon, dt=measurements.dt, use_filter=use_filter)

    result = predict_trajectory(measurements, cfg, modules)
    write_predicted(args.out, result.predicted)
    params = ", ".join(f"{k}={v:.4f}" for k, v in result.current_fit.params.to_dict().items())
    print_colored(f"当前策略: {result.current_policy.value} ({params})", "cyan", sys.stderr)
    return 0


def _burn_in(args, config) -> int:
    if getattr(args, "burn_in", None) is not None:
        return args.burn_in
    return get_int(config, "metrics", "burn_in")


def _metrics_pair(truth, estimate, burn_in: int) -> List[MetricsReport]:
    return [compute_metrics(truth, estimate, 0), compute_metrics(truth, estimate, burn_in)]


def _print_metrics(reports: List[MetricsReport], labels: Optional[List[str]] = None):
    labels = labels or ["全部样本", f"跳过前 {reports[-1].burn_in} 个"]
    rows = []
    for label, report in zip(labels, reports):
        row = {"范围": label}
        row.update(report.as_dict())
        rows.append(row)
    columns = ["范围", "avg_lat_err", "max_lat_err", "avg_lon_err", "max_lon_err",
               "avg_euclid", "max_euclid", "rmse_v", "rmse_w", "n_samples"]
    print(format_table(rows, columns))


def _metrics_mapping(reports: List[MetricsReport]) -> Dict[str, object]:
    full, burned = reports
    mapping: Dict[str, object] = dict(full.as_dict())
    mapping.update({f"burnin_{k}": v for k, v in burned.as_dict().items()})
    return mapping


def _benchmark_trial(payload):
    config, route_text, seed, burn_in = payload
    truth, measurements = simulate_route(config, route_text, seed)
    modules = _with_initial_belief(config, build_modules(config), measurements)
    estimates = filter_trajectory(measurements, modules.init, modules.process, modules.measurement, modules.ut)
    return _metrics_pair(truth.states, estimates, burn_in)


def cmd_evaluate(args, config) -> int:
    burn_in = _burn_in(args, config)
    if args.truth or args.estimate:
        if not (args.truth and args.estimate):
            raise UsageError("文件模式需要同时提供 --truth 和 --estimate")
        reports = _metrics_pair(read_states(args.truth), read_states(args.estimate), burn_in)
        _print_metrics(reports)
        if args.out:
            write_metrics(args.out, _metrics_mapping(reports))
        return 0

    if args.seed is None:
        raise UsageError("基准模式需要 --seed")
    if args.trials < 1:
        raise UsageError("--trials 必须为正")
    payloads = [(config, args.route, args.seed + i, burn_in) for i in range(args.trials)]
    if args.workers > 1 and args.trials > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_benchmark_trial, payloads))
    else:
        results = [_benchmark_trial(p) for p in payloads]

    averaged = [average_reports([r[0] for r in results]), average_reports([r[1] for r in results])]
    labels = []
    reports = []
    for i, pair in enumerate(results):
        labels += [f"试验 {i} 全部", f"试验 {i} 跳过"]
        reports += pair
    labels += ["平均 全部", "平均 跳过"]
    reports += averaged
    _print_metrics(reports, labels)
    if args.out:
        mapping = _metrics_mapping(averaged)
        mapping["trials"] = args.trials
        mapping["seed"] = args.seed
        write_metrics(args.out, mapping)
    return 0


# ---------------------------------------------------------------------------
# 参数解析
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON 配置文件")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="覆盖单个配置项，可重复")
    common.add_argument("-v", "--verbose", action="count", default=0, help="输出更多日志（-vv 为调试级别）")

    parser = _ArgumentParser(prog="roundabout-predict", description="环岛车辆轨迹估计、分段与预测")
    sub = parser.add_subparsers(dest="command", parser_class=_ArgumentParser)
    sub.required = True

    p = sub.add_parser("generate", parents=[common], help="生成路线真值与测量")
    p.add_argument("--route", required=True, help="入口:出口，例如 0:2")
    p.add_argument("--seed", type=int, required=True, help="随机种子")
    p.add_argument("--out-dir", default="output", help="输出目录")
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser("filter", parents=[common], help="UKF 滤波")
    p.add_argument("--measurements", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--truth", help="可选真值文件，用于打印误差指标")
    p.add_argument("--burn-in", type=int)
    p.add_argument("--emit-plot-data", metavar="DIR", help="输出绘图用 CSV 的目录")
    p.set_defaults(handler=cmd_filter)

    p = sub.add_parser("segment", parents=[common], help="在线分段")
    p.add_argument("--input", required=True, help="测量或估计文件")
    p.add_argument("--out", help="JSON-lines 报告路径，缺省写到标准输出")
    p.add_argument("--raw", action="store_true", help="直接对输入位姿分段，不先滤波")
    p.add_argument("--emit-plot-data", metavar="DIR")
    p.set_defaults(handler=cmd_segment)

    p = sub.add_parser("predict", parents=[common], help="策略识别与轨迹预测")
    p.add_argument("--measurements", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--horizon", type=float, help="预测时域（秒）")
    p.add_argument("--raw", action="store_true", help="对原始测量分段")
    p.add_argument("--cap-yaw", action="store_true", help="按环半径限制预测转弯率")
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("evaluate", parents=[common], help="误差指标")
    p.add_argument("--truth")
    p.add_argument("--estimate")
    p.add_argument("--burn-in", type=int)
    p.add_argument("--out", help="key=value 指标文件")
    p.add_argument("--trials", type=int, default=1, help="基准模式的试验次数")
    p.add_argument("--seed", type=int, help="基准模式的起始种子")
    p.add_argument("--route", default="0:2", help="基准模式路线")
    p.add_argument("--workers", type=int, default=1, help="并行进程数")
    p.set_defaults(handler=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        config = apply_overrides(load_config(args.config), args.set)
        level = get_section(config, "logging").get("level", "WARNING")
        if args.verbose:
            level = "DEBUG" if args.verbose > 1 else "INFO"
        set_log_level(getattr(logging, str(level).upper(), logging.WARNING))
        logger.info(f"执行子命令 {args.command}")
        return args.handler(args, config)
    except RoundaboutError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print_colored(f"错误: {e}", "red", sys.stderr)
        return e.exit_code
    except KeyboardInterrupt:
        print_colored("已中断", "yellow", sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
