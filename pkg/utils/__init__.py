#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
工具函数包

包含应用程序所需的各种工具模块：
- logger: 日志记录
- errors: 异常层次与退出码
- path_utils: 资源与用户目录路径
- config_manager: JSON 配置加载与覆盖
- trajectory_io: 轨迹 CSV、片段报告与指标文件读写
- metrics: 误差指标与分段评分
"""

# 导入常用的工具函数，方便其他模块使用
from .logger import get_logger, set_log_level
from .errors import (
    RoundaboutError,
    UsageError,
    ConfigurationError,
    DataError,
    NumericalError,
)

__all__ = [
    # 日志相关
    'get_logger',
    'set_log_level',

    # 异常
    'RoundaboutError',
    'UsageError',
    'ConfigurationError',
    'DataError',
    'NumericalError',
]
