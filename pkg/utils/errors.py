#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
项目异常层次

库代码只负责抛出异常，由 cli.main 统一转换为退出码：
用法/配置错误为 1，数据错误为 2，数值错误为 3。
"""

from __future__ import annotations

from typing import Optional

import numpy as np


class RoundaboutError(Exception):
    """所有项目异常的基类"""

    exit_code = 1


class UsageError(RoundaboutError):
    """命令行用法错误"""

    exit_code = 1


class ConfigurationError(UsageError):
    """参数非法、几何不可行或配置文件无法解析"""


class DataError(RoundaboutError):
    """输入数据无法使用"""

    exit_code = 2


class ParseError(DataError):
    """CSV 解析失败，记录出错的行号和列名"""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        location = []
        if row is not None:
            location.append(f"第 {row} 行")
        if column is not None:
            location.append(f"列 {column}")
        prefix = f"[{', '.join(location)}] " if location else ""
        super().__init__(f"{prefix}{message}")
        self.row = row
        self.column = column


class AlignmentError(DataError):
    """两条轨迹长度或时间轴不一致"""


class HorizonRangeError(DataError):
    """预测时域超出真值轨迹范围"""


class EvidenceError(DataError):
    """片段过短，无法计算策略证据"""


class PipelineError(DataError):
    """观测数量不足以运行预测流水线"""


class NumericalError(RoundaboutError):
    """数值计算失败"""

    exit_code = 3


class DomainError(NumericalError):
    """输入包含 NaN 或无穷大"""


class SquareRootError(NumericalError):
    """协方差矩阵在抖动修复后仍无法分解"""

    def __init__(self, matrix: np.ndarray, message: str = "矩阵平方根分解失败"):
        super().__init__(message)
        self.matrix = np.array(matrix, copy=True)


class PropagationError(NumericalError):
    """sigma 点经过非线性函数后出现非有限值"""

    def __init__(self, index: int, message: Optional[str] = None):
        super().__init__(message or f"sigma 点 {index} 传播结果非有限")
        self.index = index


class FilterStepError(NumericalError):
    """滤波在某个时间步失败"""

    def __init__(self, index: int, message: Optional[str] = None):
        super().__init__(message or f"滤波在时间步 {index} 失败")
        self.index = index
