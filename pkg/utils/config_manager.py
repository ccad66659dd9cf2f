#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
配置管理

默认值来自随程序发布的 config.template.json，之后依次合并用户目录下的
config.json、命令行 --config 指定的文件，以及 --set section.key=value 覆盖项。
"""

import copy
import json
import os
from functools import lru_cache
from typing import Any, Dict, Iterable, Optional, Sequence

from utils.errors import ConfigurationError
from utils.logger import get_logger
from utils.path_utils import get_default_config_path, get_user_config_path

# 获取日志记录器
logger = get_logger("config_manager")


def _read_json(path) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        raise ConfigurationError(f"无法读取配置文件 {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"配置文件 {path} 不是合法的 JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigurationError(f"配置文件 {path} 顶层必须是对象")
    return data


@lru_cache(maxsize=1)
def _bundled_defaults() -> Dict[str, Any]:
    return _read_json(get_default_config_path())


def merge_config(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """
    递归合并两个配置字典，返回新字典

    Args:
        base: 基础配置
        override: 覆盖配置，未知的段会被拒绝

    Returns:
        合并后的配置
    """
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if key not in merged:
            raise ConfigurationError(f"未知配置项: {key}")
        if isinstance(merged[key], dict):
            if not isinstance(value, dict):
                raise ConfigurationError(f"配置段 {key} 必须是对象")
            merged[key] = merge_config(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def load_config(path: Optional[str] = None, use_user_config: bool = True) -> Dict[str, Any]:
    """
    加载有效配置

    Args:
        path: 可选的配置文件路径
        use_user_config: 是否合并用户目录下的 config.json

    Returns:
        合并后的配置字典
    """
    config = copy.deepcopy(_bundled_defaults())

    if use_user_config:
        user_path = get_user_config_path()
        if user_path.exists():
            logger.info(f"合并用户配置: {user_path}")
            config = merge_config(config, _read_json(user_path))

    if path:
        if not os.path.exists(path):
            raise ConfigurationError(f"配置文件不存在: {path}")
        logger.info(f"合并配置文件: {path}")
        config = merge_config(config, _read_json(path))

    return config


def apply_overrides(config: Dict[str, Any], overrides: Iterable[str]) -> Dict[str, Any]:
    """
    应用 section.key=value 形式的覆盖项，value 按 JSON 解析，失败时作为字符串

    Args:
        config: 当前配置
        overrides: 覆盖项列表

    Returns:
        新的配置字典
    """
    result = config
    for item in overrides:
        if "=" not in item:
            raise ConfigurationError(f"覆盖项格式应为 section.key=value: {item}")
        dotted, raw = item.split("=", 1)
        parts = dotted.strip().split(".")
        if len(parts) != 2 or not all(parts):
            raise ConfigurationError(f"覆盖项键应为 section.key: {dotted}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        result = merge_config(result, {parts[0]: {parts[1]: value}})
    return result


def get_section(config: Dict[str, Any], name: str) -> Dict[str, Any]:
    section = config.get(name)
    if not isinstance(section, dict):
        raise ConfigurationError(f"缺少配置段: {name}")
    return section


def get_float(config: Dict[str, Any], section: str, key: str,
              minimum: Optional[float] = None, strictly_positive: bool = False) -> float:
    """
    读取浮点配置并校验范围

    Args:
        config: 配置字典
        section: 配置段名
        key: 键名
        minimum: 允许的最小值（含）
        strictly_positive: 是否要求大于 0

    Returns:
        浮点值
    """
    value = get_section(config, section).get(key)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"{section}.{key} 必须是数字，当前为 {value!r}")
    value = float(value)
    if value != value or value in (float("inf"), float("-inf")):
        raise ConfigurationError(f"{section}.{key} 必须是有限数值")
    if strictly_positive and value <= 0:
        raise ConfigurationError(f"{section}.{key} 必须大于 0，当前为 {value}")
    if minimum is not None and value < minimum:
        raise ConfigurationError(f"{section}.{key} 不能小于 {minimum}，当前为 {value}")
    return value


def get_optional_float(config: Dict[str, Any], section: str, key: str) -> Optional[float]:
    if get_section(config, section).get(key) is None:
        return None
    return get_float(config, section, key)


def get_int(config: Dict[str, Any], section: str, key: str, minimum: int = 0) -> int:
    value = get_section(config, section).get(key)
    if isinstance(value, bool) or not isinstance(value, int):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        else:
            raise ConfigurationError(f"{section}.{key} 必须是整数，当前为 {value!r}")
    if value < minimum:
        raise ConfigurationError(f"{section}.{key} 不能小于 {minimum}，当前为 {value}")
    return value


def get_bool(config: Dict[str, Any], section: str, key: str) -> bool:
    value = get_section(config, section).get(key)
    if not isinstance(value, bool):
        raise ConfigurationError(f"{section}.{key} 必须是 true 或 false，当前为 {value!r}")
    return value


def get_float_list(config: Dict[str, Any], section: str, key: str,
                   length: Optional[int] = None) -> Sequence[float]:
    value = get_section(config, section).get(key)
    if not isinstance(value, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        raise ConfigurationError(f"{section}.{key} 必须是数字列表，当前为 {value!r}")
    if length is not None and len(value) != length:
        raise ConfigurationError(f"{section}.{key} 需要 {length} 个元素，当前为 {len(value)}")
    return [float(v) for v in value]
