#!/usr/bin/env python
# -*- coding: utf-8 -*-

import logging
import sys
import threading
from logging.handlers import RotatingFileHandler

from utils.path_utils import get_log_dir

PROJECT_LOGGER = "roundabout"

# 项目根日志记录器（单例）
_root_logger = None
_logger_lock = threading.Lock()


def _configure_root():
    """为项目根日志记录器安装文件和控制台处理器"""
    log_format = "%(asctime)s [%(levelname)s] %(filename)s:%(lineno)d - %(message)s"
    date_format = "%Y-%m-%d %H:%M:%S"

    logger = logging.getLogger(PROJECT_LOGGER)
    logger.setLevel(logging.DEBUG)
    logger.propagate = False

    # 防止重复添加处理器
    if not logger.handlers:
        try:
            # 文件处理器 - 使用循环日志文件，最大5MB，保留3个备份
            file_handler = RotatingFileHandler(
                get_log_dir() / "app.log",
                maxBytes=5 * 1024 * 1024,
                backupCount=3,
                encoding="utf-8",
            )
            file_handler.setLevel(logging.DEBUG)
            file_handler.setFormatter(logging.Formatter(log_format, date_format))
            logger.addHandler(file_handler)
        except OSError:
            # 用户目录不可写时只保留控制台输出
            pass

        # 控制台处理器写到 stderr，避免污染 stdout 上的数据
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(logging.WARNING)
        console_handler.setFormatter(logging.Formatter(log_format, date_format))
        logger.addHandler(console_handler)

    return logger


def get_logger(name="cli"):
    """
    获取模块日志记录器

    Args:
        name: 模块名称，作为项目根日志记录器的子名称

    Returns:
        logging.Logger: 配置好的日志记录器
    """
    global _root_logger

    # 双重检查锁定模式
    if _root_logger is None:
        with _logger_lock:
            if _root_logger is None:
                _root_logger = _configure_root()

    return _root_logger.getChild(name)


def set_log_level(level):
    """
    设置控制台日志级别

    Args:
        level: 日志级别 (logging.DEBUG, logging.INFO, 等)
    """
    get_logger()
    for handler in _root_logger.handlers:
        if not isinstance(handler, RotatingFileHandler):
            handler.setLevel(level)
