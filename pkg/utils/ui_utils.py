#!/usr/bin/env python3
# -*- coding: utf-8 -*-

import sys
from typing import Mapping, Sequence, TextIO

from colorama import Fore, Style, init as colorama_init

colorama_init()

_COLORS = {
    'red': Fore.RED,
    'green': Fore.GREEN,
    'yellow': Fore.YELLOW,
    'blue': Fore.BLUE,
    'magenta': Fore.MAGENTA,
    'cyan': Fore.CYAN,
    'white': Fore.WHITE,
    'bold': Style.BRIGHT,
}


def print_colored(text: str, color: str = None, stream: TextIO = None) -> None:
    """打印彩色文本，非终端输出时不加颜色"""
    stream = stream or sys.stdout
    if color in _COLORS and stream.isatty():
        print(f"{_COLORS[color]}{text}{Style.RESET_ALL}", file=stream)
    else:
        print(text, file=stream)


def format_table(rows: Sequence[Mapping[str, object]], columns: Sequence[str]) -> str:
    """
    将记录格式化为对齐的文本表格

    Args:
        rows: 每行一个字典
        columns: 列顺序

    Returns:
        表格文本（不含末尾换行）
    """
    def cell(value):
        if isinstance(value, float):
            return f"{value:.4f}"
        return str(value)

    body = [[cell(row.get(col, "")) for col in columns] for row in rows]
    widths = [max([len(col)] + [len(r[i]) for r in body]) for i, col in enumerate(columns)]
    lines = ["  ".join(col.ljust(widths[i]) for i, col in enumerate(columns))]
    lines.append("  ".join("-" * w for w in widths))
    for r in body:
        lines.append("  ".join(value.rjust(widths[i]) for i, value in enumerate(r)))
    return "\n".join(lines)
