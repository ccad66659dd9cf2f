#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
测试模块

包含项目的各种测试文件
"""