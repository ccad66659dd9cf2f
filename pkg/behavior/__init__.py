#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
驾驶行为包

- policy: LaneKeep / Merge 策略的展开、拟合与分类
- changepoint: 在线变点检测与 MAP 分段
"""
