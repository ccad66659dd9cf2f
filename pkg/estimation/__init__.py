#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
状态估计包

- trajectory: 均匀采样的时间序列容器
- motion_model: CTRV 运动模型
- ukf: 无迹卡尔曼滤波
"""
