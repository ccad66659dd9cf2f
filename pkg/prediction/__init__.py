#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""预测流水线"""
