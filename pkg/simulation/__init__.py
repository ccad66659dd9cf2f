#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""环岛场景生成"""
