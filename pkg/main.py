#!/usr/bin/env python3
"""
擬算術平均工具
程式入口點
"""

from quasi_means.cli import run_app

if __name__ == "__main__":
    run_app()
