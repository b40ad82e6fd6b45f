#!/usr/bin/env python3
"""
設定管理測試

1. 容忍值覆蓋
2. 設定來源優先順序（CLI > QAM_SEED > settings.yaml > 預設值）
3. 設定檔與語料載入
"""

import sys
from argparse import Namespace
from pathlib import Path

import pytest

# 確保可以匯入模組
sys.path.insert(0, str(Path(__file__).parent))

from quasi_means.config import (
    CONFIG_DIR,
    DEFAULT_SEED,
    RunConfig,
    SamplingPlan,
    Tolerances,
    load_corpus,
    load_settings,
)
from quasi_means.errors import InvalidParameter


def test_tolerance_override():
    tol = Tolerances().override({'compare': 1e-6, 'tol_invert': 1e-10})
    assert tol.tol_compare == 1e-6
    assert tol.tol_invert == 1e-10
    assert tol.refute_threshold == pytest.approx(1e-5)

    with pytest.raises(InvalidParameter):
        Tolerances().override({'unknown': 1.0})
    with pytest.raises(InvalidParameter):
        Tolerances(tol_mean=0.0)


def test_sampling_plan_validation():
    with pytest.raises(InvalidParameter):
        SamplingPlan(grid_n=5)
    with pytest.raises(InvalidParameter):
        SamplingPlan(seed=-1)
    with pytest.raises(InvalidParameter):
        SamplingPlan(n_max=1)
    with pytest.raises(InvalidParameter):
        SamplingPlan(n_pins=0)


def test_resolve_defaults():
    cfg = RunConfig.resolve(None, {}, environ={})
    assert cfg.seed == DEFAULT_SEED
    assert cfg.output_format == "text"
    assert cfg.tolerances == Tolerances()
    assert cfg.domain is None


def test_resolve_precedence():
    """CLI 參數優先於環境變數，環境變數優先於設定檔"""
    settings = {
        'seed': 11,
        'output_format': 'json',
        'domain': '(0,5)',
        'tolerances': {'compare': 1e-7},
        'sampling': {'n_samples': 100},
    }
    cfg = RunConfig.resolve(None, settings, environ={})
    assert cfg.seed == 11
    assert cfg.output_format == "json"
    assert cfg.domain == "(0,5)"
    assert cfg.tolerances.tol_compare == 1e-7
    assert cfg.plan.n_samples == 100

    cfg = RunConfig.resolve(None, settings, environ={'QAM_SEED': '0x10'})
    assert cfg.seed == 16

    args = Namespace(seed='5', grid=65, format='csv', domain='[1,2]', tol_compare=1e-8)
    cfg = RunConfig.resolve(args, settings, environ={'QAM_SEED': '0x10'})
    assert cfg.seed == 5
    assert cfg.grid_n == 65
    assert cfg.output_format == "csv"
    assert cfg.domain == "[1,2]"
    assert cfg.tolerances.tol_compare == 1e-8


def test_resolve_rejects_bad_values():
    with pytest.raises(InvalidParameter):
        RunConfig.resolve(None, {'seed': 'abc'}, environ={})
    with pytest.raises(InvalidParameter):
        RunConfig.resolve(None, {'output_format': 'xml'}, environ={})
    with pytest.raises(InvalidParameter):
        RunConfig.resolve(None, {'sampling': {'bogus': 1}}, environ={})


def test_bundled_settings_and_corpus():
    """內建設定檔可以載入並產生合法設定"""
    settings = load_settings(CONFIG_DIR)
    cfg = RunConfig.resolve(None, settings, environ={})
    assert cfg.seed == DEFAULT_SEED

    corpus = load_corpus(CONFIG_DIR)
    assert len(corpus['pairs']) >= 20
    assert len(corpus['windows']) >= 20
    assert len(corpus['pins']) >= 10
    assert 'c1_h' in corpus['generators']


def test_missing_config_dir(tmp_path):
    """設定檔不存在時使用內建值"""
    assert load_settings(tmp_path) == {}
    corpus = load_corpus(tmp_path)
    assert corpus['pairs']
    assert corpus['sandwiches']


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
