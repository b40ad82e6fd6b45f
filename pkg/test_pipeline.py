#!/usr/bin/env python3
"""
Conformance Pipeline 測試腳本

以縮小的設定與語料跑完整驗證流程：
1. 所有步驟依序執行且通過
2. 相同 seed 產生位元組相同的報告
3. 報告寫檔
4. 內建 config/ 語料
"""

import json
import sys
from pathlib import Path

import pytest
import yaml

# 確保可以匯入模組
sys.path.insert(0, str(Path(__file__).parent))

from quasi_means import pipeline as pipeline_module
from quasi_means.cli import main
from quasi_means.pipeline import ConformancePipeline, report_json, write_report


SETTINGS = {
    'seed': 20240501,
    'sampling': {
        'grid_n': 129,
        'n_samples': 200,
        'n_random_triples': 300,
        'pair_grid': 9,
        'xi_count': 7,
        'envelope_n': 65,
        'lambda_candidates': 16,
        'n_pins': 3,
    },
}

CORPUS = {
    'generators': {
        'id': 'id',
        'pow(2)': 'pow(2)',
        'log': 'log',
        'exp(1)': 'exp(1)',
        'c1_h': 'piecewise(1; id; affine(0.5,0.5,pow(2)))',
    },
    'check_samples': 120,
    'powers': [-1, 0, 1, 2],
    'affine_cases': 6,
    'affine_domain': '[0.5,2]',
    'exp_domain': '[-1,1]',
    'pairs': [
        {'a': 'id', 'b': 'pow(2)', 'domain': '[0.5,2]', 'expect': 'Less'},
        {'a': 'id', 'b': 'affine(2,1,id)', 'domain': '[0.5,2]', 'expect': 'Equal'},
        {'a': 'c1_h', 'b': 'id', 'domain': '(0,2)', 'expect': 'Greater'},
    ],
    'sandwiches': [
        {'f': 'log', 'h': 'id', 'g': 'pow(2)', 'domain': '[0.5,2]', 'expect': True},
        {'f': 'pow(2)', 'h': 'id', 'g': 'log', 'domain': '[0.5,2]', 'expect': False},
    ],
    'windows': [
        {'gen': 'exp(1)', 'domain': '[0.5,2]', 'x0': 1, 'U': '[0,2]', 'expect': 'Member'},
        {'gen': 'log', 'domain': '(0.5,2)', 'x0': 1, 'U': '[0,2]', 'expect': 'Unknown'},
    ],
    'pins': [[0.25, 0.75], [0.6, 1.4]],
}

STAGES = [
    'power_order',
    'criteria_consensus',
    'affine_equality',
    'c1_example',
    'lemma_witness',
    'mikusinski_coherence',
    'hull_soundness',
    'envelope_containment',
]


@pytest.fixture
def config_dir(tmp_path, monkeypatch):
    """寫出縮小版 settings.yaml 與 corpus.yaml"""
    monkeypatch.delenv('QAM_SEED', raising=False)
    (tmp_path / "settings.yaml").write_text(yaml.safe_dump(SETTINGS), encoding='utf-8')
    (tmp_path / "corpus.yaml").write_text(yaml.safe_dump(CORPUS, allow_unicode=True), encoding='utf-8')
    return tmp_path


def test_pipeline_runs_all_stages(config_dir):
    """測試完整流程"""
    result = ConformancePipeline(config_dir, quiet=True).run()

    assert [s.name for s in result.stages] == STAGES
    failed = {s.name: (s.error or s.details) for s in result.stages if not s.passed}
    assert not failed, failed
    assert result.success
    assert result.seed == SETTINGS['seed']


def test_pipeline_stage_details(config_dir):
    """各步驟的細節欄位"""
    pipeline = ConformancePipeline(config_dir, quiet=True)

    consensus = pipeline.check_criteria_consensus()
    assert [row['relation'] for row in consensus['pairs']] == ['Less', 'Equal', 'Greater']
    assert all(row['ok'] for row in consensus['pairs'])

    lemma = pipeline.check_lemma_witness()
    assert lemma['passed']
    assert lemma['recomputed_gap_plus'] >= 1e-3

    hull = pipeline.check_hull_soundness()
    verdicts = [row['verdict'] for row in hull['windows']]
    assert verdicts == ['Member', 'Unknown']
    assert hull['windows'][0]['sandwich_passed'] is True

    envelope = pipeline.check_envelope_containment()
    rows = envelope['sandwiches']
    assert rows[0]['passed'] and rows[0]['contained']
    assert not rows[1]['passed'] and rows[1]['ok']


def test_report_is_reproducible(config_dir, tmp_path):
    """相同 seed 兩次執行的 JSON 位元組相同"""
    first = report_json(ConformancePipeline(config_dir, quiet=True).run())
    second = report_json(ConformancePipeline(config_dir, quiet=True).run())
    assert first == second

    data = json.loads(first)
    assert set(data) == {'success', 'seed', 'tolerances', 'stages'}
    assert 'timestamp' not in first


def test_write_report(config_dir, tmp_path):
    result = ConformancePipeline(config_dir, quiet=True).run()
    path = write_report(result, tmp_path / "reports" / "report.json")
    assert path.exists()
    assert json.loads(path.read_text(encoding='utf-8'))['success'] is True


def test_report_command(config_dir, tmp_path, capsys):
    """report 子命令：成功時結束代碼為 0"""
    target = tmp_path / "cli_report.json"
    code = main(["report", "--config", str(config_dir), "--output", str(target)], environ={})
    capsys.readouterr()
    assert code == 0
    data = json.loads(target.read_text(encoding='utf-8'))
    assert [s['name'] for s in data['stages']] == STAGES


def test_stage_lines_go_through_tqdm(config_dir, monkeypatch, capsys):
    """步驟狀態以 tqdm.write 輸出到 stderr，不被進度列覆寫"""
    written = []

    def fake_write(message, file=None, end="\n", nolock=False):
        written.append((message, file))

    monkeypatch.setattr(pipeline_module.tqdm, "write", fake_write)
    ConformancePipeline(config_dir, quiet=False).run()
    out, _ = capsys.readouterr()

    assert out == ""
    messages = [m for m, _ in written]
    assert sum(m.startswith("✅ ") for m in messages) == len(STAGES)
    assert any("步驟 1/" in m for m in messages)
    assert all(f is sys.stderr for _, f in written)


def test_bundled_corpus_passes(monkeypatch):
    """內建 config/ 語料全部通過"""
    monkeypatch.delenv('QAM_SEED', raising=False)
    result = ConformancePipeline(quiet=True).run()

    assert [s.name for s in result.stages] == STAGES
    failed = {s.name: (s.error or s.details) for s in result.stages if not s.passed}
    assert not failed, failed


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
