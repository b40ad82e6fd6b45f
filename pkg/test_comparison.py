#!/usr/bin/env python3
"""
比較判定測試

1. 各判準在已知順序上的結論
2. compare 的 Less / Greater / Equal / Incomparable
3. 仿射等價
4. 引理見證與 Mikusiński 指標
"""

import itertools
import json
import sys
from pathlib import Path

import numpy as np
import pytest

# 確保可以匯入模組
sys.path.insert(0, str(Path(__file__).parent))

from quasi_means.comparison import (
    CRITERIA,
    Criterion,
    CriterionVerdict,
    Relation,
    affine_equivalence,
    compare,
    composition_convexity_test,
    derivative_ratio_test,
    find_incomparability_witness,
    mikusinski_index,
    mikusinski_test,
    vanishing_derivative_points,
    verdict_to_dict,
)
from quasi_means.config import SamplingPlan, Tolerances, load_corpus
from quasi_means.errors import DomainError, NoWitnessFound, NotDifferentiable, ZeroDerivative
from quasi_means.generator import parse_generator
from quasi_means.means import quasi_mean


# 縮小取樣以加快測試
PLAN = SamplingPlan(grid_n=129, n_samples=200, n_random_triples=300, pair_grid=9, xi_count=7)


def gen(text: str, domain: str = "[0.5,2]"):
    return parse_generator(text, domain)


def test_all_criteria_support_le():
    """log ≤ id：每個可用判準都給 SupportsLE"""
    f, g = gen("log"), gen("id")
    for criterion in CRITERIA:
        report = criterion(f, g, PLAN)
        assert report.verdict == CriterionVerdict.SUPPORTS_LE, report.criterion
        assert report.evidence


def test_all_criteria_support_ge():
    f, g = gen("exp(2)"), gen("exp(-1)")
    for criterion in CRITERIA:
        assert criterion(f, g, PLAN).verdict == CriterionVerdict.SUPPORTS_GE


def test_decreasing_generators_are_canonicalized():
    """pow(−1) 遞減，結論不受方向影響"""
    report = composition_convexity_test(gen("pow(-1)"), gen("log"), PLAN)
    assert report.verdict == CriterionVerdict.SUPPORTS_LE


def test_derivative_criteria_not_applicable():
    """C¹ 範例沒有二階導數；x³ 的導數在 0 消失"""
    h = gen("piecewise(1; id; affine(0.5,0.5,pow(2)))", "(0,2)")
    ident = gen("id", "(0,2)")
    report = mikusinski_test(ident, h, PLAN)
    assert report.verdict == CriterionVerdict.NOT_APPLICABLE
    assert not report.applicable

    cube, line = gen("pow(3)", "(-1,1)"), gen("id", "(-1,1)")
    assert derivative_ratio_test(cube, line, PLAN).verdict == CriterionVerdict.NOT_APPLICABLE
    assert mikusinski_test(cube, line, PLAN).verdict == CriterionVerdict.NOT_APPLICABLE


@pytest.mark.parametrize("a, b, expected", [
    ("id", "pow(2)", Relation.LESS),
    ("pow(2)", "id", Relation.GREATER),
    ("pow(-1)", "log", Relation.LESS),
    ("log", "pow(0.5)", Relation.LESS),
    ("exp(1)", "exp(2)", Relation.LESS),
    ("pow(3)", "pow(-1)", Relation.GREATER),
])
def test_compare_ordered(a, b, expected):
    verdict = compare(gen(a), gen(b), PLAN)
    assert verdict.relation == expected
    assert verdict.comparable
    assert len(verdict.reports) == len(CRITERIA)


def test_compare_equal():
    """仿射等價直接判定 Equal 並還原 (α, β)"""
    verdict = compare(gen("pow(2)"), gen("affine(-3,2,pow(2))"), PLAN)
    assert verdict.relation == Relation.EQUAL
    alpha, beta = verdict.affine
    assert alpha == pytest.approx(-3.0, rel=1e-12)
    assert beta == pytest.approx(2.0, rel=1e-12)

    assert compare(gen("log"), gen("neg(log)"), PLAN).relation == Relation.EQUAL
    assert compare(gen("id"), gen("id"), PLAN).relation == Relation.EQUAL


def test_affine_equivalence_rejects_non_affine():
    assert affine_equivalence(gen("log"), gen("pow(0.5)"), PLAN) is None
    assert affine_equivalence(gen("exp(1)"), gen("exp(1.001)"), PLAN) is None


def test_compare_incomparable():
    """x³ 與 x 在 (−1,1) 不可比較，兩個見證都可直接驗證"""
    f, g = gen("pow(3)", "(-1,1)"), gen("id", "(-1,1)")
    verdict = compare(f, g, PLAN)
    assert verdict.relation == Relation.INCOMPARABLE
    assert not verdict.comparable

    le, ge = verdict.witness_le_violated, verdict.witness_ge_violated
    assert le is not None and ge is not None
    assert quasi_mean(f, le) > quasi_mean(g, le)
    assert quasi_mean(f, ge) < quasi_mean(g, ge)


def test_compare_requires_common_domain():
    with pytest.raises(DomainError):
        compare(gen("id", "[0.5,2]"), gen("id", "[0.5,3]"), PLAN)


def test_compare_is_deterministic():
    """相同 seed 的 JSON 完全相同"""
    f, g = gen("pow(2)"), gen("exp(1)")
    first = json.dumps(verdict_to_dict(compare(f, g, PLAN), plan=PLAN), ensure_ascii=False)
    second = json.dumps(verdict_to_dict(compare(f, g, PLAN), plan=PLAN), ensure_ascii=False)
    assert first == second
    assert json.loads(first)['seed'] == PLAN.seed


def test_verdict_dict_layout():
    tol = Tolerances()
    data = verdict_to_dict(compare(gen("id"), gen("pow(2)"), PLAN), tol, PLAN)
    assert data['relation'] == "Less"
    assert data['affine'] is None
    assert [c['criterion'] for c in data['criteria']] == [c.value for c in Criterion]
    assert data['witnesses'] == {'le_violated': None, 'ge_violated': None}
    assert data['tolerances'] == tol.to_dict()
    assert data['plan'] == PLAN.to_dict()


def test_mikusinski_index():
    assert mikusinski_index(gen("exp(1.5)", "(0,10)"), 0.3) == pytest.approx(1.5, rel=1e-14)
    assert mikusinski_index(gen("pow(2)"), 1.0) == pytest.approx(1.0)
    assert mikusinski_index(gen("log"), 2.0) == pytest.approx(-0.5)
    assert mikusinski_index(gen("neg(log)"), 2.0) == pytest.approx(-0.5)

    with pytest.raises(NotDifferentiable):
        mikusinski_index(gen("piecewise(1; id; affine(0.5,0.5,pow(2)))", "(0,2)"), 1.0)
    with pytest.raises(ZeroDerivative):
        mikusinski_index(gen("pow(3)", "(-1,1)"), 0.0)


def test_vanishing_derivative_points():
    f, g = gen("pow(3)", "(-1,1)"), gen("id", "(-1,1)")
    points = vanishing_derivative_points(f, g, PLAN)
    assert points
    assert all(abs(x) < 1e-6 for x in points)
    assert vanishing_derivative_points(gen("id"), gen("pow(2)"), PLAN) == []


def test_incomparability_witness():
    """x0 = 0 兩側構造，平均差至少 1e-3"""
    f, g = gen("pow(3)", "(-1,1)"), gen("id", "(-1,1)")
    pair = find_incomparability_witness(f, g, 0.0, PLAN)
    assert pair.x0 == 0.0
    assert pair.gap_plus >= 1e-3
    assert pair.gap_minus <= -1e-3
    assert quasi_mean(f, pair.s_plus) - quasi_mean(g, pair.s_plus) == pytest.approx(pair.gap_plus)
    assert quasi_mean(f, pair.s_minus) - quasi_mean(g, pair.s_minus) == pytest.approx(pair.gap_minus)
    assert pair.s_plus.weights == (0.5, 0.5)

    data = pair.to_dict()
    assert set(data) == {'x0', 's_plus', 's_minus', 'gap_plus', 'gap_minus'}


def test_witness_for_comparable_pair():
    """可比較的兩個平均找不到見證"""
    with pytest.raises(NoWitnessFound):
        find_incomparability_witness(gen("id"), gen("pow(2)"), 1.0, PLAN)


def test_witness_x0_outside_domain():
    with pytest.raises(DomainError):
        find_incomparability_witness(gen("pow(3)", "(-1,1)"), gen("id", "(-1,1)"), 2.0, PLAN)


def test_tolerance_hysteresis():
    """違反量低於 10·tol_compare 不算 Refutes"""
    f, g = gen("exp(1)"), gen("exp(1.0000000001)")
    assert mikusinski_test(f, g, PLAN).verdict == CriterionVerdict.SUPPORTS_EQUAL
    assert compare(f, g, PLAN).relation == Relation.EQUAL

    strict = Tolerances(tol_compare=1e-13)
    assert mikusinski_test(f, g, PLAN, strict).verdict == CriterionVerdict.SUPPORTS_LE


def test_pointwise_normalization_near_open_endpoint():
    """端點附近指標很大時，其他地方的交叉仍然算 Refutes"""
    f, g = gen("pow(2)", "(0,2)"), gen("exp(1)", "(0,2)")
    report = mikusinski_test(f, g, PLAN)
    assert report.verdict == CriterionVerdict.REFUTES
    assert report.violation_ge > 0.4

    assert derivative_ratio_test(g, f, PLAN).verdict == CriterionVerdict.REFUTES


def test_compare_small_crossing_region():
    """交叉區域只佔 [0.9,1]，仍以兩個方向的見證判為 Incomparable"""
    f, g = gen("pow(2)", "[0.9,5]"), gen("exp(1)", "[0.9,5]")
    verdict = compare(f, g, PLAN)
    assert verdict.relation == Relation.INCOMPARABLE

    le, ge = verdict.witness_le_violated, verdict.witness_ge_violated
    assert quasi_mean(f, le) > quasi_mean(g, le)
    assert quasi_mean(f, ge) < quasi_mean(g, ge)


def index_relation(f, g) -> Relation:
    """由 Mikusiński 指標逐點比較得到的順序（切點本身略過）"""
    a, b = f.bounds()
    x = np.linspace(a, b, 2001)
    x = x[np.abs(x - 1.0) > 1e-9]
    idx_f = f.derivative(x, 2) / f.derivative(x, 1)
    idx_g = g.derivative(x, 2) / g.derivative(x, 1)
    d = (idx_f - idx_g) / np.maximum(1.0, np.maximum(np.abs(idx_f), np.abs(idx_g)))
    if np.all(d <= 1e-9):
        return Relation.LESS
    if np.all(d >= -1e-9):
        return Relation.GREATER
    return Relation.INCOMPARABLE


@pytest.mark.parametrize("domain", ["(0,2)", "[0.5,2]", "[0.2,1.8]", "[0.9,5]"])
def test_corpus_pairs_follow_index(domain):
    """語料中所有有序生成函數對：compare 與指標給出的順序一致"""
    corpus = load_corpus()['generators']
    gens = {name: parse_generator(text, domain) for name, text in corpus.items()}
    for a, b in itertools.permutations(gens, 2):
        f, g = gens[a], gens[b]
        verdict = compare(f, g, PLAN)
        assert verdict.relation == index_relation(f, g), f"{a} vs {b} on {domain}"
        if verdict.relation == Relation.INCOMPARABLE:
            le, ge = verdict.witness_le_violated, verdict.witness_ge_violated
            assert quasi_mean(f, le) > quasi_mean(g, le)
            assert quasi_mean(f, ge) < quasi_mean(g, ge)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
