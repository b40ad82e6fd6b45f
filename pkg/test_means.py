#!/usr/bin/env python3
"""
擬算術平均測試

1. 取樣字串解析與驗證
2. A^[f] 的基本值與不變性
3. 冪平均、指數平均
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# 確保可以匯入模組
sys.path.insert(0, str(Path(__file__).parent))

from quasi_means.errors import DomainError, InvalidParameter, ParseError
from quasi_means.generator import parse_generator
from quasi_means.means import (
    WeightedSample,
    exponential_mean,
    pairwise_sum,
    power_mean,
    quasi_mean,
    quasi_mean_batch,
    samples_to_arrays,
    weighted_two_point_mean,
)


def test_sample_parse():
    """等權重與帶權重兩種寫法"""
    s = WeightedSample.parse("1,7")
    assert s.points == (1.0, 7.0)
    assert s.weights == (0.5, 0.5)

    w = WeightedSample.parse("1:0.25, 3:0.75")
    assert w.points == (1.0, 3.0)
    assert w.weights == (0.25, 0.75)

    for text in ("", "a,b", "1:0.5,2"):
        with pytest.raises(ParseError):
            WeightedSample.parse(text)


def test_sample_validation():
    with pytest.raises(InvalidParameter):
        WeightedSample((1.0, 2.0), (0.5, 0.4))
    with pytest.raises(InvalidParameter):
        WeightedSample((1.0, 2.0), (1.5, -0.5))
    with pytest.raises(InvalidParameter):
        WeightedSample((), ())
    with pytest.raises(InvalidParameter):
        WeightedSample.two_point(1.0, 2.0, 1.0)


def test_known_values():
    """x² 與 log 的平均有封閉解"""
    square = parse_generator("pow(2)", "(0,10)")
    assert quasi_mean(square, WeightedSample.parse("1,7")) == pytest.approx(5.0, rel=1e-12)

    log = parse_generator("log", "(0,10)")
    assert quasi_mean(log, WeightedSample.parse("1,4")) == pytest.approx(2.0, rel=1e-12)

    ident = parse_generator("id", "(0,10)")
    assert quasi_mean(ident, WeightedSample.parse("2:0.25,6:0.75")) == pytest.approx(5.0, rel=1e-14)


def test_single_point_and_constant_sample():
    g = parse_generator("exp(2)", "[0.5,2]")
    assert quasi_mean(g, WeightedSample.uniform([1.3])) == 1.3
    assert quasi_mean(g, WeightedSample.uniform([1.3, 1.3, 1.3])) == pytest.approx(1.3, rel=1e-14)


def test_mean_between_min_and_max():
    rng = np.random.default_rng(7)
    g = parse_generator("pow(-1)", "[0.5,2]")
    for _ in range(50):
        points = rng.uniform(0.5, 2.0, 4)
        s = WeightedSample(tuple(points), tuple(rng.dirichlet(np.ones(4))))
        m = quasi_mean(g, s)
        assert points.min() <= m <= points.max()


def test_order_invariance():
    """點的排列不影響結果（位元相同）"""
    g = parse_generator("exp(1)", "[0.5,2]")
    a = WeightedSample((0.6, 1.9, 1.1, 0.8), (0.1, 0.2, 0.3, 0.4))
    b = WeightedSample((1.1, 0.8, 1.9, 0.6), (0.3, 0.4, 0.2, 0.1))
    assert quasi_mean(g, a) == quasi_mean(g, b)


def test_affine_invariance():
    """αf + β 與 f 產生相同的平均"""
    f = parse_generator("pow(2)", "[0.5,2]")
    g = parse_generator("affine(-3,2,pow(2))", "[0.5,2]")
    s = WeightedSample.parse("0.6:0.2,1.4:0.5,1.9:0.3")
    assert quasi_mean(g, s) == pytest.approx(quasi_mean(f, s), rel=1e-12)

    neg = parse_generator("neg(log)", "[0.5,2]")
    log = parse_generator("log", "[0.5,2]")
    assert quasi_mean(neg, s) == pytest.approx(quasi_mean(log, s), rel=1e-12)


@pytest.mark.parametrize("text, domain, low, high", [
    ("pow(-1)", "(0,inf)", 0.1, 50.0),
    ("exp(-1)", "[0.5,2]", 0.5, 2.0),
    ("neg(log)", "(0,10)", 0.01, 9.9),
])
def test_canonicalize_preserves_means(text, domain, low, high):
    """遞減生成函數轉成遞增形式後平均不變（100 組固定種子取樣）"""
    g = parse_generator(text, domain)
    c = g.canonicalize()
    assert c.increasing

    rng = np.random.default_rng(20240607)
    for _ in range(100):
        n = int(rng.integers(1, 7))
        s = WeightedSample(tuple(rng.uniform(low, high, n)), tuple(rng.dirichlet(np.ones(n))))
        m = quasi_mean(g, s)
        assert quasi_mean(c, s) == pytest.approx(m, abs=g.tol.tol_mean * max(1.0, abs(m)))


def test_points_outside_domain():
    g = parse_generator("log", "[0.5,2]")
    with pytest.raises(DomainError):
        quasi_mean(g, WeightedSample.parse("1,3"))


def test_batch_matches_scalar():
    g = parse_generator("pow(3)", "[0.5,2]")
    samples = [
        WeightedSample.parse("0.5:0.5,2:0.5"),
        WeightedSample.parse("0.7:0.1,1.2:0.9"),
        WeightedSample.parse("1.9:0.6,1.0:0.4"),
    ]
    points, weights = samples_to_arrays(samples)
    batch = quasi_mean_batch(g, points, weights)
    for value, s in zip(batch, samples):
        assert value == pytest.approx(quasi_mean(g, s), rel=1e-14)

    with pytest.raises(InvalidParameter):
        samples_to_arrays([samples[0], WeightedSample.uniform([1.0, 1.5, 1.8])])


def test_weighted_two_point():
    g = parse_generator("pow(2)", "(0,10)")
    assert weighted_two_point_mean(g, 1.0, 7.0, 0.5) == pytest.approx(5.0, rel=1e-12)
    expected = np.sqrt(0.25 * 1.0 + 0.75 * 49.0)
    assert weighted_two_point_mean(g, 1.0, 7.0, 0.25) == pytest.approx(expected, rel=1e-12)


def test_pairwise_sum():
    assert pairwise_sum(np.array([1.0, 2.0, 3.0, 4.0, 5.0])) == 15.0
    rows = pairwise_sum(np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]))
    assert list(rows) == [6.0, 15.0]


def test_power_means():
    """P_p 與 pow(p) 生成的平均一致，且隨 p 遞增"""
    s = WeightedSample.parse("1,4")
    assert power_mean(0, s) == pytest.approx(2.0, rel=1e-14)
    assert power_mean(1, s) == pytest.approx(2.5, rel=1e-14)
    assert power_mean(-1, s) == pytest.approx(1.6, rel=1e-14)

    s = WeightedSample.parse("0.3:0.2,2.5:0.5,7:0.3")
    for p in (-2, -1, 0.5, 2, 3):
        g = parse_generator(f"pow({p})", "(0,10)")
        assert power_mean(p, s) == pytest.approx(quasi_mean(g, s), rel=1e-10)

    values = [power_mean(p, s) for p in (-2, -1, 0, 0.5, 1, 2, 3)]
    assert all(x <= y for x, y in zip(values, values[1:]))

    with pytest.raises(DomainError):
        power_mean(2, WeightedSample.parse("-1,2"))


def test_power_mean_no_overflow():
    s = WeightedSample.parse("1e300,1e301")
    assert 1e300 <= power_mean(3, s) <= 1e301


def test_exponential_mean():
    s = WeightedSample.parse("0,2")
    assert exponential_mean(1.0, s) == pytest.approx(np.log((1 + np.e ** 2) / 2), rel=1e-14)

    g = parse_generator("exp(-0.5)", "[-1,3]")
    s = WeightedSample.parse("-0.5:0.3,2.5:0.7")
    assert exponential_mean(-0.5, s) == pytest.approx(quasi_mean(g, s), rel=1e-10)

    with pytest.raises(InvalidParameter):
        exponential_mean(0.0, s)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
