"""
Means - 擬算術平均

A^[f](a) = f⁻¹(Σ wᵢ·f(aᵢ))，以及冪平均、指數平均兩個特例。
加總一律先依點排序再做成對（樹狀）加總，結果與輸入順序無關。
"""

from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError, InvalidParameter, ParseError
from .generator import Generator


WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True)
class WeightedSample:
    """帶正權重（總和為 1）的取樣點"""
    points: Tuple[float, ...]
    weights: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, 'points', tuple(float(p) for p in self.points))
        object.__setattr__(self, 'weights', tuple(float(w) for w in self.weights))
        if len(self.points) < 1:
            raise InvalidParameter("取樣至少要有一個點")
        if len(self.points) != len(self.weights):
            raise InvalidParameter("點與權重個數不同")
        if not all(np.isfinite(self.points)):
            raise InvalidParameter(f"取樣點必須是有限值：{self.points}")
        if not all(w > 0 for w in self.weights):
            raise InvalidParameter(f"權重必須為正：{self.weights}")
        if abs(sum(self.weights) - 1.0) > WEIGHT_SUM_TOL:
            raise InvalidParameter(f"權重總和必須為 1：{sum(self.weights)!r}")

    @classmethod
    def uniform(cls, points: Iterable[float]) -> "WeightedSample":
        points = tuple(points)
        n = len(points)
        return cls(points, (1.0 / n,) * n)

    @classmethod
    def two_point(cls, a1: float, a2: float, xi: float = 0.5) -> "WeightedSample":
        if not 0 < xi < 1:
            raise InvalidParameter(f"ξ 必須在 (0,1) 之間：{xi}")
        return cls((a1, a2), (xi, 1.0 - xi))

    @classmethod
    def parse(cls, text: str) -> "WeightedSample":
        """
        解析 CLI 取樣字串

        Args:
            text: "p1:w1,p2:w2,…" 或 "p1,p2,…"（等權重）

        Returns:
            WeightedSample 物件
        """
        items = [item.strip() for item in (text or "").split(',') if item.strip()]
        if not items:
            raise ParseError(f"取樣字串是空的：{text!r}")
        points, weights = [], []
        try:
            for item in items:
                if ':' in item:
                    p, w = item.split(':', 1)
                    points.append(float(p))
                    weights.append(float(w))
                else:
                    points.append(float(item))
        except ValueError:
            raise ParseError(f"無法解析取樣：{text!r}")
        if weights and len(weights) != len(points):
            raise ParseError(f"權重要嘛全給、要嘛全不給：{text!r}")
        if not weights:
            return cls.uniform(points)
        return cls(tuple(points), tuple(weights))

    def sorted_arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        pts = np.asarray(self.points, dtype=float)
        wts = np.asarray(self.weights, dtype=float)
        order = np.lexsort((wts, pts))
        return pts[order], wts[order]

    def to_text(self) -> str:
        return ",".join(f"{p!r}:{w!r}" for p, w in zip(self.points, self.weights))

    def to_dict(self) -> dict:
        return {'points': list(self.points), 'weights': list(self.weights)}


def pairwise_sum(terms: np.ndarray) -> np.ndarray:
    """沿最後一軸做相鄰成對加總（順序固定）"""
    t = np.asarray(terms, dtype=float)
    while t.shape[-1] > 1:
        n = t.shape[-1]
        even = n - n % 2
        paired = t[..., 0:even:2] + t[..., 1:even:2]
        if n % 2:
            paired = np.concatenate([paired, t[..., -1:]], axis=-1)
        t = paired
    return t[..., 0]


def _check_points(g: Generator, points: np.ndarray):
    if not g.domain.contains(points, g.tol.tol_domain):
        raise DomainError(f"取樣點不在 {g.domain} 內")


def quasi_mean(g: Generator, s: WeightedSample) -> float:
    """
    擬算術平均 A^[g](s)

    Args:
        g: 生成函數
        s: 加權取樣

    Returns:
        平均值（保證落在 [min 點, max 點]）
    """
    pts, wts = s.sorted_arrays()
    _check_points(g, pts)
    if len(pts) == 1:
        return float(pts[0])
    total = float(pairwise_sum(wts * g.eval(pts)))
    x = g.invert(total)
    return float(np.clip(x, pts[0], pts[-1]))


def quasi_mean_batch(g: Generator, points: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """
    逐列計算擬算術平均（向量化，加總順序與 quasi_mean 相同）

    Args:
        g: 生成函數
        points: (m, n) 陣列
        weights: (m, n) 陣列，每列總和為 1

    Returns:
        長度 m 的平均值陣列
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    weights = np.atleast_2d(np.asarray(weights, dtype=float))
    if points.shape != weights.shape:
        raise InvalidParameter("points 與 weights 形狀不同")
    _check_points(g, points)
    order = np.lexsort((weights, points), axis=-1)
    pts = np.take_along_axis(points, order, axis=-1)
    wts = np.take_along_axis(weights, order, axis=-1)
    if pts.shape[-1] == 1:
        return pts[:, 0].copy()
    totals = pairwise_sum(wts * g.eval(pts))
    x = np.asarray(g.invert(totals), dtype=float)
    return np.clip(x, pts[:, 0], pts[:, -1])


def weighted_two_point_mean(g: Generator, a1: float, a2: float, xi: float) -> float:
    """A_ξ(a1, a2) = g⁻¹(ξ g(a1) + (1−ξ) g(a2))"""
    return quasi_mean(g, WeightedSample.two_point(a1, a2, xi))


def power_mean(p: float, s: WeightedSample) -> float:
    """
    冪平均 P_p（p = 0 為幾何平均），以 log 平移形式計算避免溢位

    Args:
        p: 冪次
        s: 加權取樣（點必須為正）

    Returns:
        平均值
    """
    pts, wts = s.sorted_arrays()
    if np.any(pts <= 0):
        raise DomainError(f"冪平均只接受正數：{s.points}")
    if len(pts) == 1:
        return float(pts[0])
    logs = np.log(pts)
    if p == 0:
        value = float(np.exp(pairwise_sum(wts * logs)))
    else:
        value = float(np.exp(logsumexp(p * logs, b=wts) / p))
    return float(np.clip(value, pts[0], pts[-1]))


def exponential_mean(lam: float, s: WeightedSample) -> float:
    """
    指數平均 E_λ = (1/λ)·log Σ wᵢ e^{λ aᵢ}（Mikusiński 指標恆為 λ）

    λ → 0 的極限是算術平均，但這裡不自動替換。
    """
    if lam == 0:
        raise InvalidParameter("指數平均需要 λ ≠ 0")
    pts, wts = s.sorted_arrays()
    if len(pts) == 1:
        return float(pts[0])
    value = float(logsumexp(lam * pts, b=wts) / lam)
    return float(np.clip(value, pts[0], pts[-1]))


def samples_to_arrays(samples: Sequence[WeightedSample]) -> Tuple[np.ndarray, np.ndarray]:
    """相同長度的取樣轉成 (m, n) 陣列"""
    lengths = {len(s.points) for s in samples}
    if len(lengths) != 1:
        raise InvalidParameter("批次計算需要相同長度的取樣")
    points = np.array([s.points for s in samples], dtype=float)
    weights = np.array([s.weights for s in samples], dtype=float)
    return points, weights

