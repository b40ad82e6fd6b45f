"""
Comparison - 擬算術平均的偏序判定

負責：
1. 六個等價判準（合成凸性、Páles 比值、導數比、Mikusiński 指標、取樣平均、加權兩點）
2. 仿射等價（A^[f] = A^[g] ⟺ g = αf + β）
3. 綜合判定 Less / Greater / Equal / Incomparable
4. 依引理構造不可比較的見證取樣

判準違反量一律正規化；超過 10·tol_compare 才算 Refutes。
"""

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import SamplingPlan, Tolerances
from .errors import (
    CriteriaConflict,
    DomainError,
    NoWitnessFound,
    NotDifferentiable,
    ZeroDerivative,
)
from .generator import Generator
from .means import WeightedSample, quasi_mean, quasi_mean_batch


class Criterion(str, Enum):
    COMPOSITION_CONVEXITY = "CompositionConvexity"
    PALES_RATIO = "PalesRatio"
    DERIVATIVE_RATIO = "DerivativeRatio"
    MIKUSINSKI_INDEX = "MikusinskiIndex"
    SAMPLED_MEANS = "SampledMeans"
    WEIGHTED_TWO_POINT = "WeightedTwoPoint"


class CriterionVerdict(str, Enum):
    SUPPORTS_LE = "SupportsLE"
    SUPPORTS_GE = "SupportsGE"
    SUPPORTS_EQUAL = "SupportsEqual"
    REFUTES = "Refutes"
    NOT_APPLICABLE = "NotApplicable"


class Relation(str, Enum):
    LESS = "Less"
    GREATER = "Greater"
    EQUAL = "Equal"
    INCOMPARABLE = "Incomparable"


_EVIDENCE_PER_SIDE = 3
# |f′| ≤ 這個比例 × max|f′| 視為導數消失
_VANISH_REL = 1e-12
_CROSS_FLOOR = 1e-12
_MAX_BISECT = 200
_TWO_POINT_XI = 1.0 / 3.0
# 交點搜尋用的相對位置 t/ε：靠近 x0 加密
_CROSSING_GRID = np.unique(np.concatenate([
    np.geomspace(1e-6, 1.0, 97),
    np.linspace(0.0, 1.0, 513)[1:],
]))


@dataclass(frozen=True)
class Probe:
    """單一探測紀錄（輸入與計算值）"""
    inputs: Dict[str, object]
    values: Dict[str, float]
    violates: Optional[str] = None

    def to_dict(self) -> dict:
        return {'inputs': self.inputs, 'values': self.values, 'violates': self.violates}


@dataclass
class CriterionReport:
    """單一判準的結果"""
    criterion: Criterion
    verdict: CriterionVerdict
    evidence: List[Probe] = field(default_factory=list)
    violation_le: float = 0.0
    violation_ge: float = 0.0
    note: str = ""
    witness_le_violated: Optional[WeightedSample] = None
    witness_ge_violated: Optional[WeightedSample] = None

    @property
    def applicable(self) -> bool:
        return self.verdict != CriterionVerdict.NOT_APPLICABLE

    def to_dict(self) -> dict:
        return {
            'criterion': self.criterion.value,
            'verdict': self.verdict.value,
            'violation_le': self.violation_le,
            'violation_ge': self.violation_ge,
            'note': self.note,
            'evidence': [p.to_dict() for p in self.evidence],
        }


@dataclass
class ComparisonVerdict:
    """compare() 的結果"""
    relation: Relation
    reports: List[CriterionReport] = field(default_factory=list)
    witness_le_violated: Optional[WeightedSample] = None
    witness_ge_violated: Optional[WeightedSample] = None
    affine: Optional[Tuple[float, float]] = None

    @property
    def comparable(self) -> bool:
        return self.relation != Relation.INCOMPARABLE


@dataclass(frozen=True)
class WitnessPair:
    """不可比較的見證：s_plus 上 A^[f] > A^[g]，s_minus 上 A^[f] < A^[g]"""
    s_plus: WeightedSample
    s_minus: WeightedSample
    gap_plus: float
    gap_minus: float
    x0: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            'x0': self.x0,
            's_plus': self.s_plus.to_dict(),
            's_minus': self.s_minus.to_dict(),
            'gap_plus': self.gap_plus,
            'gap_minus': self.gap_minus,
        }


# ============================================================
# 共用工具
# ============================================================

def _defaults(
    f: Generator,
    plan: Optional[SamplingPlan],
    tol: Optional[Tolerances]
) -> Tuple[SamplingPlan, Tolerances]:
    return plan or SamplingPlan(), tol or f.tol


def _require_common_domain(f: Generator, g: Generator):
    if f.domain != g.domain:
        raise DomainError(f"只比較同一區間上的平均：{f.domain} 與 {g.domain}")


def _prepare(f: Generator, g: Generator) -> Tuple[Generator, Generator]:
    _require_common_domain(f, g)
    return f.canonicalize(), g.canonicalize()


def _classify(violation_le: float, violation_ge: float, tol: Tolerances) -> CriterionVerdict:
    threshold = tol.refute_threshold
    le_ok = violation_le <= threshold
    ge_ok = violation_ge <= threshold
    if le_ok and ge_ok:
        return CriterionVerdict.SUPPORTS_EQUAL
    if le_ok:
        return CriterionVerdict.SUPPORTS_LE
    if ge_ok:
        return CriterionVerdict.SUPPORTS_GE
    return CriterionVerdict.REFUTES


def _not_applicable(criterion: Criterion, note: str) -> CriterionReport:
    return CriterionReport(criterion, CriterionVerdict.NOT_APPLICABLE, note=note)


def _build_report(
    criterion: Criterion,
    le: np.ndarray,
    ge: np.ndarray,
    describe: Callable[[int], Tuple[dict, dict]],
    tol: Tolerances,
    note: str = ""
) -> CriterionReport:
    """
    由逐探測的正規化違反量組出報告

    Args:
        le: 每個探測對 f ≤ g 的違反量（> 0 表示違反）
        ge: 每個探測對 f ≥ g 的違反量
        describe: index -> (inputs, values)
    """
    le = np.nan_to_num(np.asarray(le, dtype=float), nan=0.0)
    ge = np.nan_to_num(np.asarray(ge, dtype=float), nan=0.0)
    if le.size == 0:
        return _not_applicable(criterion, "沒有可用的探測點")

    worst_le, worst_ge = float(np.max(le)), float(np.max(ge))
    threshold = tol.refute_threshold
    evidence = []
    for label, arr, worst in (("LE", le, worst_le), ("GE", ge, worst_ge)):
        k = _EVIDENCE_PER_SIDE if worst > threshold else 1
        for i in np.argsort(-arr, kind='stable')[:k]:
            inputs, values = describe(int(i))
            evidence.append(Probe(
                inputs=inputs,
                values=values,
                violates=label if arr[i] > threshold else None
            ))

    return CriterionReport(
        criterion=criterion,
        verdict=_classify(worst_le, worst_ge, tol),
        evidence=evidence,
        violation_le=worst_le,
        violation_ge=worst_ge,
        note=note
    )


def _vanishing(d: np.ndarray) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    peak = float(np.max(np.abs(d))) if d.size else 0.0
    return np.abs(d) <= _VANISH_REL * peak


def _pair_indices(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """所有 i ≠ j 的有序索引對"""
    return np.nonzero(~np.eye(n, dtype=bool))


# ============================================================
# 判準
# ============================================================

def composition_convexity_test(
    f: Generator,
    g: Generator,
    plan: Optional[SamplingPlan] = None,
    tol: Optional[Tolerances] = None
) -> CriterionReport:
    """
    φ = g ∘ f⁻¹ 的中點凸性

    φ 在 f 值域的等距網格上取樣；凸 ⇒ SupportsLE，凹 ⇒ SupportsGE。
    """
    plan, tol = _defaults(f, plan, tol)
    f, g = _prepare(f, g)
    a, b = f.bounds()
    u = np.linspace(f.eval(a), f.eval(b), plan.grid_n)
    x = np.clip(f.invert(u), a, b)
    phi = g.eval(x)

    i, k = np.triu_indices(plan.grid_n, 2)
    keep = (i + k) % 2 == 0
    i, k = i[keep], k[keep]
    m = (i + k) // 2
    gap = 0.5 * (phi[i] + phi[k]) - phi[m]
    scale = max(abs(float(phi[-1] - phi[0])), np.finfo(float).tiny)

    def describe(j):
        return (
            {'u': float(u[i[j]]), 'v': float(u[k[j]])},
            {'phi_u': float(phi[i[j]]), 'phi_v': float(phi[k[j]]), 'phi_mid': float(phi[m[j]])}
        )

    return _build_report(Criterion.COMPOSITION_CONVEXITY, -gap / scale, gap / scale, describe, tol)


def pales_ratio_test(
    f: Generator,
    g: Generator,
    plan: Optional[SamplingPlan] = None,
    tol: Optional[Tolerances] = None
) -> CriterionReport:
    """
    Páles 比值：(f(x)−f(y))/(f(x)−f(z)) ≥ (g(x)−g(y))/(g(x)−g(z))，x < y < z

    三元組 = pales_grid 網格上所有組合 + n_random_triples 個種子隨機三元組。
    分母低於 tol_denominator·scale 的三元組略過。
    """
    plan, tol = _defaults(f, plan, tol)
    f, g = _prepare(f, g)
    a, b = f.bounds()

    grid = f.grid(plan.pales_grid)
    combos = np.array(list(itertools.combinations(range(len(grid)), 3)))
    stratified = grid[combos]

    rng = np.random.default_rng(plan.seed)
    rand = np.sort(rng.uniform(a, b, (plan.n_random_triples, 3)), axis=1)
    spread = 1e-3 * (b - a)
    rand = rand[
        (rand[:, 1] > rand[:, 0]) & (rand[:, 2] > rand[:, 1]) & (rand[:, 2] - rand[:, 0] >= spread)
    ]
    triples = np.vstack([stratified, rand])
    x, y, z = triples.T

    fx, fy, fz = f.eval(x), f.eval(y), f.eval(z)
    gx, gy, gz = g.eval(x), g.eval(y), g.eval(z)
    scale_f = abs(f.eval(b) - f.eval(a))
    scale_g = abs(g.eval(b) - g.eval(a))
    usable = (
        (np.abs(fx - fz) >= tol.tol_denominator * scale_f)
        & (np.abs(gx - gz) >= tol.tol_denominator * scale_g)
    )
    if not np.any(usable):
        return _not_applicable(Criterion.PALES_RATIO, "所有三元組的分母都太小")

    idx = np.nonzero(usable)[0]
    rf = (fx[idx] - fy[idx]) / (fx[idx] - fz[idx])
    rg = (gx[idx] - gy[idx]) / (gx[idx] - gz[idx])

    def describe(j):
        t = idx[j]
        return (
            {'x': float(x[t]), 'y': float(y[t]), 'z': float(z[t])},
            {'ratio_f': float(rf[j]), 'ratio_g': float(rg[j])}
        )

    skipped = len(triples) - len(idx)
    note = f"略過 {skipped} 個退化三元組" if skipped else ""
    return _build_report(Criterion.PALES_RATIO, rg - rf, rf - rg, describe, tol, note)


def derivative_ratio_test(
    f: Generator,
    g: Generator,
    plan: Optional[SamplingPlan] = None,
    tol: Optional[Tolerances] = None
) -> CriterionReport:
    """r = f′/g′ 非遞增 ⇒ SupportsLE；導數不可用或消失 ⇒ NotApplicable"""
    plan, tol = _defaults(f, plan, tol)
    f, g = _prepare(f, g)
    if not (f.d1_available and g.d1_available):
        return _not_applicable(Criterion.DERIVATIVE_RATIO, "一階導數不可用")

    x = f.grid(plan.grid_n)
    try:
        df, dg = f.derivative(x, 1), g.derivative(x, 1)
    except NotDifferentiable as e:
        return _not_applicable(Criterion.DERIVATIVE_RATIO, str(e))

    vanish = _vanishing(df) | _vanishing(dg)
    if np.any(vanish):
        at = float(x[np.argmax(vanish)])
        return _not_applicable(Criterion.DERIVATIVE_RATIO, f"導數在 x = {at!r} 附近消失")

    r = df / dg
    step = np.diff(r)
    # 逐步長的相對變化；端點附近 r 爆大時不會壓低其他地方的違反
    scale = np.maximum(np.maximum(np.abs(r[:-1]), np.abs(r[1:])), np.finfo(float).tiny)

    def describe(j):
        return (
            {'x': float(x[j]), 'x_next': float(x[j + 1])},
            {'ratio': float(r[j]), 'ratio_next': float(r[j + 1])}
        )

    return _build_report(Criterion.DERIVATIVE_RATIO, step / scale, -step / scale, describe, tol)


def mikusinski_index(f: Generator, x: float) -> float:
    """
    Mikusiński 指標 f″(x)/f′(x)

    Raises:
        NotDifferentiable: x 附近沒有連續二階導數
        ZeroDerivative: f′(x) = 0
    """
    x = float(x)
    if not f.smooth_near(x, 2):
        raise NotDifferentiable(f"{f.text} 在 x = {x!r} 附近不是 C²")
    d1 = f.derivative(x, 1)
    if d1 == 0:
        raise ZeroDerivative(f"{f.text} 在 x = {x!r} 的一階導數為 0")
    return f.derivative(x, 2) / d1


def mikusinski_test(
    f: Generator,
    g: Generator,
    plan: Optional[SamplingPlan] = None,
    tol: Optional[Tolerances] = None
) -> CriterionReport:
    """網格上 index_f ≤ index_g ⇒ SupportsLE"""
    plan, tol = _defaults(f, plan, tol)
    f, g = _prepare(f, g)
    if not (f.d2_available and g.d2_available):
        return _not_applicable(Criterion.MIKUSINSKI_INDEX, "二階導數不可用（非 C²）")

    x = f.grid(plan.grid_n)
    try:
        df1, dg1 = f.derivative(x, 1), g.derivative(x, 1)
        df2, dg2 = f.derivative(x, 2), g.derivative(x, 2)
    except NotDifferentiable as e:
        return _not_applicable(Criterion.MIKUSINSKI_INDEX, str(e))

    vanish = _vanishing(df1) | _vanishing(dg1)
    if np.any(vanish):
        at = float(x[np.argmax(vanish)])
        return _not_applicable(Criterion.MIKUSINSKI_INDEX, f"導數在 x = {at!r} 附近消失")

    idx_f, idx_g = df2 / df1, dg2 / dg1
    scale = np.maximum(1.0, np.maximum(np.abs(idx_f), np.abs(idx_g)))

    def describe(j):
        return {'x': float(x[j])}, {'index_f': float(idx_f[j]), 'index_g': float(idx_g[j])}

    return _build_report(
        Criterion.MIKUSINSKI_INDEX, (idx_f - idx_g) / scale, (idx_g - idx_f) / scale, describe, tol
    )


def _mean_probe_report(
    criterion: Criterion,
    f: Generator,
    g: Generator,
    groups: Sequence[Tuple[np.ndarray, np.ndarray]],
    tol: Tolerances
) -> CriterionReport:
    """直接比較兩個平均；兩個方向都被違反時附上見證"""
    a, b = f.bounds()
    width = b - a
    diffs, rows = [], []
    for gi, (points, weights) in enumerate(groups):
        diffs.append(quasi_mean_batch(f, points, weights) - quasi_mean_batch(g, points, weights))
        rows.extend((gi, r) for r in range(len(points)))
    diff = np.concatenate(diffs)

    def sample(j) -> WeightedSample:
        gi, r = rows[j]
        points, weights = groups[gi]
        return WeightedSample(tuple(points[r]), tuple(weights[r]))

    def describe(j):
        return sample(j).to_dict(), {'mean_f_minus_mean_g': float(diff[j])}

    report = _build_report(criterion, diff / width, -diff / width, describe, tol)
    threshold = tol.refute_threshold
    if report.violation_le > threshold:
        report.witness_le_violated = sample(int(np.argmax(diff)))
    if report.violation_ge > threshold:
        report.witness_ge_violated = sample(int(np.argmin(diff)))
    return report


def _two_point_group(grid: np.ndarray, xis: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    i, j = _pair_indices(len(grid))
    pairs = np.column_stack([grid[i], grid[j]])
    points = np.tile(pairs, (len(xis), 1))
    xi = np.repeat(xis, len(i))
    weights = np.column_stack([xi, 1.0 - xi])
    return points, weights


def sampled_means_test(
    f: Generator,
    g: Generator,
    plan: Optional[SamplingPlan] = None,
    tol: Optional[Tolerances] = None
) -> CriterionReport:
    """
    直接比較平均值

    探測集：長度 2..n_max 的種子隨機取樣（Dirichlet 權重），
    以及 pair_grid 網格上所有兩點配 xi_count 個 ξ。
    """
    plan, tol = _defaults(f, plan, tol)
    f, g = _prepare(f, g)
    a, b = f.bounds()

    rng = np.random.default_rng(plan.seed)
    per_length = max(1, plan.n_samples // (plan.n_max - 1))
    groups = []
    for n in range(2, plan.n_max + 1):
        points = rng.uniform(a, b, (per_length, n))
        weights = rng.dirichlet(np.ones(n), per_length)
        groups.append((points, weights / weights.sum(axis=1, keepdims=True)))

    xis = np.linspace(0.0, 1.0, plan.xi_count + 2)[1:-1]
    groups.append(_two_point_group(f.grid(plan.pair_grid), xis))
    return _mean_probe_report(Criterion.SAMPLED_MEANS, f, g, groups, tol)


def weighted_two_point_test(
    f: Generator,
    g: Generator,
    plan: Optional[SamplingPlan] = None,
    tol: Optional[Tolerances] = None,
    xi: float = _TWO_POINT_XI
) -> CriterionReport:
    """固定 ξ 的加權兩點平均 A_ξ(a1, a2) 在所有網格點對上比較"""
    plan, tol = _defaults(f, plan, tol)
    f, g = _prepare(f, g)
    group = _two_point_group(f.grid(plan.pair_grid), np.array([xi]))
    return _mean_probe_report(Criterion.WEIGHTED_TWO_POINT, f, g, [group], tol)


CRITERIA = (
    composition_convexity_test,
    pales_ratio_test,
    derivative_ratio_test,
    mikusinski_test,
    sampled_means_test,
    weighted_two_point_test,
)


# ============================================================
# 仿射等價與綜合判定
# ============================================================

def affine_equivalence(
    f: Generator,
    g: Generator,
    plan: Optional[SamplingPlan] = None,
    tol: Optional[Tolerances] = None
) -> Optional[Tuple[float, float]]:
    """
    擬合 g = αf + β

    以網格 1/4、3/4 位置兩點求 α、β，再在整個網格驗證殘差。

    Returns:
        (alpha, beta)，不是仿射關係時返回 None
    """
    plan, tol = _defaults(f, plan, tol)
    _require_common_domain(f, g)
    x = f.grid(plan.grid_n)
    fv, gv = f.eval(x), g.eval(x)
    i, j = len(x) // 4, 3 * len(x) // 4
    if fv[j] == fv[i]:
        return None
    alpha = float((gv[j] - gv[i]) / (fv[j] - fv[i]))
    beta = float(gv[i] - alpha * fv[i])
    if alpha == 0 or not np.isfinite(alpha) or not np.isfinite(beta):
        return None

    residual = np.abs(gv - (alpha * fv + beta))
    scale = max(float(np.ptp(gv)), abs(alpha) * float(np.ptp(fv)))
    rounding = 64 * np.finfo(float).eps * (
        float(np.max(np.abs(gv))) + abs(alpha) * float(np.max(np.abs(fv))) + abs(beta)
    )
    if float(np.max(residual)) > tol.tol_affine * scale + rounding:
        return None
    return alpha, beta


def compare(
    f: Generator,
    g: Generator,
    plan: Optional[SamplingPlan] = None,
    tol: Optional[Tolerances] = None
) -> ComparisonVerdict:
    """
    判定 A^[f] 與 A^[g] 的順序

    Args:
        f, g: 同一區間上的生成函數
        plan: 取樣計畫（seed 決定所有隨機探測）
        tol: 容忍值

    Returns:
        ComparisonVerdict

    兩個方向都有直接重算過的平均見證時即為 Incomparable，
    即使某些取樣判準沒有抽到交叉區域。

    Raises:
        CriteriaConflict: 沒有判準否定，但支持的方向不一致；
            或有判準否定卻找不到兩個方向的見證、其他判準仍支持某方向
        NoWitnessFound: 判準全部否定但找不到見證
    """
    plan, tol = _defaults(f, plan, tol)
    _require_common_domain(f, g)

    affine = affine_equivalence(f, g, plan, tol)
    if affine is not None:
        return ComparisonVerdict(Relation.EQUAL, affine=affine)

    fc, gc = f.canonicalize(), g.canonicalize()
    reports = [criterion(fc, gc, plan, tol) for criterion in CRITERIA]
    applicable = [r for r in reports if r.applicable]
    verdicts = {r.verdict for r in applicable}
    refuting = [r for r in applicable if r.verdict == CriterionVerdict.REFUTES]

    witness_le, witness_ge = _collect_witnesses(reports)
    if witness_le is not None and witness_ge is not None:
        return _incomparable(reports, witness_le, witness_ge)

    if not refuting:
        directional = verdicts - {CriterionVerdict.SUPPORTS_EQUAL}
        if directional == {CriterionVerdict.SUPPORTS_LE}:
            return ComparisonVerdict(Relation.LESS, reports)
        if directional == {CriterionVerdict.SUPPORTS_GE}:
            return ComparisonVerdict(Relation.GREATER, reports)
        raise CriteriaConflict(
            f"{f.text} 與 {g.text} 的判準無法決定方向：{sorted(v.value for v in verdicts)}",
            reports
        )

    a, b = fc.bounds()
    threshold = tol.refute_threshold * (b - a)
    found = _local_witnesses(fc, gc, _refuted_centers(fc, refuting), threshold)
    witness_le = witness_le or found[0]
    witness_ge = witness_ge or found[1]
    if witness_le is None or witness_ge is None:
        fallback = _search_witnesses(fc, gc, plan, tol)
        witness_le = witness_le or fallback[0]
        witness_ge = witness_ge or fallback[1]
    if witness_le is not None and witness_ge is not None:
        return _incomparable(reports, witness_le, witness_ge)

    if len(refuting) == len(applicable):
        raise NoWitnessFound(f"{f.text} 與 {g.text} 判準全部否定，但找不到兩個方向的見證")
    raise CriteriaConflict(
        f"{f.text} 與 {g.text} 的判準互相矛盾："
        + ", ".join(f"{r.criterion.value}={r.verdict.value}" for r in applicable),
        reports
    )


def _incomparable(
    reports: List[CriterionReport],
    witness_le: WeightedSample,
    witness_ge: WeightedSample
) -> ComparisonVerdict:
    return ComparisonVerdict(
        Relation.INCOMPARABLE,
        reports,
        witness_le_violated=witness_le,
        witness_ge_violated=witness_ge
    )


def _collect_witnesses(
    reports: Sequence[CriterionReport]
) -> Tuple[Optional[WeightedSample], Optional[WeightedSample]]:
    le = ge = None
    for report in reports:
        le = le or report.witness_le_violated
        ge = ge or report.witness_ge_violated
    return le, ge


def _refuted_centers(f: Generator, refuting: Sequence[CriterionReport]) -> List[float]:
    """否定判準的違反探測位置（u、v 在 f 值域，換回 x）"""
    centers = []
    for report in refuting:
        for probe in report.evidence:
            if probe.violates is None:
                continue
            inputs = probe.inputs
            for key in ('x', 'x_next', 'y', 'z'):
                if key in inputs:
                    centers.append(float(inputs[key]))
            for key in ('u', 'v'):
                if key in inputs:
                    centers.append(float(f.invert(float(inputs[key]))))
            centers.extend(float(p) for p in inputs.get('points', ()))
    return centers


def _local_witnesses(
    f: Generator,
    g: Generator,
    centers: Sequence[float],
    threshold: float
) -> Tuple[Optional[WeightedSample], Optional[WeightedSample]]:
    """
    多尺度兩點搜尋

    在每個中心（加上整個區間的粗網格）放寬度 h 的兩點取樣，
    h 從 1e-3 到 1/4 區間寬，ξ ∈ {1/4, 1/2, 3/4}；兩點整段平移進區間內。
    """
    a, b = f.bounds()
    width = b - a
    c = np.concatenate([np.asarray(centers, dtype=float), np.linspace(a, b, 65)])
    c = np.clip(c, a, b)
    spreads = width * np.geomspace(1e-3, 0.25, 12)
    xis = np.array([0.25, 0.5, 0.75])

    cc, hh, xx = (arr.ravel() for arr in np.meshgrid(c, spreads, xis, indexing='ij'))
    lo = np.clip(cc - 0.5 * hh, a, b - hh)
    points = np.column_stack([lo, lo + hh])
    weights = np.column_stack([xx, 1.0 - xx])
    diff = quasi_mean_batch(f, points, weights) - quasi_mean_batch(g, points, weights)
    diff = np.nan_to_num(diff, nan=0.0)

    def sample(j) -> WeightedSample:
        return WeightedSample(tuple(points[j]), tuple(weights[j]))

    plus, minus = int(np.argmax(diff)), int(np.argmin(diff))
    return (
        sample(plus) if diff[plus] > threshold else None,
        sample(minus) if diff[minus] < -threshold else None,
    )


def _search_witnesses(
    f: Generator,
    g: Generator,
    plan: SamplingPlan,
    tol: Tolerances
) -> Tuple[Optional[WeightedSample], Optional[WeightedSample]]:
    """在導數消失點與粗網格上逐點套用引理構造"""
    a, b = f.bounds()
    x0s = vanishing_derivative_points(f, g, plan) + [float(v) for v in np.linspace(a, b, 9)]
    candidates = []
    for x0 in x0s:
        candidates.extend(_lemma_candidates(f, g, x0))
    return _pick_witnesses(candidates, tol.refute_threshold * (b - a))[:2]


def vanishing_derivative_points(
    f: Generator,
    g: Generator,
    plan: Optional[SamplingPlan] = None
) -> List[float]:
    """網格上恰好一個生成函數的一階導數（數值上）消失的點"""
    plan = plan or SamplingPlan()
    _require_common_domain(f, g)
    if not (f.d1_available and g.d1_available):
        return []
    x = f.grid(plan.grid_n)
    try:
        vf = _vanishing(f.derivative(x, 1))
        vg = _vanishing(g.derivative(x, 1))
    except NotDifferentiable:
        return []
    return [float(v) for v in x[vf ^ vg]]


# ============================================================
# 引理構造
# ============================================================

def _first_crossing(first: Generator, second: Generator, x0: float, eps: float) -> Optional[float]:
    """
    正規化 first(x0)=second(x0)=0、first(x0+ε)=2、second(x0+ε)=1，
    找出 first 低於 second 之後第一個交點 ξ
    """
    f0, s0 = first.eval(x0), second.eval(x0)
    f_span = first.eval(x0 + eps) - f0
    s_span = second.eval(x0 + eps) - s0
    if f_span == 0 or s_span == 0:
        return None

    def gap(x):
        return 2.0 * (first.eval(x) - f0) / f_span - (second.eval(x) - s0) / s_span

    xs = x0 + eps * _CROSSING_GRID
    d = gap(xs)
    below = np.nonzero(d < -_CROSS_FLOOR)[0]
    if not below.size:
        return None
    above = np.nonzero(d[below[0]:] >= 0)[0]
    if not above.size:
        return None
    j = below[0] + above[0]

    lo, hi = float(xs[j - 1]), float(xs[j])
    for _ in range(_MAX_BISECT):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if gap(mid) < 0:
            lo = mid
        else:
            hi = mid
    return hi


def _lemma_candidates(f: Generator, g: Generator, x0: float) -> List[Tuple[float, WeightedSample]]:
    """x0 兩側、兩種角色分配下的半權重兩點取樣及其平均差 A^[f] − A^[g]"""
    a, b = f.bounds()
    width = b - a
    out = []
    for room, sign in ((b - x0, 1.0), (x0 - a, -1.0)):
        if room <= 1e-9 * width:
            continue
        eps = sign * 0.5 * room
        for first, second in ((f, g), (g, f)):
            xi = _first_crossing(first, second, x0, eps)
            if xi is None:
                continue
            sample = WeightedSample.two_point(min(x0, xi), max(x0, xi), 0.5)
            out.append((quasi_mean(f, sample) - quasi_mean(g, sample), sample))
    return out


def _pick_witnesses(
    candidates: Sequence[Tuple[float, WeightedSample]],
    threshold: float
) -> Tuple[Optional[WeightedSample], Optional[WeightedSample], float, float]:
    plus = max(candidates, key=lambda c: c[0], default=None)
    minus = min(candidates, key=lambda c: c[0], default=None)
    s_plus = plus[1] if plus is not None and plus[0] > threshold else None
    s_minus = minus[1] if minus is not None and minus[0] < -threshold else None
    return (
        s_plus,
        s_minus,
        plus[0] if s_plus is not None else 0.0,
        minus[0] if s_minus is not None else 0.0,
    )


def find_incomparability_witness(
    f: Generator,
    g: Generator,
    x0: float,
    plan: Optional[SamplingPlan] = None,
    tol: Optional[Tolerances] = None
) -> WitnessPair:
    """
    引理的構造性證明

    在 x0 右側（ε > 0）與左側（ε < 0）各做一次：
    正規化兩個生成函數、二分找第一個交點 ξ，
    半權重取樣 (x0, ξ) 上兩個平均嚴格不同。

    Args:
        f, g: 生成函數（同一區間）
        x0: 構造起點，通常取某一方導數消失之處

    Returns:
        WitnessPair（兩個取樣都已直接重算驗證）

    Raises:
        NoWitnessFound: 任一方向找不到嚴格違反
    """
    plan, tol = _defaults(f, plan, tol)
    fc, gc = _prepare(f, g)
    a, b = fc.bounds()
    if not a <= x0 <= b:
        raise DomainError(f"x0 = {x0} 不在 {f.domain} 內")

    candidates = _lemma_candidates(fc, gc, float(x0))
    s_plus, s_minus, gap_plus, gap_minus = _pick_witnesses(candidates, tol.refute_threshold * (b - a))
    if s_plus is None or s_minus is None:
        missing = "A^[f] > A^[g]" if s_plus is None else "A^[f] < A^[g]"
        raise NoWitnessFound(f"在 x0 = {x0!r} 找不到 {missing} 的見證（{f.text} vs {g.text}）")
    return WitnessPair(s_plus, s_minus, gap_plus, gap_minus, x0=float(x0))


# ============================================================
# 序列化
# ============================================================

def _sample_dict(sample: Optional[WeightedSample]) -> Optional[dict]:
    return sample.to_dict() if sample is not None else None


def verdict_to_dict(
    verdict: ComparisonVerdict,
    tol: Optional[Tolerances] = None,
    plan: Optional[SamplingPlan] = None
) -> dict:
    """穩定、可重播的 JSON 結構"""
    tol = tol or Tolerances()
    plan = plan or SamplingPlan()
    affine = None
    if verdict.affine is not None:
        affine = {'alpha': verdict.affine[0], 'beta': verdict.affine[1]}
    return {
        'relation': verdict.relation.value,
        'affine': affine,
        'criteria': [r.to_dict() for r in verdict.reports],
        'witnesses': {
            'le_violated': _sample_dict(verdict.witness_le_violated),
            'ge_violated': _sample_dict(verdict.witness_ge_violated),
        },
        'tolerances': tol.to_dict(),
        'plan': plan.to_dict(),
        'seed': plan.seed,
    }
