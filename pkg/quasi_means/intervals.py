"""
Intervals - Mikusiński 視窗、凸包成員與夾擠包絡

負責：
1. M̃(x0, U) 成員判定（Mikusiński 指標落在 U 內）
2. 以指數生成函數族夾擠判定凸包成員（充分條件）
3. 兩點釘選正規化後的包絡 ĝ ≤ h ≤ f̂
4. 夾擠驗證與單側導數探測
"""

import csv
import io
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .comparison import Relation, compare, mikusinski_index
from .config import SamplingPlan, Tolerances
from .errors import (
    DomainError,
    InvalidParameter,
    NotComparable,
    NotDifferentiable,
    ParseError,
    QuasiMeanError,
    Unstable,
    ZeroDerivative,
)
from .generator import DerivativeEstimate, Domain, Generator, Side, parse_generator
from .means import quasi_mean_batch


class WindowVerdict(str, Enum):
    MEMBER = "Member"
    NOT_MEMBER = "NotMember"
    NOT_APPLICABLE = "NotApplicable"


class HullVerdict(str, Enum):
    MEMBER = "Member"
    UNKNOWN = "Unknown"


_ORDERED = (Relation.LESS, Relation.EQUAL)
# U 的無窮端點截在 ±50
_LAMBDA_CAP = 50.0
_MIN_PIN_GAP = 0.05


@dataclass(frozen=True)
class MikusinskiWindow:
    """視窗 (x0, U)，U 可為開、閉或半開區間"""
    x0: float
    U_lo: float
    U_hi: float
    lo_open: bool = False
    hi_open: bool = False

    def __post_init__(self):
        if math.isnan(self.U_lo) or math.isnan(self.U_hi) or self.U_lo > self.U_hi:
            raise InvalidParameter(f"U 需滿足 lo ≤ hi：[{self.U_lo}, {self.U_hi}]")

    @classmethod
    def parse(cls, x0: float, text: str) -> "MikusinskiWindow":
        """由 x0 與 "[0,2]" 形式的 U 建立視窗"""
        match = re.fullmatch(r"\s*([\(\[])\s*([^,]+?)\s*,\s*([^,]+?)\s*([\)\]])\s*", text or "")
        if not match:
            raise ParseError(f"無法解析 U：{text!r}")
        left, lo_text, hi_text, right = match.groups()
        try:
            lo, hi = float(lo_text), float(hi_text)
        except ValueError:
            raise ParseError(f"無法解析 U 的端點：{text!r}")
        return cls(float(x0), lo, hi, lo_open=(left == '('), hi_open=(right == ')'))

    def __str__(self) -> str:
        left = '(' if self.lo_open else '['
        right = ')' if self.hi_open else ']'
        return f"{left}{self.U_lo!r},{self.U_hi!r}{right}"

    def contains(self, value: float, tol: Optional[Tolerances] = None) -> bool:
        """端點依開閉帶容忍：閉端點向外放寬，開端點向內收緊"""
        tol = tol or Tolerances()
        slack = tol.tol_compare * max(1.0, abs(value))
        if self.lo_open:
            above = value > self.U_lo + slack
        else:
            above = value >= self.U_lo - slack
        if self.hi_open:
            below = value < self.U_hi - slack
        else:
            below = value <= self.U_hi + slack
        return above and below


# ============================================================
# 視窗與凸包
# ============================================================

def window_membership(
    f: Generator,
    w: MikusinskiWindow,
    tol: Optional[Tolerances] = None
) -> WindowVerdict:
    """
    f ∈ M̃(x0, U)？

    Returns:
        Member / NotMember（含 f′(x0) = 0）/ NotApplicable（x0 附近非 C²）

    Raises:
        DomainError: x0 不在定義域內
    """
    tol = tol or f.tol
    a, b = f.bounds()
    if not a <= w.x0 <= b:
        raise DomainError(f"x0 = {w.x0!r} 不在 {f.domain} 內")
    try:
        index = mikusinski_index(f, w.x0)
    except ZeroDerivative:
        return WindowVerdict.NOT_MEMBER
    except NotDifferentiable:
        return WindowVerdict.NOT_APPLICABLE
    return WindowVerdict.MEMBER if w.contains(index, tol) else WindowVerdict.NOT_MEMBER


def exponential_generator(lam: float, domain: Domain, tol: Optional[Tolerances] = None) -> Generator:
    """e^{λx}；λ = 0 時為 id（指標同為 λ）"""
    text = "id" if lam == 0 else f"exp({float(lam)!r})"
    return parse_generator(text, domain, tol)


@dataclass(frozen=True)
class HullResult:
    """凸包判定結果；Member 時附上證書 (λ₁, λ₂)"""
    verdict: HullVerdict
    lambda_lo: Optional[float] = None
    lambda_hi: Optional[float] = None
    comparisons: int = 0

    @property
    def certificate(self) -> Optional[Tuple[float, float]]:
        if self.verdict != HullVerdict.MEMBER:
            return None
        return self.lambda_lo, self.lambda_hi

    def to_dict(self) -> dict:
        return {
            'verdict': self.verdict.value,
            'lambda_lo': self.lambda_lo,
            'lambda_hi': self.lambda_hi,
            'comparisons': self.comparisons,
        }


def lambda_candidates(w: MikusinskiWindow, n: int = 64) -> List[float]:
    """U 內的候選 λ：等距網格加上靠兩端加密的幾何網格"""
    lo = max(w.U_lo, -_LAMBDA_CAP)
    hi = min(w.U_hi, _LAMBDA_CAP)
    if lo > hi:
        return []
    if lo == hi:
        return [] if (w.lo_open or w.hi_open) else [float(lo)]

    clustered = np.geomspace(1e-3, 1.0, max(n // 4, 2))
    t = np.unique(np.concatenate([
        np.linspace(0.0, 1.0, max(n // 2, 2)),
        clustered,
        1.0 - clustered,
    ]))
    if w.lo_open and lo == w.U_lo:
        t = t[t > 0]
    if w.hi_open and hi == w.U_hi:
        t = t[t < 1]
    return [float(v) for v in lo + t * (hi - lo)]


def hull_membership_exponential(
    h: Generator,
    w: MikusinskiWindow,
    plan: Optional[SamplingPlan] = None,
    tol: Optional[Tolerances] = None
) -> HullResult:
    """
    以 exp(λ₁) ≤ h ≤ exp(λ₂)、λ₁, λ₂ ∈ U 判定 h 屬於 M(x0, U)

    可行性對 λ 單調，二分搜尋候選網格後在邊界再細分一次。
    找不到夾擠只代表 Unknown，不代表不屬於。
    """
    plan = plan or SamplingPlan()
    tol = tol or h.tol
    a, b = h.bounds()
    if not a <= w.x0 <= b:
        raise DomainError(f"x0 = {w.x0!r} 不在 {h.domain} 內")

    lams = lambda_candidates(w, plan.lambda_candidates)
    if not lams:
        return HullResult(HullVerdict.UNKNOWN)

    cache: Dict[Tuple[float, bool], bool] = {}

    def feasible(lam: float, below: bool) -> bool:
        key = (lam, below)
        if key not in cache:
            try:
                e = exponential_generator(lam, h.domain, tol)
                pair = (e, h) if below else (h, e)
                cache[key] = compare(*pair, plan, tol).relation in _ORDERED
            except QuasiMeanError:
                cache[key] = False
        return cache[key]

    lam_lo = _boundary_search(lams, lambda lam: feasible(lam, True), feasible_low=True)
    lam_hi = None
    if lam_lo is not None:
        lam_hi = _boundary_search(lams, lambda lam: feasible(lam, False), feasible_low=False)
    if lam_lo is None or lam_hi is None:
        return HullResult(HullVerdict.UNKNOWN, comparisons=len(cache))
    return HullResult(HullVerdict.MEMBER, lam_lo, lam_hi, comparisons=len(cache))


def _boundary_search(lams: Sequence[float], ok, feasible_low: bool) -> Optional[float]:
    """
    feasible_low=True：可行集合為 λ ≤ λ*，回傳最大的可行 λ；
    反之可行集合為 λ ≥ λ*，回傳最小的可行 λ
    """
    inner, outer = (0, len(lams) - 1) if feasible_low else (len(lams) - 1, 0)
    if not ok(lams[inner]):
        return None
    if ok(lams[outer]):
        return lams[outer]
    while abs(outer - inner) > 1:
        mid = (inner + outer) // 2
        if ok(lams[mid]):
            inner = mid
        else:
            outer = mid
    refined = 0.5 * (lams[inner] + lams[outer])
    return refined if ok(refined) else lams[inner]


# ============================================================
# 包絡
# ============================================================

@dataclass(frozen=True, eq=False)
class Envelope:
    """
    兩點釘選正規化後的包絡

    (x0, x1) 內 lower = ĝ、upper = f̂；x > x1 時兩者互換。
    """
    x0: float
    x1: float
    inner_x: np.ndarray
    inner_lower: np.ndarray
    inner_upper: np.ndarray
    outer_x: np.ndarray = field(default_factory=lambda: np.empty(0))
    outer_lower: np.ndarray = field(default_factory=lambda: np.empty(0))
    outer_upper: np.ndarray = field(default_factory=lambda: np.empty(0))

    def _query(self, x, inner: np.ndarray, outer: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self.inner_x, inner)
        if self.outer_x.size:
            out = np.where(
                x > self.x1,
                np.interp(x, np.concatenate([[self.x1], self.outer_x]),
                          np.concatenate([[1.0], outer])),
                out
            )
        return out

    def lower(self, x) -> np.ndarray:
        return self._query(x, self.inner_lower, self.outer_lower)

    def upper(self, x) -> np.ndarray:
        return self._query(x, self.inner_upper, self.outer_upper)

    def normalize(self, h: Generator) -> Tuple[np.ndarray, np.ndarray]:
        """h 在內、外網格上的正規化值 (h − h(x0)) / (h(x1) − h(x0))"""
        values = h.eval(self.inner_x)
        base, span = values[0], values[-1] - values[0]
        inner = (values - base) / span
        outer = (h.eval(self.outer_x) - base) / span if self.outer_x.size else np.empty(0)
        return inner, outer

    def slack(self, h: Generator) -> np.ndarray:
        """min(h − lower, upper − h)，內外網格串接"""
        inner, outer = self.normalize(h)
        return np.concatenate([
            np.minimum(inner - self.inner_lower, self.inner_upper - inner),
            np.minimum(outer - self.outer_lower, self.outer_upper - outer),
        ])

    def min_slack(self, h: Generator) -> float:
        return float(np.min(self.slack(h)))

    def to_csv(self, h: Optional[Generator] = None) -> str:
        """欄位 x, lower, upper, h_normalized, region"""
        if h is not None:
            h_inner, h_outer = self.normalize(h)
        else:
            h_inner = h_outer = None

        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["x", "lower", "upper", "h_normalized", "region"])
        for region, xs, lower, upper, hn in (
            ("inner", self.inner_x, self.inner_lower, self.inner_upper, h_inner),
            ("outer", self.outer_x, self.outer_lower, self.outer_upper, h_outer),
        ):
            for i in range(len(xs)):
                writer.writerow([
                    format(xs[i], '.17g'),
                    format(lower[i], '.17g'),
                    format(upper[i], '.17g'),
                    format(hn[i], '.17g') if hn is not None else "",
                    region,
                ])
        return buffer.getvalue()


def _build_envelope(f: Generator, g: Generator, x0: float, x1: float, n: int) -> Envelope:
    a, b = f.bounds()
    inner_x = np.linspace(x0, x1, n)
    fv, gv = f.eval(inner_x), g.eval(inner_x)
    f_span, g_span = fv[-1] - fv[0], gv[-1] - gv[0]
    f_hat = (fv - fv[0]) / f_span
    g_hat = (gv - gv[0]) / g_span

    if x1 < b:
        outer_x = np.linspace(x1, b, n)[1:]
        f_out = (f.eval(outer_x) - fv[0]) / f_span
        g_out = (g.eval(outer_x) - gv[0]) / g_span
    else:
        outer_x = f_out = g_out = np.empty(0)

    return Envelope(
        x0=float(x0),
        x1=float(x1),
        inner_x=inner_x,
        inner_lower=g_hat,
        inner_upper=f_hat,
        outer_x=outer_x,
        outer_lower=f_out,
        outer_upper=g_out,
    )


def _check_pin(f: Generator, x0: float, x1: float):
    a, b = f.bounds()
    if not (a <= x0 < x1 <= b):
        raise DomainError(f"釘選點需滿足 x0 < x1 且在 {f.domain} 內：({x0}, {x1})")


def sandwich_envelope(
    f: Generator,
    g: Generator,
    x0: float,
    x1: float,
    plan: Optional[SamplingPlan] = None,
    tol: Optional[Tolerances] = None
) -> Envelope:
    """
    所有滿足 A^[f] ≤ A^[h] ≤ A^[g] 的 h 必須落在的包絡

    Raises:
        NotComparable: A^[f] ≤ A^[g] 不成立
    """
    plan = plan or SamplingPlan()
    tol = tol or f.tol
    _check_pin(f, x0, x1)
    relation = _relation(f, g, plan, tol)
    if relation not in _ORDERED:
        raise NotComparable(f"{f.text} 與 {g.text} 不滿足 A^[f] ≤ A^[g]（{_label(relation)}）")
    return _build_envelope(f, g, float(x0), float(x1), plan.envelope_n)


def _relation(f: Generator, g: Generator, plan: SamplingPlan, tol: Tolerances):
    """compare 的結果；判準矛盾或缺見證時返回錯誤類別名稱"""
    try:
        return compare(f, g, plan, tol).relation
    except QuasiMeanError as e:
        return type(e).__name__


def _label(relation) -> str:
    return relation.value if isinstance(relation, Relation) else str(relation)


# ============================================================
# 夾擠驗證
# ============================================================

@dataclass(frozen=True)
class PinCheck:
    x0: float
    x1: float
    min_slack: float

    def to_dict(self) -> dict:
        return {'x0': self.x0, 'x1': self.x1, 'min_slack': self.min_slack}


@dataclass
class SandwichReport:
    """verify_sandwich 的結果；violations 為空才算通過"""
    relation_fh: str
    relation_hg: str
    pins: List[PinCheck] = field(default_factory=list)
    direct_samples: int = 0
    direct_max_violation: float = 0.0
    violations: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            'passed': self.passed,
            'relation_fh': self.relation_fh,
            'relation_hg': self.relation_hg,
            'direct_samples': self.direct_samples,
            'direct_max_violation': self.direct_max_violation,
            'pins': [p.to_dict() for p in self.pins],
            'violations': list(self.violations),
        }


def default_pins(f: Generator, plan: SamplingPlan) -> List[Tuple[float, float]]:
    """種子決定的 n_pins 組 (x0, x1)，間距至少為區間寬度的 5%"""
    a, b = f.bounds()
    rng = np.random.default_rng(plan.seed)
    draws = np.sort(rng.uniform(a, b, (8 * plan.n_pins, 2)), axis=1)
    draws = draws[draws[:, 1] - draws[:, 0] >= _MIN_PIN_GAP * (b - a)]
    pins = [(float(x0), float(x1)) for x0, x1 in draws[:plan.n_pins]]
    if len(pins) < plan.n_pins:
        quantiles = np.linspace(a, b, plan.n_pins + 2)
        pins.extend(
            (float(quantiles[i]), float(quantiles[i + 1]))
            for i in range(plan.n_pins - len(pins))
        )
    return pins


def _direct_violation(
    f: Generator,
    h: Generator,
    g: Generator,
    plan: SamplingPlan
) -> Tuple[int, float]:
    """隨機取樣直接檢查 A^[f] ≤ A^[h] ≤ A^[g]，回傳 (取樣數, 最大正規化違反量)"""
    a, b = f.bounds()
    rng = np.random.default_rng(plan.seed)
    per_length = max(1, plan.n_samples // (plan.n_max - 1))
    worst = -math.inf
    count = 0
    for n in range(2, plan.n_max + 1):
        points = rng.uniform(a, b, (per_length, n))
        weights = rng.dirichlet(np.ones(n), per_length)
        weights = weights / weights.sum(axis=1, keepdims=True)
        mf = quasi_mean_batch(f, points, weights)
        mh = quasi_mean_batch(h, points, weights)
        mg = quasi_mean_batch(g, points, weights)
        worst = max(worst, float(np.max(mf - mh)), float(np.max(mh - mg)))
        count += per_length
    return count, worst / (b - a)


def verify_sandwich(
    f: Generator,
    h: Generator,
    g: Generator,
    plan: Optional[SamplingPlan] = None,
    tol: Optional[Tolerances] = None,
    pins: Optional[Sequence[Tuple[float, float]]] = None
) -> SandwichReport:
    """
    檢查 A^[f] ≤ A^[h] ≤ A^[g]

    1. compare(f, h)、compare(h, g) 都是 Less 或 Equal
    2. 隨機取樣直接比較三個平均
    3. 每組釘選點上 h 的正規化落在包絡內

    違反項目記錄在報告中，不拋出例外。
    """
    plan = plan or SamplingPlan()
    tol = tol or f.tol
    if not (f.domain == h.domain == g.domain):
        raise DomainError(f"三個生成函數需在同一區間：{f.domain}, {h.domain}, {g.domain}")

    rel_fh = _relation(f, h, plan, tol)
    rel_hg = _relation(h, g, plan, tol)
    report = SandwichReport(relation_fh=_label(rel_fh), relation_hg=_label(rel_hg))
    if rel_fh not in _ORDERED:
        report.violations.append(f"compare(f, h) = {_label(rel_fh)}")
    if rel_hg not in _ORDERED:
        report.violations.append(f"compare(h, g) = {_label(rel_hg)}")

    count, worst = _direct_violation(f, h, g, plan)
    report.direct_samples = count
    report.direct_max_violation = worst
    if worst > tol.refute_threshold:
        report.violations.append(f"直接取樣違反量 {worst!r}")

    rel_fg = _relation(f, g, plan, tol)
    if rel_fg not in _ORDERED:
        report.violations.append(f"compare(f, g) = {_label(rel_fg)}，無法建立包絡")
        return report

    for x0, x1 in (pins if pins is not None else default_pins(f, plan)):
        _check_pin(f, x0, x1)
        envelope = _build_envelope(f, g, float(x0), float(x1), plan.envelope_n)
        check = PinCheck(float(x0), float(x1), envelope.min_slack(h))
        report.pins.append(check)
        if check.min_slack < -tol.tol_compare:
            report.violations.append(f"釘選 ({x0!r}, {x1!r}) 的包絡差 {check.min_slack!r}")
    return report


# ============================================================
# 單側導數探測
# ============================================================

@dataclass
class SmoothnessReport:
    """預測（由 f、g 推得）與量測（h 的數值單側導數）"""
    x0: float
    h_first: Dict[str, Optional[DerivativeEstimate]]
    h_second: Dict[str, Optional[DerivativeEstimate]]
    f_first: Dict[str, Optional[DerivativeEstimate]]
    g_first: Dict[str, Optional[DerivativeEstimate]]
    prediction: str
    measured: Optional[bool]
    nonvanishing: Dict[str, Optional[bool]] = field(default_factory=dict)

    @property
    def consistent(self) -> bool:
        checks = [self.measured] + list(self.nonvanishing.values())
        return all(c is not False for c in checks)

    def to_dict(self) -> dict:
        def dump(estimates):
            return {k: (v.to_dict() if v is not None else None) for k, v in estimates.items()}

        return {
            'x0': self.x0,
            'prediction': self.prediction,
            'measured': self.measured,
            'consistent': self.consistent,
            'nonvanishing': dict(self.nonvanishing),
            'h_first': dump(self.h_first),
            'h_second': dump(self.h_second),
            'f_first': dump(self.f_first),
            'g_first': dump(self.g_first),
        }


def _one_sided(gen: Generator, x0: float, order: int) -> Dict[str, Optional[DerivativeEstimate]]:
    out = {}
    for side in (Side.LEFT, Side.RIGHT):
        try:
            out[side.value] = gen.one_sided_derivative(x0, side, order)
        except (Unstable, DomainError):
            out[side.value] = None
    return out


def _is_zero(est: DerivativeEstimate, tol: Tolerances) -> bool:
    return abs(est.estimate) <= max(tol.tol_deriv, 10.0 * est.uncertainty)


def _close(p: DerivativeEstimate, q: DerivativeEstimate, tol: Tolerances) -> bool:
    scale = max(1.0, abs(p.estimate), abs(q.estimate))
    return abs(p.estimate - q.estimate) <= tol.tol_deriv * scale + p.uncertainty + q.uncertainty


def smoothness_probe(
    f: Generator,
    h: Generator,
    g: Generator,
    x0: float,
    tol: Optional[Tolerances] = None
) -> SmoothnessReport:
    """
    夾擠下 h 在 x0 的可微性探測

    - f、g 在 x0 可微且導數不為 0：預測 h 左右導數一致（agree）
    - f、g 在 x0 的單側導數都為 0：預測 h 的單側導數也為 0（vanish）
    - 某一側 f、g 的單側導數都不為 0：預測 h 該側也不為 0

    只回報，不斷言。
    """
    tol = tol or f.tol
    x0 = float(x0)
    a, b = f.bounds()
    if not a <= x0 <= b:
        raise DomainError(f"x0 = {x0!r} 不在 {f.domain} 內")

    h_first, h_second = _one_sided(h, x0, 1), _one_sided(h, x0, 2)
    f_first, g_first = _one_sided(f, x0, 1), _one_sided(g, x0, 1)
    sides = [s for s in (Side.LEFT.value, Side.RIGHT.value)
             if f_first[s] is not None and g_first[s] is not None]

    prediction, measured = "none", None
    if sides and all(_is_zero(f_first[s], tol) and _is_zero(g_first[s], tol) for s in sides):
        prediction = "vanish"
        measured = all(h_first[s] is not None and _is_zero(h_first[s], tol) for s in sides)
    elif (
        len(sides) == 2
        and _close(f_first['Left'], f_first['Right'], tol)
        and _close(g_first['Left'], g_first['Right'], tol)
        and not _is_zero(f_first['Right'], tol)
        and not _is_zero(g_first['Right'], tol)
    ):
        prediction = "agree"
        left, right = h_first['Left'], h_first['Right']
        measured = left is not None and right is not None and _close(left, right, tol)

    nonvanishing = {}
    for s in sides:
        if not _is_zero(f_first[s], tol) and not _is_zero(g_first[s], tol):
            est = h_first[s]
            nonvanishing[s] = est is not None and not _is_zero(est, tol)

    return SmoothnessReport(
        x0=x0,
        h_first=h_first,
        h_second=h_second,
        f_first=f_first,
        g_first=g_first,
        prediction=prediction,
        measured=measured,
        nonvanishing=nonvanishing,
    )
