"""
Generator - 生成函數模組

負責：
1. 解析生成函數 DSL（id / log / pow / exp / affine / neg / piecewise）
2. 驗證嚴格單調性
3. 求值、解析導數、單側數值導數（Richardson 外插）
4. 保證收斂的反函數（二分法 + Newton 修正）
"""

import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple, Union

import numpy as np

from .config import Tolerances
from .errors import (
    DomainError,
    InvalidParameter,
    NotDifferentiable,
    NotMonotone,
    ParseError,
    RangeError,
    Unstable,
)


ArrayLike = Union[float, np.ndarray]

# 無窮端點時的取樣視窗寬度
_INFINITE_SPAN = 100.0
_MAX_BISECT = 200
_MAX_EXPANSIONS = 60


class Direction(str, Enum):
    INCREASING = "Increasing"
    DECREASING = "Decreasing"


class Side(str, Enum):
    LEFT = "Left"
    RIGHT = "Right"


def _fmt(value: float) -> str:
    """數字轉成 DSL 文字（可還原）"""
    value = float(value)
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


# ============================================================
# 定義域
# ============================================================

@dataclass(frozen=True)
class Domain:
    """實數區間，開端點以相對邊界處理"""
    lo: float
    hi: float
    lo_open: bool = True
    hi_open: bool = True

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise DomainError("定義域端點不可為 NaN")
        if not self.lo < self.hi:
            raise DomainError(f"定義域需滿足 lo < hi：{self.lo}, {self.hi}")

    @classmethod
    def parse(cls, text: str) -> "Domain":
        """
        解析 "(0,10]" 形式的定義域

        Args:
            text: 左右以 '(' / '[' 與 ')' / ']' 標示開閉

        Returns:
            Domain 物件
        """
        match = re.fullmatch(r"\s*([\(\[])\s*([^,]+?)\s*,\s*([^,]+?)\s*([\)\]])\s*", text or "")
        if not match:
            raise ParseError(f"無法解析定義域：{text!r}")
        left, lo_text, hi_text, right = match.groups()
        try:
            lo, hi = float(lo_text), float(hi_text)
        except ValueError:
            raise ParseError(f"無法解析定義域端點：{text!r}")
        return cls(lo, hi, lo_open=(left == '('), hi_open=(right == ')'))

    def __str__(self) -> str:
        left = '(' if self.lo_open else '['
        right = ')' if self.hi_open else ']'
        return f"{left}{_fmt(self.lo)},{_fmt(self.hi)}{right}"

    def _window(self) -> Tuple[float, float]:
        lo, hi = self.lo, self.hi
        if math.isinf(lo) and math.isinf(hi):
            return -_INFINITE_SPAN / 2, _INFINITE_SPAN / 2
        if math.isinf(lo):
            return hi - _INFINITE_SPAN, hi
        if math.isinf(hi):
            return lo, lo + _INFINITE_SPAN
        return lo, hi

    def margin(self, tol_domain: float = 1e-9) -> float:
        lo, hi = self._window()
        return max(tol_domain, (hi - lo) * 1e-9)

    def bounds(self, tol_domain: float = 1e-9) -> Tuple[float, float]:
        """取樣用的有限閉區間（開端點內縮 margin）"""
        lo, hi = self._window()
        margin = self.margin(tol_domain)
        if self.lo_open and not math.isinf(self.lo):
            lo += margin
        if self.hi_open and not math.isinf(self.hi):
            hi -= margin
        return lo, hi

    def contains(self, x: ArrayLike, tol_domain: float = 1e-9) -> bool:
        """檢查 x 是否在定義域內（開端點需離開 margin）"""
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            return False
        lo, hi = self.bounds(tol_domain)
        ok_lo = True if math.isinf(self.lo) else bool(np.all(x >= lo))
        ok_hi = True if math.isinf(self.hi) else bool(np.all(x <= hi))
        return ok_lo and ok_hi

    def grid(self, n: int, tol_domain: float = 1e-9) -> np.ndarray:
        lo, hi = self.bounds(tol_domain)
        return np.linspace(lo, hi, n)

    def sub(self, lo: float, hi: float, lo_open: bool, hi_open: bool) -> "Domain":
        return Domain(lo, hi, lo_open, hi_open)


# ============================================================
# 運算式節點
# ============================================================

class Expr:
    """運算式節點基底類別（不可變）"""

    def value(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def d1(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def d2(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def derivative(self, x: np.ndarray, order: int, tol: float) -> np.ndarray:
        return self.d1(x) if order == 1 else self.d2(x)

    def smoothness(self, tol: float) -> int:
        """解析導數可用的最高階（0、1 或 2）"""
        return 2

    def smooth_near(self, x: float, order: int, tol: float) -> bool:
        return True

    def check(self, domain: Domain):
        """檢查節點是否能定義在 domain 上"""
        pass

    def render(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Identity(Expr):
    def value(self, x):
        return x * 1.0

    def d1(self, x):
        return np.ones_like(x)

    def d2(self, x):
        return np.zeros_like(x)

    def render(self):
        return "id"


@dataclass(frozen=True)
class Power(Expr):
    p: float

    def value(self, x):
        return np.power(x, self.p)

    def d1(self, x):
        return self.p * np.power(x, self.p - 1.0)

    def d2(self, x):
        return self.p * (self.p - 1.0) * np.power(x, self.p - 2.0)

    def check(self, domain):
        integral = float(self.p).is_integer()
        touches_zero = domain.lo <= 0 <= domain.hi and not (
            (domain.lo == 0 and domain.lo_open) or (domain.hi == 0 and domain.hi_open)
        )
        if not integral and domain.lo < 0:
            raise DomainError(f"pow({_fmt(self.p)}) 只能定義在非負實數上：{domain}")
        if self.p < 0 and touches_zero:
            raise DomainError(f"pow({_fmt(self.p)}) 在 0 有奇點：{domain}")

    def render(self):
        return f"pow({_fmt(self.p)})"


@dataclass(frozen=True)
class Log(Expr):
    def value(self, x):
        return np.log(x)

    def d1(self, x):
        return 1.0 / x

    def d2(self, x):
        return -1.0 / (x * x)

    def check(self, domain):
        if domain.lo < 0 or (domain.lo == 0 and not domain.lo_open):
            raise DomainError(f"log 只能定義在正實數上：{domain}")

    def render(self):
        return "log"


@dataclass(frozen=True)
class Exp(Expr):
    lam: float

    def value(self, x):
        return np.exp(self.lam * x)

    def d1(self, x):
        return self.lam * np.exp(self.lam * x)

    def d2(self, x):
        return self.lam * self.lam * np.exp(self.lam * x)

    def render(self):
        return f"exp({_fmt(self.lam)})"


@dataclass(frozen=True)
class Affine(Expr):
    alpha: float
    beta: float
    inner: Expr

    def value(self, x):
        return self.alpha * self.inner.value(x) + self.beta

    def d1(self, x):
        return self.alpha * self.inner.d1(x)

    def d2(self, x):
        return self.alpha * self.inner.d2(x)

    def derivative(self, x, order, tol):
        return self.alpha * self.inner.derivative(x, order, tol)

    def smoothness(self, tol):
        return self.inner.smoothness(tol)

    def smooth_near(self, x, order, tol):
        return self.inner.smooth_near(x, order, tol)

    def check(self, domain):
        self.inner.check(domain)

    def render(self):
        return f"affine({_fmt(self.alpha)},{_fmt(self.beta)},{self.inner.render()})"


@dataclass(frozen=True)
class Negate(Expr):
    inner: Expr

    def value(self, x):
        return -self.inner.value(x)

    def d1(self, x):
        return -self.inner.d1(x)

    def d2(self, x):
        return -self.inner.d2(x)

    def derivative(self, x, order, tol):
        return -self.inner.derivative(x, order, tol)

    def smoothness(self, tol):
        return self.inner.smoothness(tol)

    def smooth_near(self, x, order, tol):
        return self.inner.smooth_near(x, order, tol)

    def check(self, domain):
        self.inner.check(domain)

    def render(self):
        return f"neg({self.inner.render()})"


@dataclass(frozen=True)
class Piecewise(Expr):
    """x <= cut 用 left，x > cut 用 right + shift（shift 保證連續）"""
    cut: float
    left: Expr
    right: Expr
    shift: float = 0.0

    def value(self, x):
        with np.errstate(all='ignore'):
            return np.where(x <= self.cut, self.left.value(x), self.right.value(x) + self.shift)

    def d1(self, x):
        return self.derivative(x, 1, 1e-6)

    def d2(self, x):
        return self.derivative(x, 2, 1e-6)

    def _matches(self, order: int, tol: float) -> bool:
        cut = np.asarray(self.cut, dtype=float)
        left = float(self.left.derivative(cut, order, tol))
        right = float(self.right.derivative(cut, order, tol))
        return abs(left - right) <= tol * max(1.0, abs(left), abs(right))

    def derivative(self, x, order, tol):
        x = np.asarray(x, dtype=float)
        at_cut = x == self.cut
        if np.any(at_cut) and not self._matches(order, tol):
            raise NotDifferentiable(f"piecewise 在切點 {_fmt(self.cut)} 沒有 {order} 階導數")
        with np.errstate(all='ignore'):
            return np.where(
                x <= self.cut,
                self.left.derivative(x, order, tol),
                self.right.derivative(x, order, tol)
            )

    def smoothness(self, tol):
        level = min(self.left.smoothness(tol), self.right.smoothness(tol))
        if not self._matches(1, tol):
            return 0
        if not self._matches(2, tol):
            return min(level, 1)
        return level

    def smooth_near(self, x, order, tol):
        if abs(x - self.cut) <= tol * max(1.0, abs(self.cut)):
            return (
                all(self._matches(k, tol) for k in range(1, order + 1))
                and self.left.smooth_near(x, order, tol)
                and self.right.smooth_near(x, order, tol)
            )
        branch = self.left if x < self.cut else self.right
        return branch.smooth_near(x, order, tol)

    def check(self, domain):
        if not domain.lo < self.cut < domain.hi:
            raise DomainError(f"piecewise 切點 {_fmt(self.cut)} 必須在定義域內部：{domain}")
        self.left.check(domain.sub(domain.lo, self.cut, domain.lo_open, False))
        self.right.check(domain.sub(self.cut, domain.hi, False, domain.hi_open))

    def render(self):
        return f"piecewise({_fmt(self.cut)}; {self.left.render()}; {self.right.render()})"


# ============================================================
# 解析器
# ============================================================

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_]+)|(?P<punct>[(),;]))"
)


def _tokenize(text: str) -> List[Tuple[str, str]]:
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if not match or match.end() == pos:
            raise ParseError(f"無法辨識的字元（位置 {pos}）：{text[pos:pos + 10]!r}")
        kind = match.lastgroup
        tokens.append((kind, match.group(kind)))
        pos = match.end()
    return tokens


class _Parser:
    """遞迴下降解析器"""

    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def _peek(self) -> Optional[Tuple[str, str]]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _take(self, kind: str, value: Optional[str] = None) -> str:
        token = self._peek()
        if token is None or token[0] != kind or (value is not None and token[1] != value):
            want = value or kind
            got = token[1] if token else "結尾"
            raise ParseError(f"預期 {want!r}，但讀到 {got!r}：{self.text!r}")
        self.pos += 1
        return token[1]

    def _num(self) -> float:
        return float(self._take('num'))

    def parse(self) -> Expr:
        node = self._expr()
        if self._peek() is not None:
            raise ParseError(f"運算式後有多餘內容：{self.tokens[self.pos][1]!r}")
        return node

    def _expr(self) -> Expr:
        name = self._take('name').lower()

        if name == 'id':
            return Identity()
        if name == 'log':
            return Log()

        self._take('punct', '(')
        if name == 'pow':
            p = self._num()
            node = Log() if p == 0 else Power(p)
        elif name == 'exp':
            lam = self._num()
            if lam == 0:
                raise InvalidParameter("exp(λ) 需要 λ ≠ 0")
            node = Exp(lam)
        elif name == 'affine':
            alpha = self._num()
            self._take('punct', ',')
            beta = self._num()
            self._take('punct', ',')
            inner = self._expr()
            if alpha == 0:
                raise InvalidParameter("affine(α,β,·) 需要 α ≠ 0")
            node = Affine(alpha, beta, inner)
        elif name == 'neg':
            node = Negate(self._expr())
        elif name == 'piecewise':
            cut = self._num()
            self._take('punct', ';')
            left = self._expr()
            self._take('punct', ';')
            right = self._expr()
            node = Piecewise(cut, left, right)
        else:
            raise ParseError(f"未知的節點：{name!r}")
        self._take('punct', ')')
        return node


def _resolve_shifts(node: Expr) -> Expr:
    """求出 piecewise 右分支的加法常數，使函數在切點連續"""
    if isinstance(node, Affine):
        return Affine(node.alpha, node.beta, _resolve_shifts(node.inner))
    if isinstance(node, Negate):
        return Negate(_resolve_shifts(node.inner))
    if isinstance(node, Piecewise):
        left = _resolve_shifts(node.left)
        right = _resolve_shifts(node.right)
        cut = np.asarray(node.cut, dtype=float)
        with np.errstate(all='ignore'):
            shift = float(left.value(cut)) - float(right.value(cut))
        if not math.isfinite(shift):
            raise DomainError(f"piecewise 在切點 {_fmt(node.cut)} 無法求值")
        return Piecewise(node.cut, left, right, shift)
    return node


# ============================================================
# Generator
# ============================================================

@dataclass(frozen=True)
class DerivativeEstimate:
    """單側數值導數估計"""
    estimate: float
    uncertainty: float
    side: Side
    order: int

    def to_dict(self) -> dict:
        return {
            'estimate': self.estimate,
            'uncertainty': self.uncertainty,
            'side': self.side.value,
            'order': self.order,
        }


@dataclass(frozen=True)
class Generator:
    """已驗證的嚴格單調連續生成函數"""
    expr: Expr
    domain: Domain
    direction: Direction
    d1_available: bool
    d2_available: bool
    tol: Tolerances = field(default_factory=Tolerances, compare=False)

    @property
    def text(self) -> str:
        return self.expr.render()

    def __str__(self) -> str:
        return f"{self.text} on {self.domain}"

    @property
    def increasing(self) -> bool:
        return self.direction == Direction.INCREASING

    def bounds(self) -> Tuple[float, float]:
        return self.domain.bounds(self.tol.tol_domain)

    def grid(self, n: int) -> np.ndarray:
        return self.domain.grid(n, self.tol.tol_domain)

    def _require_domain(self, x: np.ndarray):
        if not self.domain.contains(x, self.tol.tol_domain):
            raise DomainError(f"x 不在定義域 {self.domain} 內：{x}")

    def _raw(self, x: np.ndarray) -> np.ndarray:
        with np.errstate(all='ignore'):
            return self.expr.value(x)

    def eval(self, x: ArrayLike) -> ArrayLike:
        """求值（x 可為純量或陣列）"""
        arr = np.asarray(x, dtype=float)
        self._require_domain(arr)
        out = self._raw(arr)
        return float(out) if arr.ndim == 0 else out

    __call__ = eval

    def derivative(self, x: ArrayLike, order: int = 1) -> ArrayLike:
        """
        解析導數

        Args:
            x: 求導位置
            order: 1 或 2

        Returns:
            導數值
        """
        if order not in (1, 2):
            raise InvalidParameter(f"只支援 1、2 階導數：{order}")
        arr = np.asarray(x, dtype=float)
        self._require_domain(arr)
        with np.errstate(all='ignore'):
            out = self.expr.derivative(arr, order, self.tol.tol_deriv)
        if not np.all(np.isfinite(out)):
            raise NotDifferentiable(f"{self.text} 在 {x} 的 {order} 階導數不是有限值")
        return float(out) if arr.ndim == 0 else out

    def smooth_near(self, x: float, order: int = 2) -> bool:
        """x 附近是否有 order 階連續解析導數"""
        return self.expr.smooth_near(float(x), order, self.tol.tol_deriv)

    def value_range(self) -> Tuple[float, float]:
        a, b = self.bounds()
        ya, yb = float(self._raw(np.asarray(a))), float(self._raw(np.asarray(b)))
        return min(ya, yb), max(ya, yb)

    def _bracket(self, y: np.ndarray) -> Tuple[float, float]:
        """找出涵蓋 y 的單調括號；無窮端點時向外擴張"""
        a, b = self.bounds()
        if y.size == 0:
            return a, b
        lo_target, hi_target = float(np.min(y)), float(np.max(y))
        for _ in range(_MAX_EXPANSIONS):
            ya, yb = float(self._raw(np.asarray(a))), float(self._raw(np.asarray(b)))
            increasing = yb >= ya
            # 值太小的一端與值太大的一端
            grow_a = grow_b = False
            if lo_target < min(ya, yb):
                grow_a, grow_b = (True, grow_b) if increasing else (grow_a, True)
            if hi_target > max(ya, yb):
                grow_a, grow_b = (grow_a, True) if increasing else (True, grow_b)
            grow_a = grow_a and math.isinf(self.domain.lo)
            grow_b = grow_b and math.isinf(self.domain.hi)
            if not (grow_a or grow_b):
                break
            width = b - a
            if grow_a:
                a -= width
            if grow_b:
                b += width
        return a, b

    def invert(self, y: ArrayLike) -> ArrayLike:
        """
        反函數（二分法，必要時以 Newton 修正一步）

        Args:
            y: 目標值（純量或陣列）

        Returns:
            x 使得 |g(x) − y| ≤ tol_invert·max(1,|y|)

        Raises:
            RangeError: y 超出可達值域
        """
        target = np.asarray(y, dtype=float)
        if not np.all(np.isfinite(target)):
            raise RangeError(f"反函數目標值不是有限值：{y}")
        a, b = self._bracket(target)
        ya, yb = float(self._raw(np.asarray(a))), float(self._raw(np.asarray(b)))
        low, high = min(ya, yb), max(ya, yb)
        slack = self.tol.tol_invert * np.maximum(1.0, np.abs(target))
        if np.any(target < low - slack) or np.any(target > high + slack):
            raise RangeError(f"{y} 超出 {self.text} 在 {self.domain} 的值域 [{low}, {high}]")
        target_c = np.clip(target, low, high)
        increasing = yb > ya

        lo = np.full(target_c.shape, a, dtype=float)
        hi = np.full(target_c.shape, b, dtype=float)
        for _ in range(_MAX_BISECT):
            mid = 0.5 * (lo + hi)
            if np.all((mid <= lo) | (mid >= hi)):
                break
            vm = self._raw(mid)
            go_right = (vm < target_c) if increasing else (vm > target_c)
            lo = np.where(go_right, mid, lo)
            hi = np.where(go_right, hi, mid)

        res_lo = np.abs(self._raw(lo) - target_c)
        res_hi = np.abs(self._raw(hi) - target_c)
        x = np.where(res_lo <= res_hi, lo, hi)
        residual = np.minimum(res_lo, res_hi)

        if self.d1_available:
            try:
                with np.errstate(all='ignore'):
                    step = (self._raw(x) - target_c) / self.expr.derivative(x, 1, self.tol.tol_deriv)
                    polished = x - step
                    polished_res = np.abs(self._raw(polished) - target_c)
                better = (
                    np.isfinite(polished) & (polished >= a) & (polished <= b)
                    & (polished_res < residual)
                )
                x = np.where(better, polished, x)
            except NotDifferentiable:
                pass

        return float(x) if target.ndim == 0 else x

    def canonicalize(self) -> "Generator":
        """轉成遞增形式（α = −1 的仿射變換，不改變平均）"""
        if self.increasing:
            return self
        inner = self.expr.inner if isinstance(self.expr, Negate) else Negate(self.expr)
        return Generator(
            expr=inner,
            domain=self.domain,
            direction=Direction.INCREASING,
            d1_available=self.d1_available,
            d2_available=self.d2_available,
            tol=self.tol
        )

    def one_sided_derivative(
        self,
        x0: float,
        side: Side,
        order: int = 1,
        h0: Optional[float] = None,
        steps: int = 10
    ) -> DerivativeEstimate:
        """
        單側差商的 Richardson 外插（h_k = h0·2^−k）

        Args:
            x0: 求導位置
            side: Side.LEFT 或 Side.RIGHT
            order: 1 或 2
            h0: 初始步長（預設依可用空間決定）
            steps: 步長個數

        Returns:
            DerivativeEstimate（uncertainty 為最後採用的外插差）

        Raises:
            DomainError: 該側沒有空間
            Unstable: 外插差不遞減，導數可能不存在
        """
        if order not in (1, 2):
            raise InvalidParameter(f"只支援 1、2 階導數：{order}")
        a, b = self.bounds()
        if not a <= x0 <= b:
            raise DomainError(f"x0 = {x0} 不在定義域 {self.domain} 內")
        room = (b - x0) if side == Side.RIGHT else (x0 - a)
        if room <= 0:
            raise DomainError(f"x0 = {x0} 的 {side.value} 側沒有取樣空間")

        sign = 1.0 if side == Side.RIGHT else -1.0
        h0 = h0 or min(0.5 * room / order, 0.05 * max(1.0, abs(x0)))
        f0 = float(self._raw(np.asarray(x0)))

        def quotient(h: float) -> float:
            s = sign * h
            f1 = float(self._raw(np.asarray(x0 + s)))
            if order == 1:
                return (f1 - f0) / s
            f2 = float(self._raw(np.asarray(x0 + 2 * s)))
            return (f2 - 2 * f1 + f0) / (h * h)

        table = [[quotient(h0)]]
        deltas = []
        best, best_err = table[0][0], math.inf
        for k in range(1, steps):
            row = [quotient(h0 / 2 ** k)]
            for j in range(1, k + 1):
                factor = 2.0 ** j
                row.append(row[j - 1] + (row[j - 1] - table[k - 1][j - 1]) / (factor - 1.0))
            table.append(row)
            delta = abs(row[k] - table[k - 1][k - 1])
            deltas.append(delta)
            if delta <= best_err:
                best, best_err = row[k], delta
            elif delta > 2.0 * best_err:
                break

        floor = 1e-10 * max(1.0, abs(table[0][0]))
        growing = all(d2 >= d1 for d1, d2 in zip(deltas, deltas[1:]))
        if not math.isfinite(best) or (growing and len(deltas) > 1 and deltas[0] > floor):
            raise Unstable(f"{self.text} 在 {x0} 的 {side.value} 側 {order} 階外插不收斂")

        return DerivativeEstimate(estimate=best, uncertainty=best_err, side=side, order=order)


# ============================================================
# 模組層級操作
# ============================================================

def parse_generator(
    text: str,
    domain: Union[Domain, str],
    tol: Optional[Tolerances] = None,
    grid_n: int = 257
) -> Generator:
    """
    解析並驗證生成函數

    Args:
        text: DSL 運算式，例如 "piecewise(1; id; affine(0.5,0.5,pow(2)))"
        domain: Domain 或 "(0,10]" 字串
        tol: 容忍值
        grid_n: 單調性驗證網格點數

    Returns:
        Generator 物件

    Raises:
        ParseError: 格式錯誤
        DomainError: 節點與定義域不相容
        NotMonotone: 驗證網格上不單調
        NotDifferentiable: 宣稱 C¹ 但解析導數與中央差商不一致
    """
    tol = tol or Tolerances()
    if isinstance(domain, str):
        domain = Domain.parse(domain)

    expr = _Parser(text).parse()
    expr.check(domain)
    expr = _resolve_shifts(expr)

    grid = domain.grid(max(grid_n, 17), tol.tol_domain)
    grid = np.unique(np.concatenate([grid, _cuts_inside(expr, grid[0], grid[-1])]))
    with np.errstate(all='ignore'):
        values = expr.value(grid)
    if not np.all(np.isfinite(values)):
        hint = "；exp(λ) 需 |λ·x| ≲ 709（float64 上限），請縮小定義域或 λ" if _contains(expr, Exp) else ""
        raise DomainError(f"{text} 在 {domain} 上有非有限值{hint}")

    diffs = np.diff(values)
    if np.all(diffs > 0):
        direction = Direction.INCREASING
    elif np.all(diffs < 0):
        direction = Direction.DECREASING
    else:
        bad = int(np.argmax(diffs <= 0)) if diffs[0] > 0 else int(np.argmax(diffs >= 0))
        raise NotMonotone(
            f"{text} 在 {domain} 上不是嚴格單調（{grid[bad]:.6g} 與 {grid[bad + 1]:.6g}）"
        )

    _check_branch_directions(expr, grid)

    level = expr.smoothness(tol.tol_deriv)
    if level >= 1:
        _check_first_derivative(expr, grid, text, tol)
    return Generator(
        expr=expr,
        domain=domain,
        direction=direction,
        d1_available=level >= 1,
        d2_available=level >= 2,
        tol=tol
    )


def _contains(expr: Expr, kind: type) -> bool:
    if isinstance(expr, kind):
        return True
    if isinstance(expr, (Affine, Negate)):
        return _contains(expr.inner, kind)
    if isinstance(expr, Piecewise):
        return _contains(expr.left, kind) or _contains(expr.right, kind)
    return False


def _central_quotient(expr: Expr, x: np.ndarray, h: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """中央差商與其捨入誤差上界"""
    with np.errstate(all='ignore'):
        upper, lower = expr.value(x + h), expr.value(x - h)
        quotient = (upper - lower) / (2 * h)
        rounding = 4 * np.finfo(float).eps * (np.abs(upper) + np.abs(lower)) / (2 * h)
    return quotient, rounding


def _check_first_derivative(expr: Expr, grid: np.ndarray, text: str, tol: Tolerances):
    """解析 f′ 與中央差商在驗證網格內點上相差不超過 tol_deriv（相對 max(1,|f′|)）"""
    x = grid[1:-1]
    room = np.minimum(x - grid[0], grid[-1] - x)
    h = np.minimum(1e-7 * np.maximum(1.0, np.abs(x)), 1e-4 * room)
    numeric, rounding = _central_quotient(expr, x, h)
    with np.errstate(all='ignore'):
        analytic = expr.derivative(x, 1, tol.tol_deriv)
    allowed = tol.tol_deriv * np.maximum(1.0, np.abs(analytic)) + rounding
    bad = ~(np.abs(analytic - numeric) <= allowed)
    if np.any(bad):
        j = int(np.argmax(bad))
        raise NotDifferentiable(
            f"{text} 在 x = {x[j]!r} 的解析導數 {analytic[j]!r} 與中央差商 {numeric[j]!r} 不一致"
        )


def _cuts_inside(expr: Expr, lo: float, hi: float) -> np.ndarray:
    cuts = []
    stack = [expr]
    while stack:
        node = stack.pop()
        if isinstance(node, Piecewise):
            if lo < node.cut < hi:
                cuts.append(node.cut)
            stack.extend([node.left, node.right])
        elif isinstance(node, (Affine, Negate)):
            stack.append(node.inner)
    return np.asarray(cuts, dtype=float)


def _check_branch_directions(expr: Expr, grid: np.ndarray):
    """piecewise 左右分支必須同方向"""
    if isinstance(expr, (Affine, Negate)):
        _check_branch_directions(expr.inner, grid)
        return
    if not isinstance(expr, Piecewise):
        return
    left = grid[grid <= expr.cut]
    right = grid[grid >= expr.cut]
    signs = []
    with np.errstate(all='ignore'):
        for branch, pts in ((expr.left, left), (expr.right, right)):
            if len(pts) >= 2:
                signs.append(np.sign(branch.value(pts[-1]) - branch.value(pts[0])))
    if len(signs) == 2 and signs[0] != signs[1]:
        raise NotMonotone(f"piecewise 左右分支單調方向不同（切點 {_fmt(expr.cut)}）")
    _check_branch_directions(expr.left, left)
    _check_branch_directions(expr.right, right)


def evaluate(g: Generator, x: ArrayLike) -> ArrayLike:
    """g(x)"""
    return g.eval(x)


def derivative(g: Generator, x: ArrayLike, order: int = 1) -> ArrayLike:
    return g.derivative(x, order)


def invert(g: Generator, y: ArrayLike) -> ArrayLike:
    return g.invert(y)


def canonicalize(g: Generator) -> Generator:
    return g.canonicalize()


def one_sided_derivative_estimate(
    g: Generator,
    x0: float,
    side: Side,
    order: int = 1
) -> DerivativeEstimate:
    return g.one_sided_derivative(x0, side, order)


def central_difference(g: Generator, x: ArrayLike, h: Optional[float] = None) -> ArrayLike:
    """中央差商（驗證解析導數用）"""
    arr = np.asarray(x, dtype=float)
    a, b = g.bounds()
    step = h or 1e-6 * max(1.0, float(np.max(np.abs(arr))))
    step = np.minimum(step, np.minimum(arr - a, b - arr))
    step = np.where(step > 0, step, 1e-12)
    out, _ = _central_quotient(g.expr, arr, step)
    return float(out) if arr.ndim == 0 else out
