"""
錯誤類別

所有模組共用的例外階層，CLI 依類別對應到不同的結束代碼。
"""


class QuasiMeanError(Exception):
    """所有錯誤的基底類別"""
    pass


class ParseError(QuasiMeanError):
    """生成函數運算式或取樣字串格式錯誤"""
    pass


class DomainError(QuasiMeanError):
    """數值或節點不在定義域內"""
    pass


class NotMonotone(DomainError):
    """驗證網格上找到不單調的點對"""
    pass


class RangeError(QuasiMeanError):
    """反函數的目標值超出可達值域"""
    pass


class InvalidParameter(QuasiMeanError):
    """參數不合法（λ = 0、權重總和不為 1 等）"""
    pass


class NotDifferentiable(QuasiMeanError):
    """解析導數不存在"""
    pass


class ZeroDerivative(NotDifferentiable):
    """一階導數為 0，Mikusiński 指標無定義"""
    pass


class Unstable(QuasiMeanError):
    """Richardson 外插不收斂，導數可能不存在"""
    pass


class CriteriaConflict(QuasiMeanError):
    """各判準結論互相矛盾（通常是容忍值問題）"""

    def __init__(self, message: str, reports=None):
        super().__init__(message)
        self.reports = list(reports or [])


class NoWitnessFound(QuasiMeanError):
    """搜尋預算內找不到不可比較的反例"""
    pass


class NotComparable(QuasiMeanError):
    """前置條件要求兩個平均可比較，但實際上不可比較"""
    pass
