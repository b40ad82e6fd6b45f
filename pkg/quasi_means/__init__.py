"""
擬算術平均模組

生成函數 DSL、平均計算、比較判準、不可比較見證、Mikusiński 視窗與夾擠包絡
"""

__version__ = "1.0.0"

from .errors import (
    QuasiMeanError,
    ParseError,
    DomainError,
    NotMonotone,
    RangeError,
    InvalidParameter,
    NotDifferentiable,
    ZeroDerivative,
    Unstable,
    CriteriaConflict,
    NoWitnessFound,
    NotComparable,
)
from .config import Tolerances, SamplingPlan, RunConfig, load_settings, load_corpus
from .generator import Domain, Generator, Side, parse_generator, one_sided_derivative_estimate
from .means import WeightedSample, quasi_mean, weighted_two_point_mean, power_mean, exponential_mean
from .comparison import (
    Relation,
    CriterionVerdict,
    compare,
    affine_equivalence,
    find_incomparability_witness,
    mikusinski_index,
)
from .intervals import (
    MikusinskiWindow,
    window_membership,
    hull_membership_exponential,
    sandwich_envelope,
    verify_sandwich,
    smoothness_probe,
)
from .pipeline import ConformancePipeline

__all__ = [
    "QuasiMeanError",
    "ParseError",
    "DomainError",
    "NotMonotone",
    "RangeError",
    "InvalidParameter",
    "NotDifferentiable",
    "ZeroDerivative",
    "Unstable",
    "CriteriaConflict",
    "NoWitnessFound",
    "NotComparable",
    "Tolerances",
    "SamplingPlan",
    "RunConfig",
    "load_settings",
    "load_corpus",
    "Domain",
    "Generator",
    "Side",
    "parse_generator",
    "one_sided_derivative_estimate",
    "WeightedSample",
    "quasi_mean",
    "weighted_two_point_mean",
    "power_mean",
    "exponential_mean",
    "Relation",
    "CriterionVerdict",
    "compare",
    "affine_equivalence",
    "find_incomparability_witness",
    "mikusinski_index",
    "MikusinskiWindow",
    "window_membership",
    "hull_membership_exponential",
    "sandwich_envelope",
    "verify_sandwich",
    "smoothness_probe",
    "ConformancePipeline",
]
