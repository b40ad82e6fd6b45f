"""
設定管理

負責：
1. 載入 config/settings.yaml（容忍值、網格大小、種子）
2. 載入 config/corpus.yaml（內建測試語料）
3. 合併 CLI 參數、環境變數 QAM_SEED 與設定檔
"""

import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping, Optional

import yaml

from .errors import InvalidParameter


CONFIG_DIR = Path(__file__).parent.parent / "config"
DEFAULT_SEED = 0x51414D00
OUTPUT_FORMATS = ("json", "csv", "text")


@dataclass(frozen=True)
class Tolerances:
    """數值容忍值（皆為相對值，除非另外註明）"""
    tol_invert: float = 1e-12
    tol_deriv: float = 1e-6
    tol_mean: float = 1e-10
    tol_compare: float = 1e-9
    tol_affine: float = 1e-9
    tol_denominator: float = 1e-12
    tol_domain: float = 1e-9

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not value > 0:
                raise InvalidParameter(f"容忍值 {f.name} 必須大於 0：{value}")

    @property
    def refute_threshold(self) -> float:
        """超過這個量才算 Refutes（遲滯帶）"""
        return 10.0 * self.tol_compare

    def override(self, values: Mapping[str, float]) -> "Tolerances":
        """以 {名稱: 值} 覆蓋，名稱可省略 tol_ 前綴"""
        known = {f.name for f in fields(self)}
        changes = {}
        for name, value in values.items():
            key = name if name.startswith("tol_") else f"tol_{name}"
            if key not in known:
                raise InvalidParameter(f"未知的容忍值名稱：{name}")
            changes[key] = float(value)
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class SamplingPlan:
    """取樣計畫（所有隨機探測都由 seed 決定）"""
    seed: int = DEFAULT_SEED
    grid_n: int = 257
    n_samples: int = 600
    n_max: int = 6
    pales_grid: int = 33
    n_random_triples: int = 2000
    xi_count: int = 19
    pair_grid: int = 17
    n_pins: int = 10
    envelope_n: int = 513
    lambda_candidates: int = 64

    def __post_init__(self):
        if self.grid_n < 17:
            raise InvalidParameter(f"grid_n 至少要 17：{self.grid_n}")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidParameter(f"seed 必須是 64 位元非負整數：{self.seed}")
        if self.n_max < 2:
            raise InvalidParameter(f"n_max 至少要 2：{self.n_max}")
        if self.n_pins < 1:
            raise InvalidParameter(f"n_pins 至少要 1：{self.n_pins}")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class RunConfig:
    """CLI 單次執行的設定"""
    domain: Optional[str] = None
    tolerances: Tolerances = field(default_factory=Tolerances)
    plan: SamplingPlan = field(default_factory=SamplingPlan)
    output_format: str = "text"

    @property
    def seed(self) -> int:
        return self.plan.seed

    @property
    def grid_n(self) -> int:
        return self.plan.grid_n

    @classmethod
    def resolve(
        cls,
        args=None,
        settings: Optional[dict] = None,
        environ: Optional[Mapping[str, str]] = None
    ) -> "RunConfig":
        """
        合併設定來源

        優先順序：CLI 參數 > 環境變數 QAM_SEED（只影響 seed）> settings.yaml > 預設值

        Args:
            args: argparse Namespace（可為 None）
            settings: load_settings() 的結果
            environ: 環境變數（預設 os.environ）

        Returns:
            RunConfig 物件
        """
        settings = settings or {}
        environ = os.environ if environ is None else environ

        tolerances = Tolerances().override(settings.get('tolerances', {}) or {})
        plan_values = dict(settings.get('sampling', {}) or {})

        if 'seed' in settings:
            plan_values['seed'] = _parse_seed(settings['seed'])
        if environ.get('QAM_SEED'):
            plan_values['seed'] = _parse_seed(environ['QAM_SEED'])

        output_format = settings.get('output_format', 'text')
        domain = settings.get('domain')

        if args is not None:
            cli_tols = {
                name: getattr(args, name)
                for name in tolerances.to_dict()
                if getattr(args, name, None) is not None
            }
            tolerances = tolerances.override(cli_tols)
            if getattr(args, 'seed', None) is not None:
                plan_values['seed'] = _parse_seed(args.seed)
            if getattr(args, 'grid', None) is not None:
                plan_values['grid_n'] = int(args.grid)
            if getattr(args, 'format', None):
                output_format = args.format
            if getattr(args, 'domain', None):
                domain = args.domain

        if output_format not in OUTPUT_FORMATS:
            raise InvalidParameter(f"不支援的輸出格式：{output_format}")

        known = {f.name for f in fields(SamplingPlan)}
        unknown = set(plan_values) - known
        if unknown:
            raise InvalidParameter(f"未知的取樣設定：{sorted(unknown)}")

        return cls(
            domain=domain,
            tolerances=tolerances,
            plan=SamplingPlan(**{k: int(v) for k, v in plan_values.items()}),
            output_format=output_format
        )


def _parse_seed(value) -> int:
    """接受十進位或 0x 十六進位的種子"""
    try:
        return int(str(value).strip(), 0)
    except ValueError:
        raise InvalidParameter(f"無法解析 seed：{value}")


def load_settings(config_dir: Optional[Path] = None) -> dict:
    """載入 settings.yaml，不存在時返回空字典"""
    config_path = (config_dir or CONFIG_DIR) / "settings.yaml"
    if config_path.exists():
        with open(config_path, 'r', encoding='utf-8') as f:
            return yaml.safe_load(f) or {}
    return {}


def load_corpus(config_dir: Optional[Path] = None) -> dict:
    """載入 corpus.yaml，不存在時使用內建語料"""
    config_path = (config_dir or CONFIG_DIR) / "corpus.yaml"
    if config_path.exists():
        with open(config_path, 'r', encoding='utf-8') as f:
            data = yaml.safe_load(f) or {}
            if data:
                return data
    return _get_default_corpus()


def _get_default_corpus() -> dict:
    """內建語料（與 config/corpus.yaml 相同的最小版本）"""
    c1_h = "piecewise(1; id; affine(0.5,0.5,pow(2)))"
    return {
        'generators': {
            'id': 'id', 'pow(-1)': 'pow(-1)', 'pow(0.5)': 'pow(0.5)',
            'pow(2)': 'pow(2)', 'pow(3)': 'pow(3)', 'log': 'log',
            'exp(1)': 'exp(1)', 'exp(-1)': 'exp(-1)', 'exp(2)': 'exp(2)',
            'c1_h': c1_h,
        },
        'pairs': [
            {'a': 'id', 'b': 'pow(2)', 'domain': '[0.5,2]', 'expect': 'Less'},
            {'a': 'id', 'b': 'pow(3)', 'domain': '(-1,1)', 'expect': 'Incomparable'},
        ],
        'sandwiches': [
            {'f': 'id', 'h': c1_h, 'g': 'pow(2)', 'domain': '(0,2)', 'x0': 1.0, 'expect': True},
        ],
        'windows': [
            {'gen': 'pow(2)', 'domain': '(0.5,2)', 'x0': 1.0, 'U': '[0.4,2.1]', 'expect': 'Member'},
            {'gen': 'log', 'domain': '(0.5,2)', 'x0': 1.0, 'U': '[0,2]', 'expect': 'Unknown'},
        ],
        'pins': [[0.25, 0.75], [0.5, 1.5]],
    }
