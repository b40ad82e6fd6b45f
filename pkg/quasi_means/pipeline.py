"""
Conformance Pipeline - 內建語料的完整驗證流程

依序執行：
冪平均順序 → 判準一致性 → 仿射等價 → 範例夾擠 → 引理見證
→ Mikusiński 一致性 → 凸包可靠性 → 包絡包含

輸出不含時間戳記與主機資訊，相同 seed 產生位元組相同的報告。
"""

import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from .comparison import Relation, compare, find_incomparability_witness, mikusinski_index
from .config import CONFIG_DIR, RunConfig, load_corpus, load_settings
from .errors import QuasiMeanError
from .generator import Generator, parse_generator
from .intervals import (
    HullVerdict,
    MikusinskiWindow,
    WindowVerdict,
    default_pins,
    exponential_generator,
    hull_membership_exponential,
    sandwich_envelope,
    smoothness_probe,
    verify_sandwich,
    window_membership,
)
from .means import WeightedSample, exponential_mean, power_mean, quasi_mean, quasi_mean_batch


C1_H = "piecewise(1; id; affine(0.5,0.5,pow(2)))"
DEFAULT_POWERS = (-2, -1, 0, 0.5, 1, 2, 3)


@dataclass
class StageResult:
    """單一驗證步驟的結果"""
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {'name': self.name, 'passed': self.passed, 'error': self.error, 'details': self.details}


@dataclass
class ConformanceResult:
    """完整報告"""
    success: bool
    seed: int
    stages: List[StageResult] = field(default_factory=list)
    tolerances: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            'success': self.success,
            'seed': self.seed,
            'tolerances': self.tolerances,
            'stages': [s.to_dict() for s in self.stages],
        }


def write_report(result: ConformanceResult, path: Path) -> Path:
    """寫出 JSON 報告（無時間戳記）"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report_json(result), encoding='utf-8')
    return path


def report_json(result: ConformanceResult) -> str:
    return json.dumps(result.to_dict(), ensure_ascii=False, indent=2) + "\n"


def _random_samples(
    rng: np.random.Generator,
    count: int,
    low: float,
    high: float,
    n_max: int = 6
) -> List[Tuple[np.ndarray, np.ndarray]]:
    """長度 2..n_max 輪流的隨機取樣，依長度分組"""
    lengths = [2 + i % (n_max - 1) for i in range(count)]
    groups = []
    for n in sorted(set(lengths)):
        m = lengths.count(n)
        points = rng.uniform(low, high, (m, n))
        weights = rng.dirichlet(np.ones(n), m)
        groups.append((points, weights / weights.sum(axis=1, keepdims=True)))
    return groups


class ConformancePipeline:
    """語料驗證器（`report` 子命令背後的流程）"""

    def __init__(
        self,
        config_dir: Optional[Path] = None,
        run_config: Optional[RunConfig] = None,
        quiet: bool = False
    ):
        """
        初始化 Pipeline

        Args:
            config_dir: 設定檔目錄路徑
            run_config: 已合併的執行設定（預設由 settings.yaml 產生）
            quiet: 不顯示進度
        """
        self.config_dir = Path(config_dir) if config_dir else CONFIG_DIR
        self.settings = load_settings(self.config_dir)
        self.corpus = load_corpus(self.config_dir)
        self.run_config = run_config or RunConfig.resolve(None, self.settings)
        self.plan = self.run_config.plan
        self.tol = self.run_config.tolerances
        self.quiet = quiet
        self.check_samples = int(self.corpus.get('check_samples', 1000))

    def _log(self, message: str):
        if not self.quiet:
            tqdm.write(message, file=sys.stderr)

    def _progress(self, items: Sequence, desc: str):
        return tqdm(items, desc=desc, file=sys.stderr, disable=self.quiet, leave=False)

    def _generator(self, text: str, domain: str) -> Generator:
        return parse_generator(self._expand(text), domain, self.tol, self.plan.grid_n)

    def _expand(self, text: str) -> str:
        """語料中的生成函數可用名稱引用"""
        return self.corpus.get('generators', {}).get(text, text)

    def _rng(self, stream: int) -> np.random.Generator:
        return np.random.default_rng([self.plan.seed, stream])

    def _pins_for(self, g: Generator) -> List[Tuple[float, float]]:
        a, b = g.bounds()
        pins = [
            (float(x0), float(x1)) for x0, x1 in self.corpus.get('pins', [])
            if a <= x0 < x1 <= b
        ]
        return pins or default_pins(g, self.plan)

    def stages(self) -> List[Tuple[str, Callable[[], dict]]]:
        return [
            ('power_order', self.check_power_order),
            ('criteria_consensus', self.check_criteria_consensus),
            ('affine_equality', self.check_affine_equality),
            ('c1_example', self.check_c1_example),
            ('lemma_witness', self.check_lemma_witness),
            ('mikusinski_coherence', self.check_mikusinski_coherence),
            ('hull_soundness', self.check_hull_soundness),
            ('envelope_containment', self.check_envelope_containment),
        ]

    def run(self) -> ConformanceResult:
        """
        執行所有步驟

        Returns:
            ConformanceResult 物件（任一步驟失敗則 success = False）
        """
        result = ConformanceResult(
            success=False,
            seed=self.plan.seed,
            tolerances=self.tol.to_dict()
        )

        self._log(f"\n{'='*60}")
        self._log(f"🧮 語料驗證開始（seed = {self.plan.seed:#x}）")
        self._log(f"{'='*60}")

        steps = self.stages()
        for i, (name, step) in enumerate(steps, 1):
            self._log(f"\n📊 步驟 {i}/{len(steps)}：{name}")
            try:
                details = step()
                stage = StageResult(name, bool(details.pop('passed')), details)
            except QuasiMeanError as e:
                stage = StageResult(name, False, error=f"{type(e).__name__}: {e}")
            result.stages.append(stage)
            self._log(f"{'✅' if stage.passed else '❌'} {name}" + (f"：{stage.error}" if stage.error else ""))

        result.success = all(s.passed for s in result.stages)
        passed = sum(s.passed for s in result.stages)
        self._log(f"\n{'🎉' if result.success else '⚠️'} 完成：{passed}/{len(steps)} 步驟通過")
        return result

    # ------------------------------------------------------------
    # 各步驟
    # ------------------------------------------------------------

    def check_power_order(self) -> dict:
        """p < q ⇒ P_p(s) ≤ P_q(s)"""
        powers = sorted(float(p) for p in self.corpus.get('powers', DEFAULT_POWERS))
        rng = self._rng(1)
        worst, failures = -np.inf, 0
        groups = _random_samples(rng, self.check_samples, 0.1, 10.0, self.plan.n_max)
        for points, weights in self._progress(groups, "power_order"):
            for row in range(len(points)):
                sample = WeightedSample(tuple(points[row]), tuple(weights[row]))
                means = [power_mean(p, sample) for p in powers]
                gaps = np.subtract.outer(means, means)[np.triu_indices(len(powers), 1)]
                worst = max(worst, float(np.max(gaps)))
                failures += int(np.sum(gaps > self.tol.tol_mean))
        return {
            'passed': failures == 0,
            'powers': powers,
            'samples': self.check_samples,
            'max_violation': worst,
            'failures': failures,
        }

    def _direct_order_check(self, f: Generator, g: Generator, relation: Relation) -> float:
        """Less/Greater 判定以隨機取樣直接重算，回傳最大違反量"""
        a, b = f.bounds()
        worst = -np.inf
        for points, weights in _random_samples(self._rng(2), self.check_samples, a, b, self.plan.n_max):
            diff = quasi_mean_batch(f, points, weights) - quasi_mean_batch(g, points, weights)
            if relation == Relation.GREATER:
                diff = -diff
            worst = max(worst, float(np.max(diff)))
        return worst

    def check_criteria_consensus(self) -> dict:
        """語料中每一對都不應出現 CriteriaConflict"""
        rows, ok = [], True
        for pair in self._progress(self.corpus.get('pairs', []), "criteria_consensus"):
            row = {'a': pair['a'], 'b': pair['b'], 'domain': pair['domain'], 'expect': pair.get('expect')}
            try:
                f = self._generator(pair['a'], pair['domain'])
                g = self._generator(pair['b'], pair['domain'])
                verdict = compare(f, g, self.plan, self.tol)
                row['relation'] = verdict.relation.value
                if verdict.relation in (Relation.LESS, Relation.GREATER):
                    row['max_violation'] = self._direct_order_check(f, g, verdict.relation)
                    row['confirmed'] = row['max_violation'] <= self.tol.tol_mean
                else:
                    row['confirmed'] = True
            except QuasiMeanError as e:
                row['relation'] = type(e).__name__
                row['confirmed'] = False
            row['ok'] = row['confirmed'] and (row['expect'] is None or row['relation'] == row['expect'])
            ok = ok and row['ok']
            rows.append(row)
        return {'passed': ok and bool(rows), 'pairs': rows}

    def check_affine_equality(self) -> dict:
        """compare(f, affine(α, β, f)) = Equal 且還原出 (α, β)"""
        domain = self.corpus.get('affine_domain', '[0.5,2]')
        names = list(self.corpus.get('generators', {}).keys()) or ['id']
        cases = int(self.corpus.get('affine_cases', 50))
        rng = self._rng(3)
        worst_alpha = worst_beta = 0.0
        failures = []
        for k in self._progress(range(cases), "affine_equality"):
            name = names[k % len(names)]
            alpha = float(rng.uniform(0.2, 5.0) * rng.choice([-1.0, 1.0]))
            beta = float(rng.uniform(-5.0, 5.0))
            f = self._generator(name, domain)
            g = self._generator(f"affine({alpha!r},{beta!r},{self._expand(name)})", domain)
            verdict = compare(f, g, self.plan, self.tol)
            if verdict.relation != Relation.EQUAL:
                failures.append({'generator': name, 'alpha': alpha, 'beta': beta,
                                 'relation': verdict.relation.value})
                continue
            a_hat, b_hat = verdict.affine
            err_alpha = abs(a_hat - alpha) / abs(alpha)
            err_beta = abs(b_hat - beta) / max(1.0, abs(beta))
            worst_alpha, worst_beta = max(worst_alpha, err_alpha), max(worst_beta, err_beta)
            if err_alpha > 1e-9 or err_beta > 1e-9:
                failures.append({'generator': name, 'alpha': alpha, 'beta': beta,
                                 'alpha_hat': a_hat, 'beta_hat': b_hat})
        return {
            'passed': not failures,
            'cases': cases,
            'max_alpha_error': worst_alpha,
            'max_beta_error': worst_beta,
            'failures': failures,
        }

    def check_c1_example(self) -> dict:
        """id ≤ h ≤ x² 在 (0,2)，且 h 在 1 只有 C¹"""
        domain = '(0,2)'
        f = self._generator('id', domain)
        h = self._generator(C1_H, domain)
        g = self._generator('pow(2)', domain)
        plan = replace(self.plan, n_samples=self.check_samples)
        report = verify_sandwich(f, h, g, plan, self.tol, pins=self._pins_for(f))
        probe = smoothness_probe(f, h, g, 1.0, self.tol)

        first = {k: (v.estimate if v else None) for k, v in probe.h_first.items()}
        second = {k: (v.estimate if v else None) for k, v in probe.h_second.items()}
        first_ok = all(v is not None and abs(v - 1.0) <= 1e-4 for v in first.values())
        second_ok = all(v is not None for v in second.values()) and \
            abs(second['Right'] - second['Left']) >= 0.5
        return {
            'passed': report.passed and first_ok and second_ok and probe.consistent,
            'sandwich': report.to_dict(),
            'first_derivative': first,
            'second_derivative': second,
            'prediction': probe.prediction,
            'consistent': probe.consistent,
        }

    def check_lemma_witness(self) -> dict:
        """x³ 與 x 在 (−1,1) 以 x0 = 0 構造兩個方向相反的見證"""
        domain = '(-1,1)'
        f = self._generator('pow(3)', domain)
        g = self._generator('id', domain)
        pair = find_incomparability_witness(f, g, 0.0, self.plan, self.tol)
        gap_plus = quasi_mean(f, pair.s_plus) - quasi_mean(g, pair.s_plus)
        gap_minus = quasi_mean(f, pair.s_minus) - quasi_mean(g, pair.s_minus)
        return {
            'passed': gap_plus >= 1e-3 and gap_minus <= -1e-3,
            'witness': pair.to_dict(),
            'recomputed_gap_plus': gap_plus,
            'recomputed_gap_minus': gap_minus,
        }

    def check_mikusinski_coherence(self) -> dict:
        """exp(λ) 的指標恆為 λ、視窗成員與 λ ∈ U 一致、指數平均隨 λ 遞增"""
        domain = self.corpus.get('exp_domain', '[-1,1]')
        lams = [float(v) for v in np.linspace(-2.0, 2.0, 21) if abs(v) > 1e-12]
        index_error, window_failures = 0.0, []
        for lam in self._progress(lams, "mikusinski_coherence"):
            e = exponential_generator(lam, domain, self.tol)
            for x in e.grid(10):
                index_error = max(index_error, abs(mikusinski_index(e, x) - lam))
            x0 = float(e.grid(3)[1])
            for U, expected in (
                (f"[{lam - 0.1!r},{lam + 0.1!r}]", WindowVerdict.MEMBER),
                (f"[{lam!r},{lam!r}]", WindowVerdict.MEMBER),
                (f"({lam!r},{lam + 1.0!r}]", WindowVerdict.NOT_MEMBER),
                (f"[{lam + 0.5!r},{lam + 1.0!r}]", WindowVerdict.NOT_MEMBER),
            ):
                got = window_membership(e, MikusinskiWindow.parse(x0, U), self.tol)
                if got != expected:
                    window_failures.append({'lambda': lam, 'U': U, 'got': got.value})

        rng = self._rng(4)
        order_failures = 0
        for points, weights in _random_samples(rng, 500, -1.0, 1.0, self.plan.n_max):
            for row in range(len(points)):
                sample = WeightedSample(tuple(points[row]), tuple(weights[row]))
                means = [exponential_mean(lam, sample) for lam in lams]
                order_failures += int(np.sum(np.diff(means) < -self.tol.tol_mean))
        return {
            'passed': index_error <= 1e-12 and not window_failures and order_failures == 0,
            'lambdas': lams,
            'max_index_error': index_error,
            'window_failures': window_failures,
            'order_failures': order_failures,
        }

    def check_hull_soundness(self) -> dict:
        """每個 Member 證書都要通過 verify_sandwich"""
        rows, ok = [], True
        for case in self._progress(self.corpus.get('windows', []), "hull_soundness"):
            h = self._generator(case['gen'], case['domain'])
            w = MikusinskiWindow.parse(float(case['x0']), case['U'])
            hull = hull_membership_exponential(h, w, self.plan, self.tol)
            row = {'gen': case['gen'], 'domain': case['domain'], 'U': case['U'],
                   'expect': case.get('expect'), **hull.to_dict()}
            if hull.verdict == HullVerdict.MEMBER:
                low = exponential_generator(hull.lambda_lo, h.domain, self.tol)
                high = exponential_generator(hull.lambda_hi, h.domain, self.tol)
                row['sandwich_passed'] = verify_sandwich(low, h, high, self.plan, self.tol).passed
            else:
                row['sandwich_passed'] = None
            row['ok'] = row['sandwich_passed'] is not False and \
                (row['expect'] is None or row['verdict'] == row['expect'])
            ok = ok and row['ok']
            rows.append(row)
        return {'passed': ok and bool(rows), 'windows': rows}

    def check_envelope_containment(self) -> dict:
        """語料中的夾擠三元組：h 的正規化落在每組釘選點的包絡內"""
        rows, ok = [], True
        for case in self._progress(self.corpus.get('sandwiches', []), "envelope_containment"):
            f = self._generator(case['f'], case['domain'])
            h = self._generator(case['h'], case['domain'])
            g = self._generator(case['g'], case['domain'])
            pins = self._pins_for(f)
            report = verify_sandwich(f, h, g, self.plan, self.tol, pins=pins)
            expect = bool(case.get('expect', True))
            row = {'f': case['f'], 'h': case['h'], 'g': case['g'], 'domain': case['domain'],
                   'expect': expect, 'passed': report.passed}
            if report.passed:
                slacks = [
                    sandwich_envelope(f, g, x0, x1, self.plan, self.tol).min_slack(h)
                    for x0, x1 in pins
                ]
                row['min_slack'] = min(slacks)
                row['grid_points'] = self.plan.envelope_n
                row['contained'] = row['min_slack'] >= -self.tol.tol_compare
            else:
                row['violations'] = report.violations
            row['ok'] = report.passed == expect and row.get('contained', True)
            ok = ok and row['ok']
            rows.append(row)
        return {'passed': ok and bool(rows), 'sandwiches': rows}
