"""
命令列介面

子命令：eval / compare / witness / index / window / hull / sandwich / report

使用方法：
    python main.py eval --gen "pow(2)" --domain "(0,10)" --sample "1,7"
    python main.py compare --a "id" --b "pow(3)" --domain "(-1,1)"
    python main.py report --output report.json
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

from .comparison import (
    Relation,
    compare,
    find_incomparability_witness,
    mikusinski_index,
    vanishing_derivative_points,
    verdict_to_dict,
)
from .config import CONFIG_DIR, OUTPUT_FORMATS, RunConfig, Tolerances, load_settings
from .errors import (
    CriteriaConflict,
    DomainError,
    InvalidParameter,
    NoWitnessFound,
    NotComparable,
    NotDifferentiable,
    ParseError,
    QuasiMeanError,
    RangeError,
    Unstable,
)
from .generator import Generator, parse_generator
from .intervals import (
    MikusinskiWindow,
    hull_membership_exponential,
    sandwich_envelope,
    smoothness_probe,
    verify_sandwich,
    window_membership,
)
from .means import WeightedSample, quasi_mean
from .pipeline import ConformancePipeline, report_json


DEFAULT_DOMAIN = "(0,10)"

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT = 2
EXIT_INCOMPARABLE = 3
EXIT_CONFLICT = 4
EXIT_NO_WITNESS = 5
EXIT_DERIVATIVE = 6
EXIT_NOT_COMPARABLE = 7

# 子類別要排在父類別前面
_EXIT_CODES = (
    (CriteriaConflict, EXIT_CONFLICT),
    (NoWitnessFound, EXIT_NO_WITNESS),
    (NotComparable, EXIT_NOT_COMPARABLE),
    (NotDifferentiable, EXIT_DERIVATIVE),
    (Unstable, EXIT_DERIVATIVE),
    (ParseError, EXIT_INPUT),
    (DomainError, EXIT_INPUT),
    (RangeError, EXIT_INPUT),
    (InvalidParameter, EXIT_INPUT),
)

EPILOG = """\
結束代碼：
  0  成功（compare：Less / Greater / Equal）
  1  sandwich 或 report 驗證失敗
  2  ParseError / DomainError / RangeError / InvalidParameter
  3  Incomparable（compare）
  4  CriteriaConflict
  5  NoWitnessFound
  6  NotDifferentiable / ZeroDerivative / Unstable
  7  NotComparable

環境變數 QAM_SEED 在未指定 --seed 時作為種子。
CSV 欄位：compare → criterion,verdict,violation_le,violation_ge；
sandwich → x,lower,upper,h_normalized,region；其餘 → key,value。
"""


def exit_code_for(error: QuasiMeanError) -> int:
    for cls, code in _EXIT_CODES:
        if isinstance(error, cls):
            return code
    return EXIT_FAILED


def _num(value) -> str:
    """17 位有效數字（binary64 可還原）"""
    return format(float(value), '.17g')


# ============================================================
# 參數
# ============================================================

def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--domain', help=f'定義域，例如 "(0,10]"（預設 {DEFAULT_DOMAIN}）')
    common.add_argument('--grid', type=int, help='驗證網格點數（≥ 17）')
    common.add_argument('--seed', help='64 位元種子（十進位或 0x 十六進位）')
    common.add_argument('--format', choices=OUTPUT_FORMATS, help='輸出格式')
    common.add_argument('--config', type=Path, default=CONFIG_DIR, help='設定檔目錄')
    common.add_argument('--output', type=Path, help='輸出到檔案（預設 stdout）')
    for name in Tolerances().to_dict():
        short = name[len('tol_'):]
        common.add_argument(f'--tol.{short}', dest=name, type=float, help=f'覆蓋 {name}')
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog='quasi-means',
        description='擬算術平均：求值、比較、見證與夾擠',
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter
    )
    sub = parser.add_subparsers(dest='command', required=True)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        return sub.add_parser(
            name, parents=[common], help=help_text, epilog=EPILOG,
            formatter_class=argparse.RawDescriptionHelpFormatter
        )

    p = add('eval', '計算擬算術平均')
    p.add_argument('--gen', required=True, help='生成函數')
    p.add_argument('--sample', required=True, help='取樣 "p1:w1,p2:w2" 或 "p1,p2"')

    p = add('compare', '比較兩個平均')
    p.add_argument('--a', required=True, help='生成函數 f')
    p.add_argument('--b', required=True, help='生成函數 g')

    p = add('witness', '構造不可比較的見證')
    p.add_argument('--a', required=True, help='生成函數 f')
    p.add_argument('--b', required=True, help='生成函數 g')
    p.add_argument('--x0', type=float, help='構造起點（預設為導數消失點或區間中點）')

    p = add('index', 'Mikusiński 指標 f″/f′')
    p.add_argument('--gen', required=True, help='生成函數')
    p.add_argument('--at', type=float, required=True, help='位置 x')

    p = add('window', 'M̃(x0, U) 成員判定')
    p.add_argument('--gen', required=True, help='生成函數')
    p.add_argument('--x0', type=float, required=True, help='視窗中心')
    p.add_argument('--U', dest='U', required=True, help='指標區間，例如 "[0,2]"')

    p = add('hull', '以指數族夾擠判定凸包成員')
    p.add_argument('--gen', required=True, help='生成函數')
    p.add_argument('--x0', type=float, required=True, help='視窗中心')
    p.add_argument('--U', dest='U', required=True, help='指標區間，例如 "[0,2]"')

    p = add('sandwich', '驗證 A^[f] ≤ A^[h] ≤ A^[g] 並探測 h 的單側導數')
    p.add_argument('--f', required=True, help='下界生成函數')
    p.add_argument('--h', required=True, help='中間生成函數')
    p.add_argument('--g', required=True, help='上界生成函數')
    p.add_argument('--x0', type=float, help='導數探測位置（預設區間中點）')

    add('report', '執行內建語料的完整驗證')
    return parser


# ============================================================
# 輸出
# ============================================================

def _csv_pairs(payload: dict) -> str:
    lines = ["key,value"]
    for key, value in payload.items():
        if isinstance(value, (dict, list)):
            value = json.dumps(value, ensure_ascii=False, sort_keys=True)
        elif isinstance(value, float):
            value = _num(value)
        text = "" if value is None else str(value)
        if any(c in text for c in ',"\n'):
            text = '"' + text.replace('"', '""') + '"'
        lines.append(f"{key},{text}")
    return "\n".join(lines) + "\n"


class CommandOutput:
    """單一子命令的輸出（三種格式共用同一份資料）"""

    def __init__(
        self,
        payload: dict,
        text: List[str],
        csv_text: Optional[str] = None,
        exit_code: int = EXIT_OK,
        raw: Optional[str] = None
    ):
        self.payload = payload
        self.text = text
        self.csv_text = csv_text
        self.exit_code = exit_code
        self.raw = raw

    def render(self, output_format: str) -> str:
        if self.raw is not None:
            return self.raw
        if output_format == 'json':
            return json.dumps(self.payload, ensure_ascii=False, indent=2) + "\n"
        if output_format == 'csv':
            return self.csv_text if self.csv_text is not None else _csv_pairs(self.payload)
        return "\n".join(self.text) + "\n"


def _write(content: str, path: Optional[Path]):
    if path is None:
        sys.stdout.write(content)
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(content, encoding='utf-8')
    print(f"✅ 已寫入：{path}", file=sys.stderr)


# ============================================================
# 子命令
# ============================================================

def _gen(text: str, cfg: RunConfig) -> Generator:
    return parse_generator(text, cfg.domain or DEFAULT_DOMAIN, cfg.tolerances, cfg.grid_n)


def cmd_eval(args, cfg: RunConfig) -> CommandOutput:
    g = _gen(args.gen, cfg)
    sample = WeightedSample.parse(args.sample)
    value = quasi_mean(g, sample)
    payload = {'gen': g.text, 'domain': str(g.domain), 'sample': sample.to_dict(), 'mean': value}
    return CommandOutput(payload, [_num(value)])


def cmd_compare(args, cfg: RunConfig) -> CommandOutput:
    f, g = _gen(args.a, cfg), _gen(args.b, cfg)
    verdict = compare(f, g, cfg.plan, cfg.tolerances)
    payload = verdict_to_dict(verdict, cfg.tolerances, cfg.plan)

    text = [f"relation: {verdict.relation.value}"]
    if verdict.affine is not None:
        text.append(f"affine: alpha={_num(verdict.affine[0])} beta={_num(verdict.affine[1])}")
    for report in verdict.reports:
        text.append(
            f"  {report.criterion.value:<22} {report.verdict.value:<14} "
            f"le={_num(report.violation_le)} ge={_num(report.violation_ge)}"
        )
    for label, sample in (("le_violated", verdict.witness_le_violated),
                          ("ge_violated", verdict.witness_ge_violated)):
        if sample is not None:
            text.append(f"witness {label}: {sample.to_text()}")
    text.append(f"seed: {cfg.seed:#x}")

    csv_lines = ["criterion,verdict,violation_le,violation_ge"]
    csv_lines.extend(
        f"{r.criterion.value},{r.verdict.value},{_num(r.violation_le)},{_num(r.violation_ge)}"
        for r in verdict.reports
    )
    code = EXIT_INCOMPARABLE if verdict.relation == Relation.INCOMPARABLE else EXIT_OK
    return CommandOutput(payload, text, "\n".join(csv_lines) + "\n", code)


def cmd_witness(args, cfg: RunConfig) -> CommandOutput:
    f, g = _gen(args.a, cfg), _gen(args.b, cfg)
    x0 = args.x0
    if x0 is None:
        candidates = vanishing_derivative_points(f, g, cfg.plan)
        a, b = f.bounds()
        x0 = candidates[0] if candidates else 0.5 * (a + b)
    pair = find_incomparability_witness(f, g, x0, cfg.plan, cfg.tolerances)
    payload = {**pair.to_dict(), 'seed': cfg.seed}
    text = [
        f"x0: {_num(pair.x0)}",
        f"s_plus:  {pair.s_plus.to_text()}  (A^[f] − A^[g] = {_num(pair.gap_plus)})",
        f"s_minus: {pair.s_minus.to_text()}  (A^[f] − A^[g] = {_num(pair.gap_minus)})",
        f"seed: {cfg.seed:#x}",
    ]
    return CommandOutput(payload, text)


def cmd_index(args, cfg: RunConfig) -> CommandOutput:
    g = _gen(args.gen, cfg)
    value = mikusinski_index(g, args.at)
    return CommandOutput({'gen': g.text, 'x': args.at, 'index': value}, [_num(value)])


def cmd_window(args, cfg: RunConfig) -> CommandOutput:
    g = _gen(args.gen, cfg)
    window = MikusinskiWindow.parse(args.x0, args.U)
    verdict = window_membership(g, window, cfg.tolerances)
    payload = {'gen': g.text, 'x0': window.x0, 'U': str(window), 'verdict': verdict.value}
    return CommandOutput(payload, [verdict.value])


def cmd_hull(args, cfg: RunConfig) -> CommandOutput:
    g = _gen(args.gen, cfg)
    window = MikusinskiWindow.parse(args.x0, args.U)
    result = hull_membership_exponential(g, window, cfg.plan, cfg.tolerances)
    payload = {'gen': g.text, 'x0': window.x0, 'U': str(window), **result.to_dict(), 'seed': cfg.seed}
    text = [result.verdict.value]
    if result.certificate is not None:
        text.append(f"certificate: lambda_lo={_num(result.lambda_lo)} lambda_hi={_num(result.lambda_hi)}")
    text.append(f"seed: {cfg.seed:#x}")
    return CommandOutput(payload, text)


def cmd_sandwich(args, cfg: RunConfig) -> CommandOutput:
    f, h, g = _gen(args.f, cfg), _gen(args.h, cfg), _gen(args.g, cfg)
    report = verify_sandwich(f, h, g, cfg.plan, cfg.tolerances)
    payload = {'sandwich': report.to_dict(), 'seed': cfg.seed}
    text = [
        "pass" if report.passed else "fail",
        f"compare(f, h): {report.relation_fh}",
        f"compare(h, g): {report.relation_hg}",
    ]
    text.extend(f"  ⚠️ {v}" for v in report.violations)

    csv_text = None
    if report.passed:
        a, b = f.bounds()
        x0 = args.x0 if args.x0 is not None else 0.5 * (a + b)
        probe = smoothness_probe(f, h, g, x0, cfg.tolerances)
        payload['smoothness'] = probe.to_dict()
        text.append(f"smoothness at {_num(x0)}: prediction={probe.prediction} consistent={probe.consistent}")
        for order, estimates in (("h'", probe.h_first), ("h''", probe.h_second)):
            parts = [
                f"{side}={_num(est.estimate) if est else 'n/a'}" for side, est in estimates.items()
            ]
            text.append(f"  {order}: " + " ".join(parts))
        if report.pins:
            pin = report.pins[0]
            csv_text = sandwich_envelope(f, g, pin.x0, pin.x1, cfg.plan, cfg.tolerances).to_csv(h)
    text.append(f"seed: {cfg.seed:#x}")
    return CommandOutput(payload, text, csv_text, EXIT_OK if report.passed else EXIT_FAILED)


def cmd_report(args, cfg: RunConfig) -> CommandOutput:
    pipeline = ConformancePipeline(args.config, run_config=cfg)
    result = pipeline.run()
    code = EXIT_OK if result.success else EXIT_FAILED
    return CommandOutput(result.to_dict(), [], exit_code=code, raw=report_json(result))


COMMANDS: Dict[str, Callable[..., CommandOutput]] = {
    'eval': cmd_eval,
    'compare': cmd_compare,
    'witness': cmd_witness,
    'index': cmd_index,
    'window': cmd_window,
    'hull': cmd_hull,
    'sandwich': cmd_sandwich,
    'report': cmd_report,
}


def main(argv: Optional[List[str]] = None, environ=None) -> int:
    """
    執行 CLI

    Args:
        argv: 命令列參數（預設 sys.argv[1:]）
        environ: 環境變數（預設 os.environ）

    Returns:
        結束代碼
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.resolve(args, load_settings(args.config), environ)
        output = COMMANDS[args.command](args, cfg)
    except QuasiMeanError as e:
        print(f"❌ {type(e).__name__}: {e}", file=sys.stderr)
        return exit_code_for(e)
    _write(output.render(cfg.output_format), args.output)
    return output.exit_code


def run_app():
    """啟動命令列"""
    sys.exit(main())
