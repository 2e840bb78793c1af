"""
main.py - 專案主要接口

透過下列子命令可操作不同功能：
  flatten  產生模型的平面轉移系統並匯出
  analyze  列出 a-scope、Act/Act_perf，以及單一轉移的 MS/SS/PS/IS/IS_r 與 RSLC
  lift     把修正係數提升到各循序行程，輸出修復後的模型與報告
  bench    產生基準模型（目前為 polling）並統計規模，可選擇執行速率提升
  verify   驗證修復後的模型是否符合修正係數

使用方式:
    python main.py <子命令> [選項]

例如：
    python main.py flatten models/five_leaf.spa -o five_leaf.fts
    python main.py lift polling6.spa factors.txt -o repaired.spa --report report.json
    python main.py bench polling --n 6 7 8 --factors auto --csv trend.csv

結束代碼：0 成功；1 提升失敗或驗證不符；2 輸入錯誤。
"""

import argparse
import sys
from pathlib import Path

from core.benchmarks import get_all_benchmarks, get_benchmark, stats_frame
from core.combinatorics import rslc
from core.constants import (
    DEFAULT_RESTARTS,
    DEFAULT_SEED,
    DEFAULT_SOLVER_TOLERANCE,
    VERIFY_TOLERANCE,
)
from core.equations import SolverConfig, build_equation, format_equation
from core.export import export_flat, export_report, flat_to_frame
from core.lifting import RateLiftError, rate_lift, verify_repair
from core.model import format_path, syntactic_actions
from core.parser import (
    parse_factors,
    parse_system,
    parse_transition_key,
    serialize_factors,
    serialize_system,
)
from core.semantics import StateBudgetExceeded, flatten, performable_actions
from core.structure import a_scopes, transition_sets
from core.utils import LOG_LEVELS, logger, read_text_file, set_log_level, write_text_file

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INPUT_ERROR = 2


def _solver_config(args) -> SolverConfig:
    return SolverConfig(tolerance=args.tol, restarts=args.restarts, seed=args.seed)


def _load_model(path: str):
    logger.info(f"讀取模型 {path}")
    return parse_system(read_text_file(path))


def _leaf_set_formatter(system):
    def names(leaves) -> str:
        return "{" + ", ".join(system.leaf_of(i).name for i in sorted(leaves)) + "}"

    return names


def cmd_flatten(args) -> int:
    """產生平面轉移系統；未指定 -o 時輸出到標準輸出"""
    system = _load_model(args.model)
    flat = flatten(system, show_progress=True)
    text = export_flat(flat)
    if args.output:
        write_text_file(args.output, text)
    else:
        sys.stdout.write(text)

    summary = flat_to_frame(flat).group_by("action").len().sort("action")
    logger.info(f"{len(flat.states)} 個狀態，各動作的轉移數：\n{summary}")
    logger.info("flatten 步驟完成。")
    return EXIT_OK


def cmd_analyze(args) -> int:
    """列出同步結構分析結果"""
    system = _load_model(args.model)
    names = _leaf_set_formatter(system)

    actions = [args.action] if args.action else sorted(syntactic_actions(system.root))
    for action in actions:
        scopes = a_scopes(system, action)
        print(f"[{action}] scopes:")
        for path in scopes:
            print(f"  {format_path(path)}  {names(system.leaf_indices(path))}")

    print("nodes:")
    for path in system.paths():
        node = system.node_at(path)
        declared = sorted(syntactic_actions(node))
        performed = sorted(performable_actions(system, path))
        print(f"  {format_path(path)}  Act={declared}  Act_perf={performed}")

    if args.transition:
        flat = flatten(system, show_progress=True)
        t = flat.transition(parse_transition_key(args.transition))
        sets = transition_sets(system, flat, t)
        combos = rslc(system, flat, t)
        print(f"transition: {args.transition}")
        print(f"  MS   = {names(sets.moving)}")
        print(f"  SS   = {names(sets.stable)}")
        print(f"  PS   = {names(sets.participating)}")
        print(f"  IS   = {names(sets.involved)}")
        print(f"  IS_r = {names(sets.involved_restricted)}")
        print(f"  root = {format_path(sets.involved_root)}")
        print(f"  rslc = [{', '.join(names(c) for c in combos)}]")
        equation = build_equation(
            system, flat, t, sets.participating, sets.moving, combos
        )
        print(f"  equation: {format_equation(equation, system)}")
    return EXIT_OK


def cmd_lift(args) -> int:
    """執行速率提升"""
    system = _load_model(args.model)
    flat = flatten(system, show_progress=True)
    factors = parse_factors(read_text_file(args.factors), flat)
    try:
        repaired = rate_lift(system, flat, factors, _solver_config(args))
    except RateLiftError as e:
        if args.report:
            write_text_file(args.report, export_report(e.report))
        return EXIT_FAILURE

    write_text_file(args.output, serialize_system(repaired.system))
    if args.report:
        write_text_file(args.report, export_report(repaired.report))
    parts = ", ".join(f"{b.transition}: Part {b.part}" for b in repaired.report.batches)
    logger.info(f"lift 步驟完成。{parts}")
    return EXIT_OK


def cmd_verify(args) -> int:
    """驗證修復後的模型"""
    original = _load_model(args.model)
    flat = flatten(original, show_progress=True)
    factors = parse_factors(read_text_file(args.factors), flat)
    repaired = _load_model(args.repaired)
    summary = verify_repair(flat, factors, repaired, tolerance=args.tolerance)
    for problem in summary.problems:
        print(problem)
    return EXIT_OK if summary.passed else EXIT_FAILURE


def cmd_bench(args) -> int:
    """產生基準模型並統計規模"""
    generator_class = get_benchmark(args.name)
    lift = args.factors == "auto"
    stats = []
    exit_code = EXIT_OK
    for n in args.n:
        generator = generator_class(n)
        run = generator.run(
            lift=lift, config=_solver_config(args), seed=args.seed, show_progress=True
        )
        stats.append(run.stats)
        if run.failure is not None:
            exit_code = EXIT_FAILURE
        if run.verification is not None and not run.verification.passed:
            exit_code = EXIT_FAILURE

        if args.out_dir:
            folder = Path(args.out_dir) / f"{args.name}{n}"
            write_text_file(folder / "model.spa", serialize_system(run.system))
            write_text_file(folder / "flat.fts", export_flat(run.flat))
            if lift:
                write_text_file(folder / "factors.txt", serialize_factors(run.factors))
            if run.repaired is not None:
                write_text_file(folder / "repaired.spa", serialize_system(run.repaired.system))
                write_text_file(folder / "report.json", export_report(run.repaired.report))
            elif run.failure is not None:
                write_text_file(folder / "report.json", export_report(run.failure))

    frame = stats_frame(stats)
    print(frame)
    if args.csv:
        Path(args.csv).parent.mkdir(parents=True, exist_ok=True)
        frame.write_csv(args.csv)
        logger.info(f"已寫入 {args.csv}")
    logger.info("bench 步驟完成。")
    return exit_code


def _add_solver_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--tol", type=float, default=DEFAULT_SOLVER_TOLERANCE, help="方程組的相對殘差容忍度"
    )
    parser.add_argument(
        "--restarts", type=int, default=DEFAULT_RESTARTS, help="數值求解的起點數"
    )
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED, help="亂數種子")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="SPA 速率提升工具：平面化、結構分析、速率提升與驗證",
        epilog="請使用各子命令來執行特定功能。",
    )
    parser.add_argument(
        "--log-level",
        type=str.upper,
        choices=LOG_LEVELS,
        help="log 等級，未指定時使用環境變數 LOG_LEVEL",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    # flatten 子命令
    parser_flatten = subparsers.add_parser("flatten", help="產生平面轉移系統")
    parser_flatten.add_argument("model", type=str, help="模型檔路徑")
    parser_flatten.add_argument("-o", "--output", type=str, help="輸出檔案路徑")
    parser_flatten.set_defaults(func=cmd_flatten)

    # analyze 子命令
    parser_analyze = subparsers.add_parser("analyze", help="同步結構分析")
    parser_analyze.add_argument("model", type=str, help="模型檔路徑")
    parser_analyze.add_argument(
        "--transition",
        type=str,
        help="要分析的轉移，例如 '(s0,s0) -a-> (s1,s0)'",
    )
    parser_analyze.add_argument("--action", type=str, help="只列出此動作的 scope")
    parser_analyze.set_defaults(func=cmd_analyze)

    # lift 子命令
    parser_lift = subparsers.add_parser("lift", help="執行速率提升")
    parser_lift.add_argument("model", type=str, help="模型檔路徑")
    parser_lift.add_argument("factors", type=str, help="修正係數檔路徑")
    parser_lift.add_argument(
        "-o", "--output", type=str, required=True, help="修復後的模型輸出路徑"
    )
    parser_lift.add_argument("--report", type=str, help="報告 JSON 輸出路徑")
    _add_solver_arguments(parser_lift)
    parser_lift.set_defaults(func=cmd_lift)

    # bench 子命令
    parser_bench = subparsers.add_parser("bench", help="基準模型規模統計")
    parser_bench.add_argument(
        "name", type=str, choices=get_all_benchmarks(), help="基準模型名稱"
    )
    parser_bench.add_argument(
        "--n", type=int, nargs="+", default=[6], help="規模，可提供多個，如: 6 7 8"
    )
    parser_bench.add_argument(
        "--factors",
        type=str,
        choices=["none", "auto"],
        default="none",
        help="auto：由已知解產生修正係數並執行速率提升",
    )
    parser_bench.add_argument("--csv", type=str, help="統計表 CSV 輸出路徑")
    parser_bench.add_argument("--out-dir", type=str, help="輸出模型、係數與報告的資料夾")
    _add_solver_arguments(parser_bench)
    parser_bench.set_defaults(func=cmd_bench)

    # verify 子命令
    parser_verify = subparsers.add_parser("verify", help="驗證修復後的模型")
    parser_verify.add_argument("model", type=str, help="原始模型檔路徑")
    parser_verify.add_argument("factors", type=str, help="修正係數檔路徑")
    parser_verify.add_argument("repaired", type=str, help="修復後的模型檔路徑")
    parser_verify.add_argument(
        "--tolerance", type=float, default=VERIFY_TOLERANCE, help="速率的相對誤差容忍度"
    )
    parser_verify.set_defaults(func=cmd_verify)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.log_level:
        set_log_level(args.log_level)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError) as e:
        # ParseError、ModelError、StructureError 都是 ValueError；UnknownTransition 是 KeyError
        logger.critical(f"輸入錯誤：{e}")
        return EXIT_INPUT_ERROR
    except StateBudgetExceeded as e:
        logger.critical(f"狀態空間過大：{e}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
