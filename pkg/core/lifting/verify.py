"""修復結果的獨立驗證：重新平面化修復後的系統，與期望的轉移系統比對。"""

from core.constants import VERIFY_TOLERANCE
from core.lifting.report import VerificationSummary
from core.model import SpaSystem
from core.parser import ModificationMap, format_key, format_state
from core.semantics import FlatTS, TransitionKey, flatten
from core.utils import logger


def expected_rates(
    original: FlatTS, tmod: ModificationMap
) -> dict[TransitionKey, float]:
    """期望速率：原速率乘上修正係數，未列出的係數為 1。全域自迴圈不列入。"""
    return {t.key: t.rate * tmod.get(t.key, 1.0) for t in original.visible_transitions}


def verify_repair(
    original: FlatTS,
    tmod: ModificationMap,
    repaired: SpaSystem,
    tolerance: float = VERIFY_TOLERANCE,
    budget: int | None = None,
) -> VerificationSummary:
    """檢查修復後的系統是否產生期望的平面轉移系統。

    狀態集合與 (source, action, target) 關係必須完全相同，每條轉移的速率與
    原速率 × 係數的相對誤差不超過 tolerance。

    Args:
        original: 原系統的平面轉移系統
        tmod: 修正係數
        repaired: 修復後的系統
        tolerance: 相對誤差容忍度
        budget: 平面化的狀態上限

    Returns:
        VerificationSummary；problems 列出每個不符之處
    """
    flat = flatten(repaired, budget=budget)
    problems: list[str] = []

    for state in sorted(original.state_set - flat.state_set):
        problems.append(f"缺少狀態 {format_state(state)}")
    for state in sorted(flat.state_set - original.state_set):
        problems.append(f"多出狀態 {format_state(state)}")

    expected = expected_rates(original, tmod)
    actual = {t.key: t.rate for t in flat.visible_transitions}
    for key in sorted(expected.keys() - actual.keys()):
        problems.append(f"缺少轉移 {format_key(key)}")
    for key in sorted(actual.keys() - expected.keys()):
        problems.append(f"多出轉移 {format_key(key)}")

    max_error = 0.0
    for key in sorted(expected.keys() & actual.keys()):
        error = abs(actual[key] - expected[key]) / expected[key]
        max_error = max(max_error, error)
        if error > tolerance:
            problems.append(
                f"速率不符 {format_key(key)}：期望 {expected[key]:.17g}，"
                f"實際 {actual[key]:.17g}（相對誤差 {error:.3e}）"
            )

    summary = VerificationSummary(
        passed=not problems,
        states=len(flat.states),
        transitions=len(actual),
        max_relative_error=max_error,
        problems=problems,
    )
    if summary.passed:
        logger.info(f"驗證通過：最大相對誤差 {max_error:.3e}")
    else:
        logger.warning(f"驗證失敗：{len(problems)} 處不符，第一處為 {problems[0]}")
    return summary


__all__ = ["expected_rates", "verify_repair"]
