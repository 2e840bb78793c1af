"""
執行期設定讀取。

環境變數優先，無效值則記錄警告並退回 core.constants 的預設值。
"""

import os

from core.constants import DEFAULT_STATE_BUDGET, STATE_BUDGET_ENV

from .logging import logger


def resolve_state_budget(budget: int | None = None) -> int:
    """
    決定平面化時可探索的最大狀態數。

    順序：明確傳入的參數 > 環境變數 SPALIFT_STATE_BUDGET > 預設值 10^7。

    Args:
        budget: 呼叫端指定的上限；None 表示改讀環境變數

    Returns:
        正整數狀態上限
    """
    if budget is not None:
        return budget

    raw = os.environ.get(STATE_BUDGET_ENV, str(DEFAULT_STATE_BUDGET))
    try:
        value = int(raw)
    except ValueError:
        logger.warning(
            f"{STATE_BUDGET_ENV}={raw!r} 不是整數，改用預設值 {DEFAULT_STATE_BUDGET}"
        )
        return DEFAULT_STATE_BUDGET

    if value <= 0:
        logger.warning(
            f"{STATE_BUDGET_ENV}={value} 必須為正數，改用預設值 {DEFAULT_STATE_BUDGET}"
        )
        return DEFAULT_STATE_BUDGET
    return value


__all__ = ["resolve_state_budget"]
