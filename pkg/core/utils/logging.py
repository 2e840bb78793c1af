"""
Logger 設定模組。

log 一律經 tqdm.write 寫到標準錯誤輸出；平面轉移系統與分析結果會寫到標準
輸出，兩者不能混在一起。等級依序取自 ``set_log_level`` 的參數、環境變數
LOG_LEVEL，預設 INFO。
"""

import os
import sys

from loguru import logger
from tqdm import tqdm

LOG_LEVEL_ENV = "LOG_LEVEL"
DEFAULT_LOG_LEVEL = "INFO"
LOG_LEVELS = ("TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR", "CRITICAL")

_FORMAT = (
    "<green>{time:HH:mm:ss}</green> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> | "
    "<level>{level}</level> - <level>{message}</level>"
)

_sink_id: int | None = None


class TqdmLogSink:
    """經由 tqdm.write 寫到 stderr，平面化時的進度條不會被打斷。"""

    def write(self, message: str) -> None:
        tqdm.write(message.strip(), file=sys.stderr)


def set_log_level(level: str | None = None) -> str:
    """
    重新設定 log 等級。

    Args:
        level: 等級名稱（不分大小寫）；None 時改用環境變數 LOG_LEVEL

    Returns:
        實際採用的等級名稱；無法辨識的等級會退回 INFO
    """
    global _sink_id
    raw = level or os.environ.get(LOG_LEVEL_ENV, DEFAULT_LOG_LEVEL)
    chosen = raw.upper()
    fallback = chosen not in LOG_LEVELS
    if fallback:
        chosen = DEFAULT_LOG_LEVEL

    if _sink_id is None:
        logger.remove()  # 移除 loguru 預設 handler
    else:
        logger.remove(_sink_id)
    _sink_id = logger.add(
        TqdmLogSink(),
        format=_FORMAT,
        level=chosen,
        colorize=True,
        backtrace=True,
        diagnose=True,
    )
    if fallback:
        logger.warning(f"無法辨識的 log 等級 {raw!r}，改用 {DEFAULT_LOG_LEVEL}")
    return chosen


set_log_level()


__all__ = ["LOG_LEVELS", "logger", "set_log_level"]
