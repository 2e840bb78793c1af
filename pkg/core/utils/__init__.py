"""
Core 工具模組套件。

提供 Logger、檔案系統操作與執行期設定等工具函式。
支援 `from core.utils import logger` 等便捷匯入方式。

模組結構:
    - logging: Logger 設定與 TqdmLogSink
    - filesystem: 檔案讀寫與資料夾建立
    - config: 環境變數設定解析
"""

from .logging import LOG_LEVELS, logger, set_log_level
from .filesystem import ensure_folder_exists, read_text_file, write_text_file
from .config import resolve_state_budget

__all__ = [
    # Logger
    "logger",
    "LOG_LEVELS",
    "set_log_level",
    # 檔案系統工具
    "ensure_folder_exists",
    "read_text_file",
    "write_text_file",
    # 設定
    "resolve_state_budget",
]
