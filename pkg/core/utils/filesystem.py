"""
檔案系統操作工具模組。

提供讀寫模型、係數檔與報告時共用的檔案操作。
"""

from pathlib import Path

from .logging import logger


def ensure_folder_exists(file_path: str | Path) -> None:
    """
    確保檔案路徑的父資料夾存在。

    Args:
        file_path: 檔案的完整路徑

    Example:
        >>> ensure_folder_exists("output/polling6/repaired.spa")
        # 會建立 output/polling6 資料夾（如果不存在）
    """
    Path(file_path).parent.mkdir(parents=True, exist_ok=True)


def read_text_file(file_path: str | Path) -> str:
    """
    以 UTF-8 讀取文字檔。

    Args:
        file_path: 檔案路徑

    Returns:
        檔案內容

    Raises:
        FileNotFoundError: 當檔案不存在時
    """
    path = Path(file_path)
    if not path.is_file():
        error_msg = f"輸入檔案不存在: {path}\n建議：請確認路徑是否正確"
        logger.error(error_msg)
        raise FileNotFoundError(error_msg)
    return path.read_text(encoding="utf-8")


def write_text_file(file_path: str | Path, content: str) -> None:
    """
    以 UTF-8 寫入文字檔，必要時先建立父資料夾。

    Args:
        file_path: 輸出檔案路徑
        content: 檔案內容
    """
    ensure_folder_exists(file_path)
    Path(file_path).write_text(content, encoding="utf-8")
    logger.info(f"已寫入 {file_path}")


__all__ = ["ensure_folder_exists", "read_text_file", "write_text_file"]
