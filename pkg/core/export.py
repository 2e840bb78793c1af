"""平面轉移系統、提升報告與基準統計的輸出格式。"""

import json

import polars as pl

from core.constants import RATE_SIGNIFICANT_DIGITS
from core.lifting.report import LiftReport
from core.parser import format_key, format_state
from core.schemas import FLAT_TRANSITION_SCHEMA
from core.semantics import FlatTS


def export_flat(flat: FlatTS) -> str:
    """匯出平面轉移系統。

    標頭為 ``STATES k`` 與 ``TRANSITIONS m``，之後每行一條轉移，
    依平面化時的順序排列；速率以 17 位有效數字輸出，可由 parse_flat 無損讀回。
    全域自迴圈不屬於 CTMC，不會匯出。

    Example:
        >>> print(export_flat(flat))
        STATES 2
        TRANSITIONS 1
        (s0) -a-> (s1) : 2
    """
    transitions = flat.visible_transitions
    lines = [f"STATES {len(flat.states)}", f"TRANSITIONS {len(transitions)}"]
    lines += [
        f"{format_key(t.key)} : {t.rate:.{RATE_SIGNIFICANT_DIGITS}g}" for t in transitions
    ]
    return "\n".join(lines) + "\n"


def flat_to_frame(flat: FlatTS) -> pl.DataFrame:
    """把可見轉移整理成 DataFrame，每列一條轉移並附上推導數。"""
    rows = [
        {
            "source": format_state(t.source),
            "action": t.action,
            "target": format_state(t.target),
            "rate": t.rate,
            "derivations": len(t.derivations),
        }
        for t in flat.visible_transitions
    ]
    return pl.DataFrame(rows, schema=FLAT_TRANSITION_SCHEMA)


def export_report(report: LiftReport) -> str:
    return json.dumps(report.to_dict(), ensure_ascii=False, indent=2)


__all__ = ["export_flat", "flat_to_frame", "export_report"]
