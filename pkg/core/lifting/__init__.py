"""
速率提升套件。

把平面轉移系統上的修正係數提升到各循序行程的區域速率，必要時修改同步集合
並新增自迴圈。

模組結構:
    - algorithm: 主流程（Part A/B/C/D）
    - trysync: 同步集合修改與偽轉移檢查
    - verify: 修復結果的獨立驗證
    - report: 報告資料結構
"""

from .algorithm import (
    LiftContext,
    RateLiftError,
    RepairedSystem,
    local_repair,
    part_b,
    part_c,
    part_d,
    rate_lift,
)
from .report import (
    PART_OUTCOMES,
    BatchReport,
    InsertedSelfloop,
    LiftReport,
    PartAttempt,
    SyncEdit,
    VerificationSummary,
)
from .trysync import TrySyncOutcome, trysync
from .verify import expected_rates, verify_repair

__all__ = [
    # 主流程
    "LiftContext",
    "RateLiftError",
    "RepairedSystem",
    "local_repair",
    "part_b",
    "part_c",
    "part_d",
    "rate_lift",
    # TRYSYNC
    "TrySyncOutcome",
    "trysync",
    # 驗證
    "expected_rates",
    "verify_repair",
    # 報告
    "BatchReport",
    "InsertedSelfloop",
    "LiftReport",
    "PART_OUTCOMES",
    "PartAttempt",
    "SyncEdit",
    "VerificationSummary",
]
