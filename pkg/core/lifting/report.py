"""速率提升過程的報告結構。

每處理一批轉移記錄一筆 BatchReport，依序列出 Part A/B/C/D 的嘗試、
同步集合的修改、新增的自迴圈與方程組規模；最後附上整體驗證結果。
"""

from dataclasses import asdict, dataclass, field
from typing import Any

from core.constants import REPORT_SCHEMA_VERSION

# PartAttempt.outcome 的所有可能值
PART_OUTCOMES = ("success", "infeasible", "not_applicable", "failed")


@dataclass
class PartAttempt:
    """單次嘗試。outcome 為 PART_OUTCOMES 其中之一：

    - success：已求解並提交
    - infeasible：方程組無解，verdict 記錄判定是確定或啟發式
    - not_applicable：條件不符而未嘗試（例如 |IS| = 1 時的 Part B/C）
    - failed：Part A 沒有共同係數，或 Part D 的 TRYSYNC 失敗
    """

    part: str
    outcome: str
    detail: str = ""
    scope: str = ""
    equations: int = 0
    variables: list[str] = field(default_factory=list)
    max_residual: float | None = None
    verdict: str = ""


@dataclass
class SyncEdit:
    node: str
    action: str


@dataclass
class InsertedSelfloop:
    process: str
    state: str
    action: str
    rate: float | None = None


@dataclass
class BatchReport:
    transition: str
    action: str
    involved: list[str]
    involved_restricted: list[str]
    attempts: list[PartAttempt] = field(default_factory=list)
    sync_edits: list[SyncEdit] = field(default_factory=list)
    inserted_selfloops: list[InsertedSelfloop] = field(default_factory=list)
    batch_size: int = 0
    part: str | None = None
    outcome: str = "pending"
    notes: list[str] = field(default_factory=list)

    def record(self, attempt: PartAttempt) -> PartAttempt:
        self.attempts.append(attempt)
        return attempt


@dataclass
class VerificationSummary:
    passed: bool
    states: int
    transitions: int
    max_relative_error: float
    problems: list[str] = field(default_factory=list)


@dataclass
class LiftReport:
    batches: list[BatchReport] = field(default_factory=list)
    success: bool = False
    modified_transitions: int = 0
    verification: VerificationSummary | None = None
    solver: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        payload = asdict(self)
        payload["schema"] = REPORT_SCHEMA_VERSION
        return payload

    @property
    def edits(self) -> tuple[list[SyncEdit], list[InsertedSelfloop]]:
        syncs = [e for b in self.batches for e in b.sync_edits]
        loops = [e for b in self.batches for e in b.inserted_selfloops]
        return syncs, loops


__all__ = [
    "PART_OUTCOMES",
    "PartAttempt",
    "SyncEdit",
    "InsertedSelfloop",
    "BatchReport",
    "VerificationSummary",
    "LiftReport",
]
