"""基準模型產生器抽象基類與註冊表。"""

import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np
import polars as pl

from core.constants import DEFAULT_SEED
from core.equations import SolverConfig
from core.lifting import (
    LiftReport,
    RateLiftError,
    RepairedSystem,
    VerificationSummary,
    rate_lift,
    verify_repair,
)
from core.model import ActionLabel, SpaSystem
from core.parser import ModificationMap
from core.schemas import BENCH_STATS_SCHEMA
from core.semantics import FlatTS, FlatTransition, flatten
from core.utils import logger


@dataclass
class BenchStats:
    """單一規模的統計；*_seconds 為各階段的實際耗時。"""

    n_stations: int
    states: int
    transitions: int
    loop1a_transitions: int
    equations: int = 0
    variables: int = 0
    part: str | None = None
    verified: bool | None = None
    generate_seconds: float = 0.0
    flatten_seconds: float = 0.0
    lift_seconds: float | None = None
    verify_seconds: float | None = None

    def to_row(self) -> dict:
        return {name: getattr(self, name) for name in BENCH_STATS_SCHEMA.names()}


@dataclass
class BenchRun:
    system: SpaSystem
    flat: FlatTS
    stats: BenchStats
    factors: ModificationMap = field(default_factory=dict)
    repaired: RepairedSystem | None = None
    verification: VerificationSummary | None = None
    # 速率提升失敗時到失敗為止的報告
    failure: LiftReport | None = None


def stats_frame(stats: list[BenchStats]) -> pl.DataFrame:
    """把多個規模的統計整理成固定 schema 的 DataFrame。"""
    return pl.DataFrame([s.to_row() for s in stats], schema=BENCH_STATS_SCHEMA)


class BenchmarkGenerator(ABC):
    """參數化的基準模型產生器。

    子類必須定義的類別變數：
        NAME: 註冊名稱
        TRACKED_ACTION: 要計數並指定修正係數的動作
        MIN_SIZE: 最小規模
    """

    NAME: str = ""
    TRACKED_ACTION: ActionLabel = ""
    MIN_SIZE: int = 1

    def __init__(self, size: int):
        if not self.NAME or not self.TRACKED_ACTION:
            raise NotImplementedError(
                f"{self.__class__.__name__} 必須定義 NAME 與 TRACKED_ACTION 類別變數"
            )
        if size < self.MIN_SIZE:
            error_msg = (
                f"{self.NAME} 的規模必須 ≥ {self.MIN_SIZE}，目前為 {size}\n"
                f"建議：請調整 --n 參數"
            )
            logger.error(error_msg)
            raise ValueError(error_msg)
        self.size = size

    @abstractmethod
    def build(self) -> SpaSystem:
        """產生原始系統。"""

    @abstractmethod
    def planted_system(self, rng: np.random.Generator) -> SpaSystem:
        """產生已修改同步結構、且速率為隨機取樣的系統，作為已知解。"""

    def tracked_transitions(self, flat: FlatTS) -> list[FlatTransition]:
        return [t for t in flat.visible_transitions if t.action == self.TRACKED_ACTION]

    def planted_factors(self, flat: FlatTS, seed: int = DEFAULT_SEED) -> ModificationMap:
        """由已知解推得的修正係數：planted 系統的平面速率除以原速率。

        planted 系統必須與原系統有相同的轉移關係，只有 TRACKED_ACTION 的轉移
        會指定係數。
        """
        planted = flatten(self.planted_system(np.random.default_rng(seed)))
        if planted.relation() != flat.relation():
            error_msg = (
                f"{self.NAME} 的 planted 系統轉移關係與原系統不同\n"
                f"建議：檢查 planted_system 新增的自迴圈"
            )
            logger.error(error_msg)
            raise RuntimeError(error_msg)
        return {
            t.key: planted.transition(t.key).rate / t.rate
            for t in self.tracked_transitions(flat)
        }

    def run(
        self,
        lift: bool = False,
        config: SolverConfig | None = None,
        seed: int = DEFAULT_SEED,
        budget: int | None = None,
        show_progress: bool = False,
    ) -> BenchRun:
        """產生、平面化，並在 lift 為 True 時以 planted 係數執行速率提升與驗證。"""
        start = time.perf_counter()
        system = self.build()
        generated = time.perf_counter()
        flat = flatten(system, budget=budget, show_progress=show_progress)
        flattened = time.perf_counter()

        stats = BenchStats(
            n_stations=self.size,
            states=len(flat.states),
            transitions=len(flat.visible_transitions),
            loop1a_transitions=len(self.tracked_transitions(flat)),
            generate_seconds=generated - start,
            flatten_seconds=flattened - generated,
        )
        logger.info(
            f"{self.NAME} N={self.size}：{stats.states} 個狀態，"
            f"{stats.transitions} 條轉移，{stats.loop1a_transitions} 條 {self.TRACKED_ACTION} 轉移"
        )
        run = BenchRun(system=system, flat=flat, stats=stats)
        if not lift:
            return run

        run.factors = self.planted_factors(flat, seed)
        lift_start = time.perf_counter()
        try:
            run.repaired = rate_lift(system, flat, run.factors, config, budget)
        except RateLiftError as e:
            run.failure = e.report
            stats.part = e.report.batches[-1].part if e.report.batches else None
            stats.verified = False
            stats.lift_seconds = time.perf_counter() - lift_start
            logger.warning(f"{self.NAME} N={self.size} 速率提升失敗，已保留失敗報告")
            return run
        lifted = time.perf_counter()
        run.verification = verify_repair(flat, run.factors, run.repaired.system, budget=budget)
        verified = time.perf_counter()

        final = run.repaired.report.batches[0]
        solved = [a for a in final.attempts if a.outcome == "success"]
        if solved:
            stats.equations = solved[-1].equations
            stats.variables = len(solved[-1].variables)
        stats.part = final.part
        stats.verified = run.verification.passed
        stats.lift_seconds = lifted - lift_start
        stats.verify_seconds = verified - lifted
        return run


# 產生器註冊表
_BENCHMARK_REGISTRY: dict[str, type[BenchmarkGenerator]] = {}


def register_benchmark(name: str):
    """註冊產生器的裝飾器。

    Args:
        name: 子命令 ``bench <name>`` 使用的名稱。
    """

    def decorator(generator_class: type[BenchmarkGenerator]) -> type[BenchmarkGenerator]:
        _BENCHMARK_REGISTRY[name.lower()] = generator_class
        return generator_class

    return decorator


def get_benchmark(name: str) -> type[BenchmarkGenerator]:
    """取得指定名稱的產生器類別。

    Raises:
        ValueError: 當名稱不存在時。
    """
    name = name.lower()
    if name not in _BENCHMARK_REGISTRY:
        available = ", ".join(sorted(_BENCHMARK_REGISTRY))
        raise ValueError(f"未找到基準模型 '{name}'。可用的模型: {available}")
    return _BENCHMARK_REGISTRY[name]


def get_all_benchmarks() -> list[str]:
    """已註冊的產生器名稱（依字母排序）。

    Example:
        >>> get_all_benchmarks()
        ['polling']
    """
    return sorted(_BENCHMARK_REGISTRY)


__all__ = [
    "BenchStats",
    "BenchRun",
    "BenchmarkGenerator",
    "stats_frame",
    "register_benchmark",
    "get_benchmark",
    "get_all_benchmarks",
]
