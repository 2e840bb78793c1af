"""參數化基準模型產生器"""

from .base import (
    BenchmarkGenerator,
    BenchRun,
    BenchStats,
    get_all_benchmarks,
    get_benchmark,
    register_benchmark,
    stats_frame,
)
from .polling import PollingBenchmark, generate_polling, generate_polling_synchronised

__all__ = [
    "BenchmarkGenerator",
    "BenchRun",
    "BenchStats",
    "get_all_benchmarks",
    "get_benchmark",
    "register_benchmark",
    "stats_frame",
    "PollingBenchmark",
    "generate_polling",
    "generate_polling_synchronised",
]
