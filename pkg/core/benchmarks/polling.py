"""循環輪詢（cyclic polling）基準模型。

一個伺服器依序輪詢 N 個工作站，工作站之間互不同步::

    Server ||{loop_ia, loop_ib, serve_i} (Station1 || Station2 || ... || StationN)

伺服器在 ``poll_i`` 時，若工作站 i 閒置（狀態 0）就以 loop_ia 跳到下一站，
若有工作（狀態 1）就以 loop_ib 進入 ``serve_i``，服務完成後再到下一站。
N = 6, 7, 8 時分別有 576 / 1344 / 3072 個狀態。
"""

import numpy as np

from core.constants import POLLING_GAMMA, POLLING_MU
from core.model import (
    Composition,
    Leaf,
    LocalTransition,
    ProcessNode,
    SequentialProcess,
    SpaSystem,
)

from .base import BenchmarkGenerator, register_benchmark

IDLE, BUSY = "0", "1"
# planted 速率的對數常態標準差
PLANTED_SIGMA = 0.5


def _skip(i: int) -> str:
    return f"loop{i}a"


def _take(i: int) -> str:
    return f"loop{i}b"


def _serve(i: int) -> str:
    return f"serve{i}"


def server_process(
    n: int, gamma: float = POLLING_GAMMA, mu: float = POLLING_MU
) -> SequentialProcess:
    states: list[str] = []
    transitions: list[LocalTransition] = []
    for i in range(1, n + 1):
        poll, serve, following = f"poll{i}", f"serve{i}", f"poll{i % n + 1}"
        states += [poll, serve]
        transitions += [
            LocalTransition(poll, _skip(i), gamma, following),
            LocalTransition(poll, _take(i), gamma, serve),
            LocalTransition(serve, _serve(i), mu, following),
        ]
    return SequentialProcess("Server", tuple(states), "poll1", tuple(transitions))


def station_process(i: int, n: int, mu: float = POLLING_MU) -> SequentialProcess:
    return SequentialProcess(
        f"Station{i}",
        (IDLE, BUSY),
        IDLE,
        (
            LocalTransition(IDLE, _skip(i), 1.0, IDLE),
            LocalTransition(IDLE, f"arrive{i}", mu / n, BUSY),
            LocalTransition(BUSY, _take(i), 1.0, BUSY),
            LocalTransition(BUSY, _serve(i), 1.0, IDLE),
        ),
    )


def _station_chain(
    stations: list[SequentialProcess], sync: frozenset[str]
) -> ProcessNode:
    node: ProcessNode = Leaf(stations[-1])
    for station in reversed(stations[:-1]):
        node = Composition(Leaf(station), node, sync)
    return node


def generate_polling(n: int) -> SpaSystem:
    """產生 N 站輪詢系統；工作站依 Station1 … StationN 向右巢狀組合。"""
    server_sync = frozenset(
        action for i in range(1, n + 1) for action in (_skip(i), _take(i), _serve(i))
    )
    stations = [station_process(i, n) for i in range(1, n + 1)]
    chain = _station_chain(stations, frozenset())
    return SpaSystem(Composition(Leaf(server_process(n)), chain, server_sync))


def generate_polling_synchronised(
    n: int, rng: np.random.Generator | None = None
) -> SpaSystem:
    """已修改結構的系統 Sys′：工作站之間全部同步 loop1a，Station2 … StationN 的
    每個狀態都有 loop1a 自迴圈。

    rng 不為 None 時，loop1a 的 (N−1)·2+2 個速率槽位以對數常態取樣重新設定。
    """
    action = _skip(1)

    def perturb(rate: float) -> float:
        return rate if rng is None else rate * float(np.exp(rng.normal(0.0, PLANTED_SIGMA)))

    server = server_process(n)
    server = server.with_transitions(
        tuple(
            LocalTransition(tr.source, tr.action, perturb(tr.rate), tr.target)
            if tr.action == action
            else tr
            for tr in server.transitions
        )
    )
    stations = []
    for i in range(1, n + 1):
        station = station_process(i, n)
        if i == 1:
            transitions = tuple(
                LocalTransition(tr.source, tr.action, perturb(tr.rate), tr.target)
                if tr.action == action
                else tr
                for tr in station.transitions
            )
        else:
            transitions = station.transitions + tuple(
                LocalTransition(state, action, perturb(1.0), state) for state in (IDLE, BUSY)
            )
        stations.append(station.with_transitions(transitions))

    root = generate_polling(n).root
    assert isinstance(root, Composition)
    chain = _station_chain(stations, frozenset({action}))
    return SpaSystem(Composition(Leaf(server), chain, root.sync))


@register_benchmark("polling")
class PollingBenchmark(BenchmarkGenerator):
    """N 站循環輪詢；修正係數加在 loop1a 轉移上。"""

    NAME = "polling"
    TRACKED_ACTION = _skip(1)
    MIN_SIZE = 2

    def build(self) -> SpaSystem:
        return generate_polling(self.size)

    def planted_system(self, rng: np.random.Generator) -> SpaSystem:
        return generate_polling_synchronised(self.size, rng)


__all__ = [
    "PollingBenchmark",
    "generate_polling",
    "generate_polling_synchronised",
    "server_process",
    "station_process",
]
