"""SPA 系統的平面 CTMC 語意。

先在行程樹上遞迴產生多重轉移（每個推導保留其貢獻的區域轉移），
再把 (source, action, target) 相同的推導合併為一條平面轉移，速率相加。
同步時速率相乘。
"""

from collections import deque
from dataclasses import dataclass
from functools import cached_property

from tqdm import tqdm

from core.model import (
    ActionLabel,
    Composition,
    Leaf,
    LocalState,
    LocalTransition,
    NodePath,
    SpaSystem,
)
from core.utils import logger, resolve_state_budget

GlobalState = tuple[LocalState, ...]
TransitionKey = tuple[GlobalState, ActionLabel, GlobalState]
Contribution = tuple[int, LocalTransition]


class StateBudgetExceeded(RuntimeError):
    """可達狀態數超過設定上限。"""


class UnknownTransition(KeyError):
    """查詢的轉移不在平面轉移系統中。"""


@dataclass(frozen=True)
class Derivation:
    """一個推導：參與的葉節點區域轉移（依葉索引排序）及其速率乘積。"""

    contributions: tuple[Contribution, ...]
    rate: float

    @property
    def participants(self) -> frozenset[int]:
        return frozenset(i for i, _ in self.contributions)

    def selfloop_contributors(self) -> frozenset[int]:
        return frozenset(i for i, tr in self.contributions if tr.is_selfloop)


@dataclass(frozen=True)
class FlatTransition:
    source: GlobalState
    action: ActionLabel
    target: GlobalState
    rate: float
    derivations: tuple[Derivation, ...]

    @property
    def key(self) -> TransitionKey:
        return (self.source, self.action, self.target)

    @property
    def is_global_selfloop(self) -> bool:
        return self.source == self.target


@dataclass(frozen=True)
class FlatTS:
    """可達的平面轉移系統；states 依廣度優先的發現順序排列。"""

    initial: GlobalState
    states: tuple[GlobalState, ...]
    transitions: tuple[FlatTransition, ...]

    @cached_property
    def index(self) -> dict[TransitionKey, FlatTransition]:
        return {t.key: t for t in self.transitions}

    @cached_property
    def state_set(self) -> frozenset[GlobalState]:
        return frozenset(self.states)

    @property
    def visible_transitions(self) -> tuple[FlatTransition, ...]:
        """排除全域自迴圈後的轉移，即 CTMC 真正的轉移。"""
        return tuple(t for t in self.transitions if not t.is_global_selfloop)

    def relation(self) -> frozenset[TransitionKey]:
        """定性轉移關係：所有非全域自迴圈轉移的 (source, action, target)。"""
        return frozenset(t.key for t in self.visible_transitions)

    def transition(self, key: TransitionKey) -> FlatTransition:
        try:
            return self.index[key]
        except KeyError:
            error_msg = f"平面轉移系統中沒有轉移 {key}\n建議：請確認狀態向量與動作名稱"
            logger.error(error_msg)
            raise UnknownTransition(error_msg) from None


def _node_moves(
    node: Leaf | Composition, lo: int, state: GlobalState
) -> tuple[dict[ActionLabel, list[tuple[Contribution, ...]]], int]:
    """回傳子樹在 state 下的多重轉移（依動作分組）與子樹的葉索引終點。"""
    if isinstance(node, Leaf):
        moves: dict[ActionLabel, list[tuple[Contribution, ...]]] = {}
        for tr in node.process.outgoing(state[lo]):
            moves.setdefault(tr.action, []).append(((lo, tr),))
        return moves, lo + 1

    left, mid = _node_moves(node.left, lo, state)
    right, hi = _node_moves(node.right, mid, state)
    combined: dict[ActionLabel, list[tuple[Contribution, ...]]] = {}
    for action in list(left) + [a for a in right if a not in left]:
        if action in node.sync:
            pairs = [
                lc + rc for lc in left.get(action, []) for rc in right.get(action, [])
            ]
            if pairs:
                combined[action] = pairs
        else:
            combined[action] = left.get(action, []) + right.get(action, [])
    return combined, hi


def _apply(state: GlobalState, contributions: tuple[Contribution, ...]) -> GlobalState:
    target = list(state)
    for i, tr in contributions:
        target[i] = tr.target
    return tuple(target)


def _derivation(contributions: tuple[Contribution, ...]) -> Derivation:
    rate = 1.0
    for _, tr in contributions:
        rate *= tr.rate
    return Derivation(contributions, rate)


def enabled_multitransitions(
    sys: SpaSystem, s: GlobalState, node: NodePath = ()
) -> list[tuple[ActionLabel, Derivation, GlobalState]]:
    """列出在全域狀態 s 下，指定子樹（預設為整個系統）可執行的多重轉移。

    子樹之外的分量保持不變。葉節點取其目前狀態的區域轉移；內部節點 ``||_A``
    對 A 中的動作取左右兩側的配對組合（速率相乘），其餘動作兩側各自交錯。

    Args:
        sys: SPA 系統
        s: 全域狀態（長度為 sys.size）
        node: 子樹路徑

    Returns:
        (動作, 推導, 目標全域狀態) 的清單，順序固定
    """
    lo, _ = sys.span(node)
    moves, _ = _node_moves(sys.node_at(node), lo, s)
    return [
        (action, _derivation(contribs), _apply(s, contribs))
        for action, options in moves.items()
        for contribs in options
    ]


def flatten(
    sys: SpaSystem, budget: int | None = None, show_progress: bool = False
) -> FlatTS:
    """以廣度優先搜尋產生可達的平面轉移系統。

    同一來源狀態的後繼依 (action, target) 字典序排列；相同 (source, action, target)
    的推導合併為一條轉移，速率為各推導速率之和，推導清單保留。
    全域自迴圈（所有貢獻皆為自迴圈）也保留，並以 is_global_selfloop 標示。

    Args:
        sys: SPA 系統
        budget: 狀態數上限；None 時讀取 SPALIFT_STATE_BUDGET 或預設值
        show_progress: 是否顯示 tqdm 進度條

    Returns:
        FlatTS

    Raises:
        StateBudgetExceeded: 可達狀態數超過上限時
    """
    limit = resolve_state_budget(budget)
    initial = sys.initial_state
    seen: set[GlobalState] = {initial}
    order: list[GlobalState] = [initial]
    transitions: list[FlatTransition] = []
    queue: deque[GlobalState] = deque([initial])

    with tqdm(
        desc="探索狀態空間", unit="state", disable=not show_progress, leave=False
    ) as progress:
        while queue:
            state = queue.popleft()
            progress.update(1)

            grouped: dict[tuple[ActionLabel, GlobalState], list[Derivation]] = {}
            for action, derivation, target in enabled_multitransitions(sys, state):
                grouped.setdefault((action, target), []).append(derivation)

            for action, target in sorted(grouped):
                derivations = tuple(grouped[(action, target)])
                transitions.append(
                    FlatTransition(
                        source=state,
                        action=action,
                        target=target,
                        rate=sum(d.rate for d in derivations),
                        derivations=derivations,
                    )
                )
                if target not in seen:
                    if len(seen) >= limit:
                        error_msg = (
                            f"可達狀態數超過上限 {limit}\n"
                            f"建議：調整環境變數 SPALIFT_STATE_BUDGET 或縮小模型"
                        )
                        logger.error(error_msg)
                        raise StateBudgetExceeded(error_msg)
                    seen.add(target)
                    order.append(target)
                    queue.append(target)

    logger.debug(f"平面化完成：{len(order)} 個狀態，{len(transitions)} 條轉移")
    return FlatTS(initial=initial, states=tuple(order), transitions=tuple(transitions))


def performable_actions(
    sys: SpaSystem, node: NodePath, budget: int | None = None
) -> frozenset[ActionLabel]:
    """Act_perf(X)：子樹單獨執行時，可達轉移上實際出現的動作。"""
    flat = flatten(sys.subsystem(node), budget=budget)
    return frozenset(t.action for t in flat.transitions)


def derivations_of(flat: FlatTS, t: FlatTransition) -> tuple[Derivation, ...]:
    """回傳平面轉移保留的推導清單。

    Raises:
        UnknownTransition: 當 t 不在 flat 中時
    """
    return flat.transition(t.key).derivations


def project(state: GlobalState, sys: SpaSystem, node: NodePath) -> GlobalState:
    """全域狀態在子樹上的投影。"""
    lo, hi = sys.span(node)
    return state[lo:hi]


__all__ = [
    "GlobalState",
    "TransitionKey",
    "Contribution",
    "StateBudgetExceeded",
    "UnknownTransition",
    "Derivation",
    "FlatTransition",
    "FlatTS",
    "enabled_multitransitions",
    "flatten",
    "performable_actions",
    "derivations_of",
    "project",
]
