"""TRYSYNC：把不同步 c 的節點 X 改為 ``||_c``，並在 X 底下補上必要的自迴圈。

改動必須維持平面轉移系統的定性關係，因此分三道檢查：

1. 第 A 類偽轉移：任一可達狀態下，X 的兩個子樹不能同時可執行 c。
2. 第 B 類偽轉移：逐一檢查 COMB(X, c) 的每個組合；新增的自迴圈在任一可達
   狀態下，都不能經由上方各層 ``||_c`` 節點的同步組成原本不存在的非自迴圈轉移。
3. 套用所有可行組合後重新平面化，狀態集合與轉移關係必須完全相同。
"""

from dataclasses import dataclass, field

from core.combinatorics import Combo, comb
from core.constants import PLACEHOLDER_SELFLOOP_RATE
from core.model import (
    ActionLabel,
    Composition,
    LocalState,
    LocalTransition,
    NodePath,
    SpaSystem,
)
from core.semantics import (
    FlatTS,
    GlobalState,
    TransitionKey,
    enabled_multitransitions,
    flatten,
    project,
)
from core.structure import participating_set
from core.utils import logger

NeededSelfloop = tuple[int, LocalState]


@dataclass(frozen=True)
class TrySyncOutcome:
    success: bool
    system: SpaSystem
    flat: FlatTS
    node: NodePath
    action: ActionLabel
    inserted: tuple[NeededSelfloop, ...] = ()
    feasible: tuple[Combo, ...] = ()
    reason: str = ""
    flipped: bool = field(default=False)


def _enables(
    sys: SpaSystem,
    state: GlobalState,
    node: NodePath,
    action: ActionLabel,
    cache: dict[GlobalState, bool],
) -> bool:
    key = project(state, sys, node)
    if key not in cache:
        cache[key] = any(
            a == action for a, _, _ in enabled_multitransitions(sys, state, node)
        )
    return cache[key]


def _type_a_conflict(
    sys: SpaSystem, flat: FlatTS, node: NodePath, action: ActionLabel
) -> GlobalState | None:
    """回傳兩側同時可執行 action 的第一個可達狀態；沒有則回傳 None。"""
    left_cache: dict[GlobalState, bool] = {}
    right_cache: dict[GlobalState, bool] = {}
    for state in flat.states:
        if _enables(sys, state, node + (0,), action, left_cache) and _enables(
            sys, state, node + (1,), action, right_cache
        ):
            return state
    return None


def _with_selfloops(
    sys: SpaSystem, needed: set[NeededSelfloop], action: ActionLabel
) -> SpaSystem:
    edited = sys
    by_process: dict[int, list[LocalState]] = {}
    for process, state in sorted(needed):
        by_process.setdefault(process, []).append(state)
    for process, states in by_process.items():
        leaf = edited.leaf_of(process)
        extra = tuple(
            LocalTransition(s, action, PLACEHOLDER_SELFLOOP_RATE, s) for s in states
        )
        edited = edited.with_process(process, leaf.with_transitions(leaf.transitions + extra))
    return edited


def _creates_spurious(
    candidate: SpaSystem,
    flat: FlatTS,
    relation: frozenset[TransitionKey],
    needed: set[NeededSelfloop],
    action: ActionLabel,
) -> TransitionKey | None:
    """新自迴圈若在可達狀態下組成原本不存在的非自迴圈轉移，回傳該轉移。"""
    new_contributions = {
        (process, LocalTransition(state, action, PLACEHOLDER_SELFLOOP_RATE, state))
        for process, state in needed
    }
    for state in flat.states:
        if not any(state[p] == s for p, s in needed):
            continue
        for a, derivation, target in enabled_multitransitions(candidate, state):
            if a != action or target == state:
                continue
            if new_contributions.isdisjoint(derivation.contributions):
                continue
            if (state, action, target) not in relation:
                return (state, action, target)
    return None


def trysync(
    sys: SpaSystem,
    flat: FlatTS,
    node: NodePath,
    action: ActionLabel,
    batch: list[TransitionKey],
    budget: int | None = None,
) -> TrySyncOutcome:
    """嘗試讓節點 X 同步 action。

    Args:
        sys: 目前的系統
        flat: sys 的平面轉移系統
        node: X 的路徑
        action: 動作 c
        batch: 目前處理中的 c 轉移 T_c
        budget: 重新平面化時的狀態上限

    Returns:
        TrySyncOutcome；失敗時 system 與 flat 維持原樣

    Raises:
        StateBudgetExceeded: 修改後重新平面化時超過 budget
    """
    current = sys.node_at(node)
    if not isinstance(current, Composition):
        return TrySyncOutcome(False, sys, flat, node, action, reason="葉節點無法改為同步")
    if action in current.sync:
        return TrySyncOutcome(True, sys, flat, node, action, reason="已同步")

    conflict = _type_a_conflict(sys, flat, node, action)
    if conflict is not None:
        logger.debug(f"節點 {node} 第 A 類衝突：狀態 {conflict} 兩側皆可執行 {action}")
        return TrySyncOutcome(
            False,
            sys,
            flat,
            node,
            action,
            reason=f"第 A 類偽轉移：狀態 {conflict} 下兩側皆可執行 {action}",
        )

    candidate = sys.with_sync(node, current.sync | {action})
    combinations = comb(candidate, node, action)
    lo, hi = sys.span(node)
    relevant = []
    for key in batch:
        t = flat.transition(key)
        ps = participating_set(sys, flat, t)
        if any(lo <= i < hi for i in ps):
            relevant.append((t, ps))

    relation = flat.relation()
    feasible: list[Combo] = []
    to_insert: set[NeededSelfloop] = set()
    for combo in combinations:
        needed = {
            (k, t.source[k])
            for t, ps in relevant
            for k in combo - ps
            if not candidate.leaf_of(k).has_selfloop(t.source[k], action)
        }
        trial = _with_selfloops(candidate, needed, action)
        spurious = _creates_spurious(trial, flat, relation, needed, action)
        if spurious is not None:
            logger.debug(f"組合 {sorted(combo)} 會產生第 B 類偽轉移 {spurious}")
            continue
        feasible.append(combo)
        to_insert |= needed

    if not feasible:
        return TrySyncOutcome(
            False, sys, flat, node, action, reason="所有組合都會產生第 B 類偽轉移"
        )

    edited = _with_selfloops(candidate, to_insert, action)
    edited_flat = flatten(edited, budget=budget)
    if edited_flat.state_set != flat.state_set or edited_flat.relation() != relation:
        logger.warning(
            f"節點 {node} 同步 {action} 後平面轉移關係改變，放棄此次修改"
        )
        return TrySyncOutcome(
            False, sys, flat, node, action, reason="修改後的平面轉移關係與原本不同"
        )

    logger.debug(
        f"節點 {node} 改為同步 {action}，新增 {len(to_insert)} 個自迴圈，"
        f"可行組合 {len(feasible)}/{len(combinations)}"
    )
    return TrySyncOutcome(
        True,
        edited,
        edited_flat,
        node,
        action,
        inserted=tuple(sorted(to_insert)),
        feasible=tuple(feasible),
        flipped=True,
    )


__all__ = ["NeededSelfloop", "TrySyncOutcome", "trysync"]
