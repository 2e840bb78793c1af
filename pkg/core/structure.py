"""同步結構分析：a-scope、鄰域分類，以及平面轉移的 MS/SS/PS/IS/IS_r。

行程以葉索引（LNR 順序）表示，節點以 NodePath 表示。
"""

from dataclasses import dataclass
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        def __str__(self) -> str:
            return str(self.value)

from core.model import (
    ActionLabel,
    Composition,
    Leaf,
    NodePath,
    SpaSystem,
    StructureError,
    lowest_common_root,
)
from core.semantics import FlatTS, FlatTransition, enabled_multitransitions
from core.utils import logger


class NeighborhoodClass(StrEnum):
    CANNOT = "cannot"
    MAY = "may"
    MUST = "must"


@dataclass(frozen=True)
class TransitionSets:
    """一條平面轉移的各種行程集合（皆為葉索引）。"""

    moving: frozenset[int]
    stable: frozenset[int]
    participating: frozenset[int]
    involved: frozenset[int]
    involved_restricted: frozenset[int]
    involved_root: NodePath


def _synchronises(sys: SpaSystem, path: NodePath, action: ActionLabel) -> bool:
    node = sys.node_at(path)
    return isinstance(node, Composition) and action in node.sync


def a_scopes(sys: SpaSystem, action: ActionLabel) -> list[NodePath]:
    """所有 a-scope：上方沒有 ``||_a`` 的最大 ``||_a`` 子樹，以及路徑上沒有 a 同步的葉節點。

    Example:
        >>> a_scopes(five_leaf, "a")   # (P1 ||{a} P2) ||{b} (P3 ||{b} (P4 ||{a} P5))
        [(0,), (1, 0), (1, 1)]
    """
    scopes: list[NodePath] = []

    def walk(path: NodePath) -> None:
        node = sys.node_at(path)
        if isinstance(node, Leaf) or action in node.sync:
            scopes.append(path)
            return
        walk(path + (0,))
        walk(path + (1,))

    walk(())
    return scopes


def scope_of(sys: SpaSystem, leaf: int, action: ActionLabel) -> NodePath:
    """包含指定葉節點的 a-scope 根：最高的 ``||_a`` 祖先，沒有時為葉節點本身。"""
    path = sys.leaf_path(leaf)
    for depth in range(len(path)):
        if _synchronises(sys, path[:depth], action):
            return path[:depth]
    return path


def classify(
    sys: SpaSystem, process: int, action: ActionLabel, node: NodePath
) -> NeighborhoodClass:
    """把與行程 P 互斥的子樹 X 分類為 cannot / may / must 鄰居。

    r 為 P 與 X 的最低共同根：r 不同步 a 時為 cannot；r 同步 a 但 r 與 X 之間
    （不含兩端）有不同步 a 的節點時為 may；否則為 must。

    Args:
        sys: SPA 系統
        process: P 的葉索引
        action: 動作 a
        node: X 的路徑

    Raises:
        StructureError: 當 P 與 X 不互斥時
    """
    r = lowest_common_root(sys, sys.leaf_path(process), node)
    if not _synchronises(sys, r, action):
        return NeighborhoodClass.CANNOT
    for depth in range(len(r) + 1, len(node)):
        if not _synchronises(sys, node[:depth], action):
            return NeighborhoodClass.MAY
    return NeighborhoodClass.MUST


def moving_set(t: FlatTransition) -> frozenset[int]:
    return frozenset(i for i, (s, s2) in enumerate(zip(t.source, t.target)) if s != s2)


def stable_set(t: FlatTransition) -> frozenset[int]:
    return frozenset(i for i, (s, s2) in enumerate(zip(t.source, t.target)) if s == s2)


def _require_movers(t: FlatTransition) -> frozenset[int]:
    movers = moving_set(t)
    if not movers:
        error_msg = (
            f"轉移 {t.key} 是全域自迴圈，沒有移動的行程\n"
            f"建議：全域自迴圈不參與集合分析與速率提升"
        )
        logger.error(error_msg)
        raise StructureError(error_msg)
    return movers


def must_neighbours(
    sys: SpaSystem, t: FlatTransition, movers: frozenset[int] | None = None
) -> frozenset[int]:
    """穩定行程中，屬於某個移動行程 must 鄰域且不在任何移動行程 cannot 鄰域者。"""
    movers = _require_movers(t) if movers is None else movers
    result = set()
    for i in range(sys.size):
        if i in movers:
            continue
        classes = {classify(sys, j, t.action, sys.leaf_path(i)) for j in movers}
        if NeighborhoodClass.MUST in classes and NeighborhoodClass.CANNOT not in classes:
            result.add(i)
    return frozenset(result)


def _sibling_can_selfloop(
    sys: SpaSystem, t: FlatTransition, candidate_path: NodePath, r: NodePath
) -> bool:
    """檢查候選者到 r 之間每個 ``||_a`` 節點的另一側，在來源狀態下能否做 a 自迴圈。"""
    for depth in range(len(candidate_path) - 1, len(r), -1):
        ancestor = candidate_path[:depth]
        if not _synchronises(sys, ancestor, t.action):
            continue
        sibling = ancestor + (1 - candidate_path[depth],)
        enabled = any(
            action == t.action and target == t.source
            for action, _, target in enabled_multitransitions(sys, t.source, sibling)
        )
        if not enabled:
            return False
    return True


def participating_set(sys: SpaSystem, flat: FlatTS, t: FlatTransition) -> frozenset[int]:
    """參與集合 PS(t) = MS ∪ PS_may ∪ 移動行程的 must 鄰居。

    PS_cand：穩定、屬於某移動行程的 may 鄰域、不屬於任何移動行程的 cannot 鄰域，
    且在目前狀態有 a 自迴圈。PS_may 再要求候選者往上到 r（包含候選者與某移動
    行程的最小子樹之根）之間的每個 ``||_a`` 節點，另一側子系統在投影狀態下
    能執行 a 自迴圈；自迴圈是否「啟用」以實際推導判斷。

    Raises:
        StructureError: 當 t 是全域自迴圈時
    """
    flat.transition(t.key)
    movers = _require_movers(t)
    action = t.action
    participating = set(movers) | must_neighbours(sys, t, movers)

    for k in range(sys.size):
        if k in participating:
            continue
        if not sys.leaf_of(k).has_selfloop(t.source[k], action):
            continue
        k_path = sys.leaf_path(k)
        classes = {classify(sys, j, action, k_path) for j in movers}
        if NeighborhoodClass.CANNOT in classes or NeighborhoodClass.MAY not in classes:
            continue
        # r：候選者與移動行程的共同根中最深的一個
        r = max(
            (lowest_common_root(sys, k_path, sys.leaf_path(j)) for j in movers), key=len
        )
        if _sibling_can_selfloop(sys, t, k_path, r):
            participating.add(k)

    return frozenset(participating)


def covering_root(sys: SpaSystem, leaves: frozenset[int] | set[int]) -> NodePath:
    """包含所有指定葉節點的最小子樹之根。"""
    lo, hi = min(leaves), max(leaves)
    if lo == hi:
        return sys.leaf_path(lo)
    return lowest_common_root(sys, sys.leaf_path(lo), sys.leaf_path(hi))


def involved_set(
    sys: SpaSystem, flat: FlatTS, t: FlatTransition
) -> tuple[frozenset[int], frozenset[int], NodePath]:
    """涉入集合 IS(t)：PS(t) 在 may 鄰域關係下的最小不動點。

    Returns:
        (IS, IS_r, root)；IS_r 為 IS 中語法動作集合含 action(t) 的行程，
        root 為包含 IS 的最小子樹之根
    """
    involved = set(participating_set(sys, flat, t))
    worklist = list(involved)
    while worklist:
        j = worklist.pop()
        for k in range(sys.size):
            if k in involved:
                continue
            if classify(sys, j, t.action, sys.leaf_path(k)) is NeighborhoodClass.MAY:
                involved.add(k)
                worklist.append(k)

    restricted = frozenset(k for k in involved if t.action in sys.leaf_of(k).actions)
    return frozenset(involved), restricted, covering_root(sys, involved)


def transition_sets(sys: SpaSystem, flat: FlatTS, t: FlatTransition) -> TransitionSets:
    """一次計算 MS/SS/PS/IS/IS_r。"""
    involved, restricted, root = involved_set(sys, flat, t)
    return TransitionSets(
        moving=moving_set(t),
        stable=stable_set(t),
        participating=participating_set(sys, flat, t),
        involved=involved,
        involved_restricted=restricted,
        involved_root=root,
    )


__all__ = [
    "NeighborhoodClass",
    "TransitionSets",
    "a_scopes",
    "scope_of",
    "classify",
    "moving_set",
    "stable_set",
    "must_neighbours",
    "participating_set",
    "covering_root",
    "involved_set",
    "transition_sets",
]
