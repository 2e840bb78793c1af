"""相關自迴圈組合（RSLC）與參與者組合（COMB）。

兩者都在行程樹上遞迴：``||_c`` 節點取左右結果的兩兩聯集，
``||_¬c`` 節點取左右結果的聯集。
"""

from dataclasses import dataclass
from itertools import product

from core.model import ActionLabel, Composition, Leaf, NodePath, SpaSystem
from core.semantics import FlatTS, FlatTransition
from core.structure import (
    covering_root,
    moving_set,
    must_neighbours,
    participating_set,
)

Combo = frozenset[int]


def _canonical(combos: set[Combo]) -> tuple[Combo, ...]:
    return tuple(sorted(combos, key=lambda c: (len(c), sorted(c))))


@dataclass(frozen=True)
class CombinationSet:
    """一組葉索引集合，依 (大小, 排序後的索引) 排列。"""

    combos: tuple[Combo, ...]

    @classmethod
    def of(cls, combos: set[Combo]) -> "CombinationSet":
        return cls(_canonical(combos))

    def as_sets(self) -> set[Combo]:
        return set(self.combos)

    def __len__(self) -> int:
        return len(self.combos)

    def __iter__(self):
        return iter(self.combos)


def _pairwise_unions(left: set[Combo], right: set[Combo]) -> set[Combo]:
    return {a | b for a, b in product(left, right)}


def rslc(
    sys: SpaSystem, flat: FlatTS, t: FlatTransition, node: NodePath | None = None
) -> CombinationSet:
    """計算轉移 t 的相關自迴圈組合。

    葉節點在 (PS ∩ SS) 去掉移動行程的 must 鄰居後若仍在集合中，回傳 {{P}}，
    否則回傳 {∅}。遞迴時同時記錄子樹能否「不參與」這個動作：沒有移動行程、
    且本身沒有該動作自迴圈的穩定葉節點只能缺席，``||_c`` 節點要求兩側都參與，
    ``||_¬c`` 節點只允許一側參與、另一側缺席。如此得到的組合恰好對應
    平面轉移實際保留的推導。

    Args:
        sys: SPA 系統
        flat: 平面轉移系統
        t: 非全域自迴圈的平面轉移
        node: 起始節點；None 時取包含 PS(t) 的最小子樹之根

    Returns:
        CombinationSet；自迴圈都不相關時為 {∅}
    """
    movers = moving_set(t)
    ps = participating_set(sys, flat, t)
    relevant = (ps - movers) - must_neighbours(sys, t, movers)
    start = covering_root(sys, ps) if node is None else node

    def walk(path: NodePath) -> tuple[set[Combo], bool]:
        current = sys.node_at(path)
        if isinstance(current, Leaf):
            (index,) = sys.leaf_indices(path)
            if index in movers:
                return {frozenset()}, False
            if not current.process.has_selfloop(t.source[index], t.action):
                return set(), True
            return ({frozenset({index})} if index in relevant else {frozenset()}), True

        left, left_absent = walk(path + (0,))
        right, right_absent = walk(path + (1,))
        if t.action in current.sync:
            return _pairwise_unions(left, right), left_absent and right_absent
        parts: set[Combo] = set()
        if right_absent:
            parts |= left
        if left_absent:
            parts |= right
        return parts, left_absent and right_absent

    combos, _ = walk(start)
    return CombinationSet.of(combos)


def comb(sys: SpaSystem, node: NodePath, action: ActionLabel) -> CombinationSet:
    """子樹 X 底下對動作 c 的所有參與者組合。

    葉節點為 {{P}}；``||_c`` 取兩兩聯集；``||_¬c`` 取聯集。

    Example:
        >>> comb(sys, path_of("P ||{} Q"), "c")   # {{P}, {Q}}
    """
    current = sys.node_at(node)
    if isinstance(current, Leaf):
        (index,) = sys.leaf_indices(node)
        return CombinationSet.of({frozenset({index})})

    assert isinstance(current, Composition)
    left = comb(sys, node + (0,), action).as_sets()
    right = comb(sys, node + (1,), action).as_sets()
    if action in current.sync:
        return CombinationSet.of(_pairwise_unions(left, right))
    return CombinationSet.of(left | right)


__all__ = ["Combo", "CombinationSet", "rslc", "comb"]
