"""隨機過程代數（SPA）系統的不可變資料模型。

系統是一棵二元行程樹：內部節點為帶同步集合的平行組合 ``||_A``，
葉節點為循序行程。葉節點依中序（LNR）走訪排序，第 i 個葉節點的
區域狀態即全域狀態向量的第 i 個分量。

樹中節點以路徑（``NodePath``）定位：空 tuple 為根，0 代表左子樹、1 代表右子樹。
由於葉節點依 LNR 排序，任一節點底下的葉節點在索引上恰好是一段連續區間。
"""

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import regex

from core.utils import logger

ActionLabel = str
LocalState = str
NodePath = tuple[int, ...]

# 行程名稱、動作與區域狀態共用的識別字規則
IDENTIFIER_PATTERN = regex.compile(r"[\p{L}\p{N}_][\p{L}\p{N}_.']*")


class ModelError(ValueError):
    """模型物件不合法（缺少初始狀態、未宣告的狀態、非正速率等）。"""


class StructureError(ValueError):
    """行程樹結構查詢不合法（路徑不存在、節點彼此包含等）。"""


def _is_identifier(text: str) -> bool:
    return bool(text) and IDENTIFIER_PATTERN.fullmatch(text) is not None


def _raise_model_error(problem: str, suggestion: str) -> None:
    error_msg = f"{problem}\n建議：{suggestion}"
    logger.error(error_msg)
    raise ModelError(error_msg)


@dataclass(frozen=True)
class LocalTransition:
    """循序行程內的一條區域轉移 ``source -(action, rate)-> target``。"""

    source: LocalState
    action: ActionLabel
    rate: float
    target: LocalState

    @property
    def is_selfloop(self) -> bool:
        return self.source == self.target


@dataclass(frozen=True)
class SequentialProcess:
    """循序行程：有限狀態、一個初始狀態與一串區域轉移。

    相同 (source, action, target) 的轉移可以重複出現，表示區域多重轉移；
    它們在平面語意中各自形成一個推導。
    """

    name: str
    states: tuple[LocalState, ...]
    initial: LocalState
    transitions: tuple[LocalTransition, ...] = ()

    def __post_init__(self) -> None:
        if not _is_identifier(self.name):
            _raise_model_error(
                f"行程名稱不合法: {self.name!r}", "名稱須以字母、數字或底線開頭"
            )
        if not self.states:
            _raise_model_error(
                f"行程 {self.name} 沒有任何狀態", "至少需要宣告初始狀態"
            )
        if len(set(self.states)) != len(self.states):
            _raise_model_error(
                f"行程 {self.name} 的狀態清單有重複: {self.states}",
                "每個區域狀態只能宣告一次",
            )
        bad_states = [s for s in self.states if not _is_identifier(s)]
        if bad_states:
            _raise_model_error(
                f"行程 {self.name} 的狀態名稱不合法: {bad_states}",
                "狀態名稱只能包含字母、數字、底線、點與單引號",
            )
        if self.initial not in self.states:
            _raise_model_error(
                f"行程 {self.name} 的初始狀態 {self.initial!r} 未宣告",
                "請將初始狀態加入 states 清單",
            )

        declared = set(self.states)
        for tr in self.transitions:
            if tr.source not in declared or tr.target not in declared:
                _raise_model_error(
                    f"行程 {self.name} 的轉移 {tr.source} -{tr.action}-> {tr.target} "
                    f"使用了未宣告的狀態",
                    "請確認轉移兩端都列在 states 清單中",
                )
            if not _is_identifier(tr.action):
                _raise_model_error(
                    f"行程 {self.name} 的動作名稱不合法: {tr.action!r}",
                    "動作名稱須為非空識別字",
                )
            if not (math.isfinite(tr.rate) and tr.rate > 0):
                _raise_model_error(
                    f"行程 {self.name} 的轉移 {tr.source} -{tr.action}-> {tr.target} "
                    f"速率必須為正有限值，目前為 {tr.rate}",
                    "請修正速率",
                )

    @cached_property
    def actions(self) -> frozenset[ActionLabel]:
        """語法動作集合 Act(P)。"""
        return frozenset(tr.action for tr in self.transitions)

    @cached_property
    def _outgoing(self) -> dict[LocalState, tuple[LocalTransition, ...]]:
        index: dict[LocalState, list[LocalTransition]] = {s: [] for s in self.states}
        for tr in self.transitions:
            index[tr.source].append(tr)
        return {s: tuple(trs) for s, trs in index.items()}

    def outgoing(self, state: LocalState) -> tuple[LocalTransition, ...]:
        """回傳從指定狀態出發的區域轉移（依宣告順序）。"""
        return self._outgoing.get(state, ())

    def has_selfloop(self, state: LocalState, action: ActionLabel) -> bool:
        return any(
            tr.action == action and tr.is_selfloop for tr in self.outgoing(state)
        )

    def slot_entries(
        self, source: LocalState, action: ActionLabel, target: LocalState
    ) -> list[int]:
        """回傳符合 (source, action, target) 的轉移在 transitions 中的位置。"""
        return [
            i
            for i, tr in enumerate(self.transitions)
            if tr.source == source and tr.action == action and tr.target == target
        ]

    def slot_rate(
        self, source: LocalState, action: ActionLabel, target: LocalState
    ) -> float:
        """同一轉移槽位上所有平行轉移的速率總和；不存在時回傳 0。"""
        return sum(
            self.transitions[i].rate for i in self.slot_entries(source, action, target)
        )

    def with_transitions(
        self, transitions: tuple[LocalTransition, ...]
    ) -> "SequentialProcess":
        return replace(self, transitions=transitions)


@dataclass(frozen=True)
class Leaf:
    process: SequentialProcess


@dataclass(frozen=True)
class Composition:
    """平行組合節點 ``left ||_sync right``。"""

    left: "ProcessNode"
    right: "ProcessNode"
    sync: frozenset[ActionLabel] = frozenset()

    def synchronises(self, action: ActionLabel) -> bool:
        return action in self.sync


ProcessNode = Leaf | Composition


def _collect_leaves(node: ProcessNode) -> list[SequentialProcess]:
    if isinstance(node, Leaf):
        return [node.process]
    return _collect_leaves(node.left) + _collect_leaves(node.right)


@dataclass(frozen=True)
class SpaSystem:
    """SPA 系統：行程樹加上依 LNR 排序的葉節點清單。"""

    root: ProcessNode
    leaves: tuple[SequentialProcess, ...] = field(init=False)

    def __post_init__(self) -> None:
        leaves = tuple(_collect_leaves(self.root))
        names = [p.name for p in leaves]
        duplicates = sorted({n for n in names if names.count(n) > 1})
        if duplicates:
            _raise_model_error(
                f"系統中的行程名稱重複: {duplicates}",
                "每個葉節點都必須是不同名稱的循序行程",
            )
        object.__setattr__(self, "leaves", leaves)

    @property
    def size(self) -> int:
        return len(self.leaves)

    @property
    def initial_state(self) -> tuple[LocalState, ...]:
        return tuple(p.initial for p in self.leaves)

    @cached_property
    def _nodes(self) -> dict[NodePath, tuple[ProcessNode, int, int]]:
        """路徑 → (節點, 葉索引起點, 葉索引終點)，依後序排列。"""
        index: dict[NodePath, tuple[ProcessNode, int, int]] = {}

        def walk(node: ProcessNode, path: NodePath, lo: int) -> int:
            if isinstance(node, Leaf):
                index[path] = (node, lo, lo + 1)
                return lo + 1
            mid = walk(node.left, path + (0,), lo)
            hi = walk(node.right, path + (1,), mid)
            index[path] = (node, lo, hi)
            return hi

        walk(self.root, (), 0)
        return index

    @cached_property
    def _leaf_paths(self) -> tuple[NodePath, ...]:
        paths = sorted(
            (lo, path)
            for path, (node, lo, _) in self._nodes.items()
            if isinstance(node, Leaf)
        )
        return tuple(path for _, path in paths)

    def node_at(self, path: NodePath) -> ProcessNode:
        try:
            return self._nodes[path][0]
        except KeyError:
            error_msg = f"行程樹中不存在路徑 {path}\n建議：路徑由 0（左）/1（右）組成"
            logger.error(error_msg)
            raise StructureError(error_msg) from None

    def span(self, path: NodePath) -> tuple[int, int]:
        """節點底下葉節點的索引區間 [lo, hi)。"""
        self.node_at(path)
        _, lo, hi = self._nodes[path]
        return lo, hi

    def leaf_indices(self, path: NodePath) -> range:
        lo, hi = self.span(path)
        return range(lo, hi)

    def leaf_path(self, index: int) -> NodePath:
        return self._leaf_paths[index]

    def leaf_index(self, name: str) -> int:
        for i, process in enumerate(self.leaves):
            if process.name == name:
                return i
        error_msg = f"系統中沒有名為 {name} 的行程\n建議：可用的行程為 {[p.name for p in self.leaves]}"
        logger.error(error_msg)
        raise StructureError(error_msg)

    def paths(self) -> list[NodePath]:
        """所有節點路徑，依後序（子節點先於父節點）排列。"""
        return list(self._nodes)

    def inner_paths(self) -> list[NodePath]:
        return [p for p, (node, _, _) in self._nodes.items() if isinstance(node, Composition)]

    def leaf_of(self, index: int) -> SequentialProcess:
        return self.leaves[index]

    def with_sync(self, path: NodePath, sync: frozenset[ActionLabel]) -> "SpaSystem":
        """回傳把指定內部節點的同步集合換成 sync 的新系統。"""
        node = self.node_at(path)
        if not isinstance(node, Composition):
            error_msg = f"路徑 {path} 是葉節點，無法設定同步集合\n建議：請指定內部節點"
            logger.error(error_msg)
            raise StructureError(error_msg)
        return SpaSystem(_replace_at(self.root, path, replace(node, sync=sync)))

    def with_process(self, index: int, process: SequentialProcess) -> "SpaSystem":
        """回傳把第 index 個葉節點換成 process 的新系統。"""
        return SpaSystem(_replace_at(self.root, self.leaf_path(index), Leaf(process)))

    def subsystem(self, path: NodePath) -> "SpaSystem":
        """以指定節點為根的獨立子系統。"""
        return SpaSystem(self.node_at(path))


def _replace_at(node: ProcessNode, path: NodePath, new: ProcessNode) -> ProcessNode:
    if not path:
        return new
    assert isinstance(node, Composition)
    if path[0] == 0:
        return replace(node, left=_replace_at(node.left, path[1:], new))
    return replace(node, right=_replace_at(node.right, path[1:], new))


def inorder_leaves(sys: SpaSystem) -> list[SequentialProcess]:
    """依 LNR 順序回傳 P_1 … P_n。"""
    return list(sys.leaves)


def syntactic_actions(node: ProcessNode) -> frozenset[ActionLabel]:
    """語法動作集合 Act(X)：葉節點取其轉移上的動作，內部節點取子樹聯集。"""
    if isinstance(node, Leaf):
        return node.process.actions
    return syntactic_actions(node.left) | syntactic_actions(node.right)


def lowest_common_root(sys: SpaSystem, x: NodePath, y: NodePath) -> NodePath:
    """同時包含 x 與 y 的最小子樹之根。

    Args:
        sys: SPA 系統
        x: 第一個節點路徑
        y: 第二個節點路徑

    Returns:
        內部節點路徑 r，其一側子樹包含 x，另一側包含 y

    Raises:
        StructureError: 當 x 與 y 互相包含（不互斥）時
    """
    sys.node_at(x)
    sys.node_at(y)
    common: list[int] = []
    for a, b in zip(x, y):
        if a != b:
            return tuple(common)
        common.append(a)

    error_msg = (
        f"節點 {x} 與 {y} 並非互斥的子樹\n"
        f"建議：lowest_common_root 只接受互不包含的兩個節點"
    )
    logger.error(error_msg)
    raise StructureError(error_msg)


def is_ancestor(ancestor: NodePath, path: NodePath) -> bool:
    """ancestor 是否為 path 本身或其祖先。"""
    return path[: len(ancestor)] == ancestor


def format_path(path: NodePath) -> str:
    """節點路徑的文字表示：根為 ``/``，其餘如 ``/1/0``。"""
    return "/" + "/".join(str(step) for step in path)


def node_expression(node: ProcessNode) -> str:
    """把子樹寫成具體語法的運算式，例如 ``(P1 ||{a} P2)``。"""
    if isinstance(node, Leaf):
        return node.process.name
    actions = ", ".join(sorted(node.sync))
    return f"({node_expression(node.left)} ||{{{actions}}} {node_expression(node.right)})"


__all__ = [
    "ActionLabel",
    "LocalState",
    "NodePath",
    "IDENTIFIER_PATTERN",
    "ModelError",
    "StructureError",
    "LocalTransition",
    "SequentialProcess",
    "Leaf",
    "Composition",
    "ProcessNode",
    "SpaSystem",
    "inorder_leaves",
    "syntactic_actions",
    "lowest_common_root",
    "is_ancestor",
    "format_path",
    "node_expression",
]
