"""行程樹資料模型的單元測試。"""

import pytest

from core.model import (
    Composition,
    Leaf,
    LocalTransition,
    ModelError,
    SequentialProcess,
    SpaSystem,
    StructureError,
    format_path,
    inorder_leaves,
    is_ancestor,
    lowest_common_root,
    node_expression,
    syntactic_actions,
)


def _process(name: str, *transitions: LocalTransition) -> SequentialProcess:
    states = ["s0"]
    for tr in transitions:
        for state in (tr.source, tr.target):
            if state not in states:
                states.append(state)
    return SequentialProcess(name, tuple(states), "s0", transitions)


class TestSequentialProcess:
    """測試循序行程的驗證與槽位查詢。"""

    def test_rejects_non_positive_rate(self):
        with pytest.raises(ModelError, match="速率"):
            _process("P", LocalTransition("s0", "a", 0.0, "s1"))

    def test_rejects_undeclared_state(self):
        with pytest.raises(ModelError, match="未宣告"):
            SequentialProcess("P", ("s0",), "s0", (LocalTransition("s0", "a", 1.0, "s9"),))

    def test_rejects_missing_initial(self):
        with pytest.raises(ModelError):
            SequentialProcess("P", ("s0",), "s1")

    def test_parallel_transitions_share_slot(self):
        """同一 (source, action, target) 的平行轉移速率相加。"""
        p = _process(
            "P",
            LocalTransition("s0", "a", 1.5, "s1"),
            LocalTransition("s0", "a", 2.5, "s1"),
            LocalTransition("s0", "b", 7.0, "s1"),
        )

        assert p.slot_entries("s0", "a", "s1") == [0, 1]
        assert p.slot_rate("s0", "a", "s1") == 4.0
        assert p.slot_rate("s1", "a", "s0") == 0

    def test_selfloop_lookup(self):
        p = _process("P", LocalTransition("s0", "a", 1.0, "s0"))

        assert p.has_selfloop("s0", "a")
        assert not p.has_selfloop("s0", "b")
        assert p.actions == {"a"}


class TestSpaSystem:
    """測試節點路徑、葉索引與結構修改。"""

    def test_duplicate_process_names_rejected(self):
        p = _process("P")
        with pytest.raises(ModelError, match="重複"):
            SpaSystem(Composition(Leaf(p), Leaf(p)))

    def test_paths_are_post_order(self, five_leaf):
        paths = five_leaf.paths()

        assert paths[-1] == ()
        for path in paths:
            for depth in range(len(path)):
                # 祖先一定排在後面
                assert paths.index(path[:depth]) > paths.index(path)

    def test_leaf_order_and_spans(self, five_leaf):
        assert [p.name for p in five_leaf.leaves] == ["P1", "P2", "P3", "P4", "P5"]
        assert five_leaf.leaf_path(3) == (1, 1, 0)
        assert list(five_leaf.leaf_indices((1,))) == [2, 3, 4]
        assert five_leaf.span((0,)) == (0, 2)
        assert five_leaf.leaf_index("P5") == 4

    def test_unknown_path(self, five_leaf):
        with pytest.raises(StructureError):
            five_leaf.node_at((0, 0, 0))

    def test_with_sync_replaces_only_target_node(self, five_leaf):
        edited = five_leaf.with_sync((1, 1), frozenset({"a", "b"}))

        assert edited.node_at((1, 1)).sync == {"a", "b"}
        assert edited.node_at(()).sync == five_leaf.node_at(()).sync
        # 原系統不受影響
        assert five_leaf.node_at((1, 1)).sync == {"a"}

    def test_with_sync_on_leaf_fails(self, five_leaf):
        with pytest.raises(StructureError):
            five_leaf.with_sync((1, 0), frozenset({"a"}))

    def test_with_process(self, five_leaf):
        replacement = _process("P3", LocalTransition("s0", "b", 9.0, "s0"))
        edited = five_leaf.with_process(2, replacement)

        assert edited.leaf_of(2) is replacement
        assert edited.leaf_of(1) == five_leaf.leaf_of(1)

    def test_subsystem(self, five_leaf):
        sub = five_leaf.subsystem((1, 1))

        assert [p.name for p in sub.leaves] == ["P4", "P5"]
        assert sub.node_at(()).sync == {"a"}


class TestTreeHelpers:
    """測試最低共同根與其他路徑工具。"""

    def test_inorder_leaves(self, five_leaf):
        assert [p.name for p in inorder_leaves(five_leaf)] == ["P1", "P2", "P3", "P4", "P5"]

    def test_lowest_common_root(self, five_leaf):
        leaf = five_leaf.leaf_path

        assert lowest_common_root(five_leaf, leaf(0), leaf(1)) == (0,)
        assert lowest_common_root(five_leaf, leaf(0), leaf(4)) == ()
        assert lowest_common_root(five_leaf, leaf(3), leaf(4)) == (1, 1)
        assert lowest_common_root(five_leaf, leaf(2), (1, 1)) == (1,)

    def test_lowest_common_root_rejects_nested_nodes(self, five_leaf):
        with pytest.raises(StructureError):
            lowest_common_root(five_leaf, (1,), (1, 1, 0))

    def test_is_ancestor(self):
        assert is_ancestor((), (1, 0))
        assert is_ancestor((1,), (1, 0))
        assert is_ancestor((1, 0), (1, 0))
        assert not is_ancestor((0,), (1, 0))

    def test_format_path(self):
        assert format_path(()) == "/"
        assert format_path((1, 0)) == "/1/0"

    def test_node_expression(self, five_leaf):
        assert node_expression(five_leaf.node_at((0,))) == "(P1 ||{a} P2)"

    def test_syntactic_actions(self, nested_sync):
        assert syntactic_actions(nested_sync.root) == {"a"}
        assert syntactic_actions(nested_sync.node_at((1, 1, 1))) == frozenset()
