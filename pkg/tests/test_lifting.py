"""速率提升、TRYSYNC 與修復驗證的測試。"""

import json

import pytest

from core.equations import SolverConfig
from core.export import export_report
from core.lifting import (
    PART_OUTCOMES,
    BatchReport,
    InsertedSelfloop,
    LiftContext,
    RateLiftError,
    SyncEdit,
    expected_rates,
    part_c,
    part_d,
    rate_lift,
    trysync,
    verify_repair,
)
from core.model import LocalTransition, ModelError, StructureError
from core.parser import format_key, parse_system, parse_transition_key
from core.semantics import StateBudgetExceeded, UnknownTransition, flatten

# X = (Q1 || Q2) || R 改為同步 c 時，{Q2, R} 的自迴圈會讓 P 在 u1 也能執行 c
SPURIOUS_MODEL = """
process P { initial p0; p0 -(c, 1)-> p1; p1 -(e, 1)-> p0; }
process Q1 { initial u0; u0 -(c, 1)-> u0; u0 -(g, 1)-> u1; u1 -(g, 1)-> u0; }
process Q2 { initial v0; }
process R { initial w0; }
system : P ||{c} ((Q1 || Q2) || R);
"""

# P 與 Q 在 c、e 上同步，R 只會切換狀態；兩條 c 轉移的方程式完全相同
ALIGNED_MODEL = """
process P { initial s0; s0 -(c, 1.0)-> s1; s1 -(e, 1.0)-> s0; }
process Q { initial q0; q0 -(c, 1.0)-> q1; q1 -(e, 1.0)-> q0; }
process R { initial r0; r0 -(g, 1.0)-> r1; r1 -(g, 1.0)-> r0; }
system : (P ||{c, e} Q) || R;
"""


def _key(text: str):
    return parse_transition_key(text)


def _attempts(batch) -> list[tuple[str, str]]:
    return [(a.part, a.outcome) for a in batch.attempts]


def _rates(sys) -> dict:
    return {t.key: t.rate for t in flatten(sys).visible_transitions}


class TestPartA:
    """單一行程涉入時直接縮放區域速率。"""

    def test_single_process(self, single_process):
        flat = flatten(single_process)
        key = _key("(s0) -a-> (s1)")

        repaired = rate_lift(single_process, flat, {key: 2.5})

        (batch,) = repaired.report.batches
        assert batch.part == "A"
        assert batch.outcome == "success"
        assert repaired.system.leaf_of(0).slot_rate("s0", "a", "s1") == 2.5
        assert repaired.report.success
        assert repaired.report.verification.passed

    def test_common_factor_handles_whole_batch(self, interleaved):
        flat = flatten(interleaved)
        tmod = {
            _key("(s0,q0) -a-> (s1,q0)"): 3.0,
            _key("(s0,q1) -a-> (s1,q1)"): 3.0,
        }

        repaired = rate_lift(interleaved, flat, tmod)

        (batch,) = repaired.report.batches
        assert batch.part == "A"
        assert batch.batch_size == 2
        assert repaired.system.leaf_of(0).slot_rate("s0", "a", "s1") == 3.0
        # 結構不變
        assert repaired.system.node_at(()).sync == frozenset()


class TestPartB:
    """同一涉入集合的轉移一起求解。"""

    def test_two_derivations(self, two_derivations):
        flat = flatten(two_derivations)
        (t,) = flat.transitions

        repaired = rate_lift(two_derivations, flat, {t.key: 2.0})

        (batch,) = repaired.report.batches
        assert _attempts(batch) == [("A", "failed"), ("B", "success")]
        assert batch.involved == ["P", "Q", "R"]
        assert _rates(repaired.system)[t.key] == pytest.approx(32.0, rel=1e-9)
        assert repaired.system.node_at((1,)).sync == frozenset()
        assert repaired.report.edits == ([], [])

    def test_identity_factor_keeps_system(self, two_derivations):
        flat = flatten(two_derivations)
        (t,) = flat.transitions

        repaired = rate_lift(two_derivations, flat, {t.key: 1.0})

        assert repaired.system == two_derivations

    def test_empty_modification(self, five_leaf):
        flat = flatten(five_leaf)

        repaired = rate_lift(five_leaf, flat, {})

        assert repaired.system == five_leaf
        assert repaired.report.batches == []
        assert repaired.report.success


class TestPartC:
    """在涉入範圍內改為同步並補上自迴圈。"""

    def test_stable_neighbour_joins_synchronisation(self, selfloop_combinations):
        flat = flatten(selfloop_combinations)
        first = _key("(p0,q0,r0,s0,t0,u0) -c-> (p1,q0,r0,s0,t0,u0)")
        second = _key("(p0,q1,r0,s0,t0,u0) -c-> (p1,q1,r0,s0,t0,u0)")

        repaired = rate_lift(
            selfloop_combinations, flat, {first: 2.0, second: 3.0}, SolverConfig(restarts=8)
        )

        (batch,) = repaired.report.batches
        assert _attempts(batch) == [("A", "failed"), ("B", "infeasible"), ("C", "success")]
        assert batch.attempts[1].verdict == "heuristic"
        assert "2 個節點無法同步" in batch.attempts[2].detail
        assert batch.sync_edits == [SyncEdit("/0/0", "c")]
        assert [(s.process, s.state) for s in batch.inserted_selfloops] == [
            ("Q", "q0"),
            ("Q", "q1"),
        ]
        assert repaired.system.node_at((0, 1)).sync == frozenset()
        assert repaired.system.node_at((1,)).sync == frozenset()

        rates = _rates(repaired.system)
        assert rates[first] == pytest.approx(8.0, rel=1e-9)
        assert rates[second] == pytest.approx(12.0, rel=1e-9)
        assert flatten(repaired.system).relation() == flat.relation()

    def test_not_applicable_when_every_involved_process_participates(self, two_derivations):
        flat = flatten(two_derivations)
        (t,) = flat.transitions
        ctx = LiftContext.create(two_derivations, flat, {t.key: 2.0})
        report = BatchReport(
            transition=format_key(t.key), action="a", involved=[], involved_restricted=[]
        )

        assert not part_c(ctx, t.key, frozenset({0, 1, 2}), report)

        assert _attempts(report) == [("C", "not_applicable")]
        assert report.notes
        assert ctx.system is two_derivations
        assert t.key in ctx.pending


class TestPartD:
    """往上擴大同步範圍。"""

    def test_root_synchronised_with_new_selfloops(self, interleaved):
        flat = flatten(interleaved)
        first, second = _key("(s0,q0) -a-> (s1,q0)"), _key("(s0,q1) -a-> (s1,q1)")

        repaired = rate_lift(interleaved, flat, {first: 2.0, second: 3.0})

        (batch,) = repaired.report.batches
        assert _attempts(batch) == [
            ("A", "failed"),
            ("B", "not_applicable"),
            ("C", "not_applicable"),
            ("D", "success"),
        ]
        assert batch.sync_edits == [SyncEdit("/", "a")]
        assert [(s.process, s.state, s.action) for s in batch.inserted_selfloops] == [
            ("Q", "q0", "a"),
            ("Q", "q1", "a"),
        ]
        assert all(s.rate is not None and s.rate > 0 for s in batch.inserted_selfloops)
        assert repaired.system.node_at(()).sync == {"a"}

        rates = _rates(repaired.system)
        assert rates[first] == pytest.approx(2.0, rel=1e-9)
        assert rates[second] == pytest.approx(3.0, rel=1e-9)
        assert flatten(repaired.system).relation() == flat.relation()

    def test_participating_equals_involved_goes_to_root(self):
        sys = parse_system(ALIGNED_MODEL)
        flat = flatten(sys)
        first = _key("(s0,q0,r0) -c-> (s1,q1,r0)")
        second = _key("(s0,q0,r1) -c-> (s1,q1,r1)")

        repaired = rate_lift(sys, flat, {first: 2.0, second: 3.0})

        (batch,) = repaired.report.batches
        assert _attempts(batch) == [
            ("A", "failed"),
            ("B", "infeasible"),
            ("C", "not_applicable"),
            ("D", "success"),
        ]
        assert batch.attempts[1].verdict == "exact"
        assert any("PS(t̂) = IS(t̂)" in note for note in batch.notes)
        assert batch.sync_edits == [SyncEdit("/", "c")]
        assert [(s.process, s.state) for s in batch.inserted_selfloops] == [
            ("R", "r0"),
            ("R", "r1"),
        ]

        rates = _rates(repaired.system)
        assert rates[first] == pytest.approx(2.0, rel=1e-9)
        assert rates[second] == pytest.approx(3.0, rel=1e-9)
        assert flatten(repaired.system).relation() == flat.relation()

    def test_starting_at_root_fails_immediately(self, interleaved):
        flat = flatten(interleaved)
        key = _key("(s0,q0) -a-> (s1,q0)")
        ctx = LiftContext.create(interleaved, flat, {key: 2.0})
        report = BatchReport(
            transition=format_key(key), action="a", involved=[], involved_restricted=[]
        )

        assert not part_d(ctx, key, (), report)

        assert report.attempts == []
        assert ctx.system is interleaved
        assert key in ctx.pending

    def test_conflict_up_to_root_fails(self, conflicting):
        flat = flatten(conflicting)
        tmod = {
            _key("(s0,q0) -a-> (s1,q0)"): 2.0,
            _key("(s0,q1) -a-> (s1,q1)"): 3.0,
        }

        with pytest.raises(RateLiftError) as excinfo:
            rate_lift(conflicting, flat, tmod)

        (batch,) = excinfo.value.report.batches
        assert batch.outcome == "failed"
        assert _attempts(batch)[-1] == ("D", "failed")
        assert "第 A 類" in batch.attempts[-1].detail
        assert excinfo.value.infeasible is None


class TestModificationValidation:
    """不合法的修正係數在開始提升前就被拒絕。"""

    def test_unknown_transition(self, interleaved):
        flat = flatten(interleaved)

        with pytest.raises(UnknownTransition):
            rate_lift(interleaved, flat, {_key("(s1,q0) -a-> (s0,q0)"): 2.0})

    def test_non_positive_factor(self, interleaved):
        flat = flatten(interleaved)

        with pytest.raises(ModelError):
            rate_lift(interleaved, flat, {_key("(s0,q0) -a-> (s1,q0)"): -1.0})

    def test_global_selfloop(self):
        sys = parse_system(
            "process P { initial s0; s0 -(a, 1)-> s0; s0 -(b, 1)-> s1; } system : P;"
        )

        with pytest.raises(StructureError):
            rate_lift(sys, flatten(sys), {(("s0",), "a", ("s0",)): 2.0})


class TestTrySync:
    """測試把節點改為同步時的三道檢查。"""

    def test_type_a_conflict(self, conflicting):
        flat = flatten(conflicting)
        batch = [t.key for t in flat.visible_transitions if t.action == "a"]

        outcome = trysync(conflicting, flat, (), "a", batch)

        assert not outcome.success
        assert outcome.reason.startswith("第 A 類")
        assert outcome.system is conflicting

    def test_type_b_combination_rejected(self):
        sys = parse_system(SPURIOUS_MODEL)
        flat = flatten(sys)
        batch = [t.key for t in flat.visible_transitions if t.action == "c"]
        assert len(batch) == 1

        outcome = trysync(sys, flat, (1,), "c", batch)

        assert outcome.success and outcome.flipped
        assert outcome.feasible == (frozenset({1, 3}),)
        assert outcome.inserted == ((3, "w0"),)
        assert outcome.system.node_at((1,)).sync == {"c"}
        assert outcome.system.leaf_of(2).transitions == ()
        assert outcome.flat.relation() == flat.relation()
        assert outcome.flat.state_set == flat.state_set

    def test_reflatten_respects_state_budget(self):
        sys = parse_system(SPURIOUS_MODEL)
        flat = flatten(sys)
        batch = [t.key for t in flat.visible_transitions if t.action == "c"]

        with pytest.raises(StateBudgetExceeded):
            trysync(sys, flat, (1,), "c", batch, budget=3)
        assert trysync(sys, flat, (1,), "c", batch, budget=4).success

    def test_leaf_cannot_be_synchronised(self, interleaved):
        flat = flatten(interleaved)

        outcome = trysync(interleaved, flat, (0,), "a", [])

        assert not outcome.success

    def test_already_synchronised_is_noop(self, five_leaf):
        flat = flatten(five_leaf)

        outcome = trysync(five_leaf, flat, (0,), "a", [])

        assert outcome.success
        assert not outcome.flipped
        assert outcome.system is five_leaf


class TestVerifyRepair:
    """測試修復結果的獨立驗證。"""

    def test_expected_rates(self, single_process):
        flat = flatten(single_process)

        expected = expected_rates(flat, {_key("(s0) -a-> (s1)"): 3.0})

        assert expected == {
            (("s0",), "a", ("s1",)): 3.0,
            (("s1",), "b", ("s0",)): 2.0,
        }

    def test_rate_mismatch_reported(self, single_process):
        flat = flatten(single_process)

        summary = verify_repair(flat, {_key("(s0) -a-> (s1)"): 3.0}, single_process)

        assert not summary.passed
        assert len(summary.problems) == 1
        assert summary.problems[0].startswith("速率不符")
        assert summary.max_relative_error == pytest.approx(2.0 / 3.0)

    def test_extra_transition_reported(self, single_process):
        flat = flatten(single_process)
        leaf = single_process.leaf_of(0)
        extra = leaf.with_transitions(
            leaf.transitions + (LocalTransition("s0", "c", 1.0, "s1"),)
        )

        summary = verify_repair(flat, {}, single_process.with_process(0, extra))

        assert summary.problems == ["多出轉移 (s0) -c-> (s1)"]

    def test_identity_passes(self, five_leaf):
        flat = flatten(five_leaf)

        assert verify_repair(flat, {}, five_leaf).passed


def test_report_is_json(interleaved):
    flat = flatten(interleaved)
    tmod = {_key("(s0,q0) -a-> (s1,q0)"): 2.0, _key("(s0,q1) -a-> (s1,q1)"): 3.0}

    repaired = rate_lift(interleaved, flat, tmod)
    payload = json.loads(export_report(repaired.report))

    assert payload["schema"] == 1
    assert payload["success"] is True
    assert payload["modified_transitions"] == 2
    assert payload["batches"][0]["part"] == "D"
    assert payload["batches"][0]["inserted_selfloops"][0]["process"] == "Q"
    assert isinstance(repaired.report.edits[1][0], InsertedSelfloop)


def test_attempt_outcomes_are_known(interleaved, two_derivations, conflicting):
    reports = [
        rate_lift(
            interleaved,
            flatten(interleaved),
            {_key("(s0,q0) -a-> (s1,q0)"): 2.0, _key("(s0,q1) -a-> (s1,q1)"): 3.0},
        ).report
    ]
    (t,) = flatten(two_derivations).transitions
    reports.append(rate_lift(two_derivations, flatten(two_derivations), {t.key: 2.0}).report)
    with pytest.raises(RateLiftError) as excinfo:
        rate_lift(
            conflicting,
            flatten(conflicting),
            {_key("(s0,q0) -a-> (s1,q0)"): 2.0, _key("(s0,q1) -a-> (s1,q1)"): 3.0},
        )
    reports.append(excinfo.value.report)

    outcomes = {a.outcome for r in reports for b in r.batches for a in b.attempts}
    assert outcomes <= set(PART_OUTCOMES)
    assert "skipped" not in outcomes
