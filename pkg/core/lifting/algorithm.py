"""速率提升主演算法。

輸入為原系統、其平面轉移系統與修正係數 T_mod。每輪取出 T_mod 中最小的
轉移 t̂，計算 IS(t̂)：

- ``|IS| = 1``：Part A，若所有同一區域移動的轉移有共同係數，直接縮放該區域速率。
- 否則 Part B：對 IS(t) = IS(t̂) 的所有 c 轉移建立方程組並求解。
- Part B 無解且 PS(t̂) ≠ IS(t̂)：Part C，把 c-scope 內所有 ``||_¬c`` 節點改為
  同步 c（TRYSYNC），補上自迴圈後重新求解。
- 仍無解：Part D，把目前的根往上移，每層嘗試 TRYSYNC 擴大 c-scope 後重跑
  Part B/C 的流程，直到整棵樹的根為止。

方程式右側一律是目標速率（原速率 × 係數），因此已處理的轉移不必再記錄係數。
"""

import math
from dataclasses import dataclass, field, replace

from core.combinatorics import rslc
from core.equations import (
    Equation,
    EquationSystem,
    Infeasible,
    RateVariable,
    Solution,
    SolverConfig,
    build_equation,
    build_system,
    solve,
)
from core.lifting.report import (
    BatchReport,
    InsertedSelfloop,
    LiftReport,
    PartAttempt,
    SyncEdit,
)
from core.lifting.trysync import trysync
from core.lifting.verify import expected_rates, verify_repair
from core.model import (
    ActionLabel,
    Composition,
    LocalState,
    LocalTransition,
    ModelError,
    NodePath,
    SpaSystem,
    StructureError,
    format_path,
)
from core.parser import ModificationMap, format_key
from core.semantics import FlatTS, TransitionKey, flatten
from core.structure import (
    covering_root,
    involved_set,
    moving_set,
    participating_set,
)
from core.utils import logger

# Part A 判斷「共同係數」時的相對容忍度
COMMON_FACTOR_REL_TOL = 1e-12


class RateLiftError(RuntimeError):
    """Part D 走到根仍無解。report 為到失敗為止的報告，infeasible 為最後一次無解判定。"""

    def __init__(self, message: str, report: LiftReport, infeasible: Infeasible | None):
        super().__init__(message)
        self.report = report
        self.infeasible = infeasible


@dataclass(frozen=True)
class RepairedSystem:
    system: SpaSystem
    report: LiftReport


@dataclass
class _Working:
    """一次嘗試中的暫存系統；成功時才提交回 LiftContext。"""

    system: SpaSystem
    flat: FlatTS
    syncs: list[tuple[NodePath, ActionLabel]] = field(default_factory=list)
    loops: list[tuple[int, LocalState, ActionLabel]] = field(default_factory=list)
    budget: int | None = None


@dataclass
class LiftContext:
    """提升過程的可變狀態。pending 即 T_mod 中尚未處理的轉移。"""

    system: SpaSystem
    flat: FlatTS
    pending: dict[TransitionKey, float]
    targets: dict[TransitionKey, float]
    config: SolverConfig = field(default_factory=SolverConfig)
    budget: int | None = None
    last_infeasible: Infeasible | None = None

    @classmethod
    def create(
        cls,
        sys: SpaSystem,
        flat: FlatTS,
        tmod: ModificationMap,
        config: SolverConfig | None = None,
        budget: int | None = None,
    ) -> "LiftContext":
        return cls(
            system=sys,
            flat=flat,
            pending=dict(tmod),
            targets=expected_rates(flat, tmod),
            config=config or SolverConfig(),
            budget=budget,
        )

    def working(self) -> _Working:
        return _Working(self.system, self.flat, budget=self.budget)

    def commit(
        self, work: _Working, solved: SpaSystem, keys: list[TransitionKey], report: BatchReport
    ) -> None:
        """提交一次成功的嘗試：更新系統、記錄修改並把這批轉移移出 T_mod。"""
        keys = list(dict.fromkeys(keys))
        self.system = solved
        self.flat = flatten(solved, budget=self.budget)
        for path, action in work.syncs:
            report.sync_edits.append(SyncEdit(format_path(path), action))
        for process, state, action in work.loops:
            report.inserted_selfloops.append(
                InsertedSelfloop(solved.leaf_of(process).name, state, action)
            )
        for key in keys:
            self.pending.pop(key, None)
        report.batch_size = len(keys)


def _check_modifications(flat: FlatTS, tmod: ModificationMap) -> None:
    for key, factor in tmod.items():
        t = flat.transition(key)
        if t.is_global_selfloop:
            error_msg = (
                f"轉移 {format_key(key)} 是全域自迴圈，不能指定修正係數\n"
                f"建議：請從係數中移除此轉移"
            )
            logger.error(error_msg)
            raise StructureError(error_msg)
        if not (math.isfinite(factor) and factor > 0):
            error_msg = (
                f"轉移 {format_key(key)} 的係數必須為正數，目前為 {factor}\n"
                f"建議：修正係數是乘在原速率上的正實數"
            )
            logger.error(error_msg)
            raise ModelError(error_msg)


def _leaf_names(sys: SpaSystem, leaves: frozenset[int]) -> list[str]:
    return [sys.leaf_of(i).name for i in sorted(leaves)]


def _build_equations(
    ctx: LiftContext, work: _Working, keys: list[TransitionKey]
) -> EquationSystem:
    equations: list[Equation] = []
    for key in keys:
        t = work.flat.transition(key)
        eq = build_equation(
            work.system,
            work.flat,
            t,
            participating_set(work.system, work.flat, t),
            moving_set(t),
            rslc(work.system, work.flat, t),
        )
        equations.append(replace(eq, rhs=ctx.targets[key]))
    return build_system(work.system, equations)


def _apply_assignment(
    sys: SpaSystem, assignment: dict[RateVariable, float]
) -> SpaSystem:
    """把解寫回區域轉移。同一槽位有多筆平行轉移時依原比例分配。"""
    by_process: dict[int, list[tuple[RateVariable, float]]] = {}
    for variable, value in assignment.items():
        by_process.setdefault(variable.process, []).append((variable, value))

    edited = sys
    for process, values in sorted(by_process.items()):
        leaf = edited.leaf_of(process)
        transitions = list(leaf.transitions)
        for variable, value in values:
            entries = leaf.slot_entries(variable.source, variable.action, variable.target)
            if not entries:
                transitions.append(
                    LocalTransition(variable.source, variable.action, value, variable.target)
                )
                continue
            if len(entries) == 1:
                (i,) = entries
                transitions[i] = replace(transitions[i], rate=value)
                continue
            scale = value / sum(leaf.transitions[i].rate for i in entries)
            for i in entries:
                transitions[i] = replace(transitions[i], rate=transitions[i].rate * scale)
        edited = edited.with_process(process, leaf.with_transitions(tuple(transitions)))
    return edited


def _solve_and_record(
    ctx: LiftContext,
    work: _Working,
    keys: list[TransitionKey],
    part: str,
    scope: NodePath,
    report: BatchReport,
) -> SpaSystem | None:
    """建立並求解方程組，記錄一次嘗試；成功時回傳套用解之後的系統。"""
    system = _build_equations(ctx, work, keys)
    outcome = solve(system, ctx.config)
    attempt = PartAttempt(
        part=part,
        outcome="success" if isinstance(outcome, Solution) else "infeasible",
        scope=format_path(scope),
        equations=len(system.equations),
        variables=[v.describe(work.system) for v in system.variables],
    )
    if isinstance(outcome, Solution):
        attempt.max_residual = outcome.max_residual
        attempt.verdict = "heuristic" if outcome.method == "numeric" else "exact"
        attempt.detail = f"求解方式 {outcome.method}"
    else:
        attempt.max_residual = outcome.best_residual
        attempt.verdict = "exact" if outcome.exact else "heuristic"
        attempt.detail = outcome.message
        ctx.last_infeasible = outcome
    report.record(attempt)
    logger.info(
        f"Part {part}：{attempt.equations} 條方程式，{len(attempt.variables)} 個變數，"
        f"結果 {attempt.outcome}"
    )

    if not isinstance(outcome, Solution):
        return None
    return _apply_assignment(work.system, outcome.assignment)


def _flip(
    work: _Working, node: NodePath, action: ActionLabel, keys: list[TransitionKey]
) -> tuple[bool, str]:
    outcome = trysync(work.system, work.flat, node, action, keys, budget=work.budget)
    if outcome.success and outcome.flipped:
        work.system = outcome.system
        work.flat = outcome.flat
        work.syncs.append((node, action))
        work.loops.extend((process, state, action) for process, state in outcome.inserted)
    return outcome.success, outcome.reason


def _synchronise_scope(
    work: _Working, scope: NodePath, action: ActionLabel, keys: list[TransitionKey]
) -> list[str]:
    """由下而上對 scope 底下每個 ``||_¬c`` 節點呼叫 TRYSYNC，回傳失敗原因。"""
    failures = []
    for path in work.system.paths():
        if path[: len(scope)] != scope:
            continue
        node = work.system.node_at(path)
        if not isinstance(node, Composition) or action in node.sync:
            continue
        ok, reason = _flip(work, path, action, keys)
        if not ok:
            failures.append(f"{format_path(path)}：{reason}")
    return failures


def _c_transitions(flat: FlatTS, action: ActionLabel) -> list[TransitionKey]:
    return [t.key for t in flat.visible_transitions if t.action == action]


def local_repair(ctx: LiftContext, key: TransitionKey, report: BatchReport) -> bool:
    """Part A：IS(t̂) 只有一個行程 P 時，檢查所有同一區域移動的轉移是否有共同係數。"""
    t_hat = ctx.flat.transition(key)
    (process,) = moving_set(t_hat)
    source, target = t_hat.source[process], t_hat.target[process]
    batch = [
        t
        for t in ctx.flat.visible_transitions
        if t.action == t_hat.action
        and t.source[process] == source
        and t.target[process] == target
        and moving_set(t) == {process}
    ]
    factors = [ctx.targets[t.key] / t.rate for t in batch]
    common = factors[0]
    attempt = PartAttempt(
        part="A",
        outcome="success",
        scope=format_path(ctx.system.leaf_path(process)),
        equations=len(batch),
        variables=[
            RateVariable(process, source, target, t_hat.action).describe(ctx.system)
        ],
    )
    if not all(math.isclose(f, common, rel_tol=COMMON_FACTOR_REL_TOL) for f in factors):
        attempt.outcome = "failed"
        attempt.detail = f"{len(batch)} 條轉移沒有共同係數（範圍 {min(factors):.6g}–{max(factors):.6g}）"
        report.record(attempt)
        logger.info(f"Part A 失敗：{attempt.detail}")
        return False

    leaf = ctx.system.leaf_of(process)
    transitions = list(leaf.transitions)
    for i in leaf.slot_entries(source, t_hat.action, target):
        transitions[i] = replace(transitions[i], rate=transitions[i].rate * common)
    solved = ctx.system.with_process(process, leaf.with_transitions(tuple(transitions)))

    attempt.detail = f"共同係數 {common:.17g}"
    attempt.max_residual = max(abs(f / common - 1.0) for f in factors)
    attempt.verdict = "exact"
    report.record(attempt)
    ctx.commit(ctx.working(), solved, [t.key for t in batch] + [key], report)
    logger.info(f"Part A 成功：{leaf.name} 的 {source} -{t_hat.action}-> {target} 乘上 {common:.6g}")
    return True


def part_b(
    ctx: LiftContext, key: TransitionKey, involved: frozenset[int], report: BatchReport
) -> bool:
    """Part B：對 IS(t) = IS(t̂) 的所有 c 轉移建立方程組並求解。"""
    action = key[1]
    keys = [
        k
        for k in _c_transitions(ctx.flat, action)
        if involved_set(ctx.system, ctx.flat, ctx.flat.transition(k))[0] == involved
    ]
    work = ctx.working()
    scope = covering_root(ctx.system, involved)
    solved = _solve_and_record(ctx, work, keys, "B", scope, report)
    if solved is None:
        return False
    ctx.commit(work, solved, keys + [key], report)
    return True


def part_c(
    ctx: LiftContext, key: TransitionKey, involved: frozenset[int], report: BatchReport
) -> bool:
    """Part C：把 c-scope 內的 ``||_¬c`` 節點都改為同步 c 後重新求解。"""
    action = key[1]
    t_hat = ctx.flat.transition(key)
    scope = covering_root(ctx.system, involved)
    if participating_set(ctx.system, ctx.flat, t_hat) == involved:
        report.record(
            PartAttempt(
                part="C",
                outcome="not_applicable",
                detail="PS(t̂) = IS(t̂)，不修改同步集合，直接進入 Part D",
                scope=format_path(scope),
            )
        )
        report.notes.append("PS(t̂) = IS(t̂) 且 Part B 無解，略過 Part C 進入 Part D")
        logger.info("Part C 不適用：PS(t̂) = IS(t̂)")
        return False

    keys = [
        k
        for k in _c_transitions(ctx.flat, action)
        if involved_set(ctx.system, ctx.flat, ctx.flat.transition(k))[0] == involved
    ]
    work = ctx.working()
    failures = _synchronise_scope(work, scope, action, keys)
    for failure in failures:
        logger.debug(f"Part C TRYSYNC 失敗 {failure}")
    solved = _solve_and_record(ctx, work, keys, "C", scope, report)
    if failures:
        report.attempts[-1].detail += f"；{len(failures)} 個節點無法同步"
    if solved is None:
        return False
    ctx.commit(work, solved, keys + [key], report)
    return True


def part_d(
    ctx: LiftContext, key: TransitionKey, start: NodePath, report: BatchReport
) -> bool:
    """Part D：把目前的根往上移，每層嘗試擴大 c-scope 後重跑 Part B/C。

    某一層 TRYSYNC 失敗時略過該層繼續往上；走到根仍無解則回傳 False。
    """
    action = key[1]
    work = ctx.working()
    current = start
    report.notes.append("Part D 的 T_c 以 PS(t) ∩ IS ≠ ∅ 選取，與 Part B 的 IS(t) = IS(t̂) 不同")

    while current:
        current = current[:-1]
        scope_keys = [
            k
            for k in _c_transitions(work.flat, action)
            if participating_set(work.system, work.flat, work.flat.transition(k))
            & set(work.system.leaf_indices(current))
        ]
        ok, reason = _flip(work, current, action, scope_keys)
        if not ok:
            report.record(
                PartAttempt(
                    part="D",
                    outcome="failed",
                    detail=f"TRYSYNC 失敗：{reason}",
                    scope=format_path(current),
                )
            )
            logger.info(f"Part D：節點 {format_path(current)} 無法同步 {action}，繼續往上")
            continue

        involved = frozenset(work.system.leaf_indices(current))
        keys = [
            k
            for k in _c_transitions(work.flat, action)
            if participating_set(work.system, work.flat, work.flat.transition(k)) & involved
        ]
        solved = _solve_and_record(ctx, work, keys, "D", current, report)
        if solved is None:
            t_hat = work.flat.transition(key)
            if participating_set(work.system, work.flat, t_hat) != involved:
                _synchronise_scope(work, current, action, keys)
                solved = _solve_and_record(ctx, work, keys, "D", current, report)
        if solved is not None:
            ctx.commit(work, solved, keys + [key], report)
            return True

    return False


def _lift_one(ctx: LiftContext, key: TransitionKey, lift_report: LiftReport) -> None:
    t_hat = ctx.flat.transition(key)
    involved, restricted, scope = involved_set(ctx.system, ctx.flat, t_hat)
    report = BatchReport(
        transition=format_key(key),
        action=t_hat.action,
        involved=_leaf_names(ctx.system, involved),
        involved_restricted=_leaf_names(ctx.system, restricted),
    )
    lift_report.batches.append(report)
    logger.info(f"處理 {format_key(key)}：|IS| = {len(involved)}")

    if len(involved) == 1:
        if local_repair(ctx, key, report):
            report.part, report.outcome = "A", "success"
            return
        report.record(
            PartAttempt(part="B", outcome="not_applicable", detail="|IS| = 1", scope=format_path(scope))
        )
        report.record(
            PartAttempt(part="C", outcome="not_applicable", detail="|IS| = 1", scope=format_path(scope))
        )
    else:
        report.record(
            PartAttempt(part="A", outcome="failed", detail="|IS|>1", scope=format_path(scope))
        )
        if part_b(ctx, key, involved, report):
            report.part, report.outcome = "B", "success"
            return
        if part_c(ctx, key, involved, report):
            report.part, report.outcome = "C", "success"
            return

    if part_d(ctx, key, scope, report):
        report.part, report.outcome = "D", "success"
        return

    report.outcome = "failed"
    error_msg = (
        f"轉移 {format_key(key)} 在 Part D 走到根仍無解\n"
        f"建議：檢查修正係數是否彼此矛盾，或放寬 --tol / 增加 --restarts"
    )
    logger.error(error_msg)
    raise RateLiftError(error_msg, lift_report, ctx.last_infeasible)


def _fill_selfloop_rates(sys: SpaSystem, report: LiftReport) -> None:
    for loop in report.edits[1]:
        leaf = sys.leaf_of(sys.leaf_index(loop.process))
        loop.rate = leaf.slot_rate(loop.state, loop.action, loop.state)


def rate_lift(
    sys: SpaSystem,
    flat: FlatTS,
    tmod: ModificationMap,
    config: SolverConfig | None = None,
    budget: int | None = None,
) -> RepairedSystem:
    """把平面轉移上的修正係數提升到各循序行程。

    Args:
        sys: 原系統
        flat: sys 的平面轉移系統
        tmod: 修正係數；未列出的轉移係數為 1
        config: 方程組求解設定
        budget: 平面化的狀態上限

    Returns:
        RepairedSystem，其平面轉移系統與原本的狀態及轉移關係相同、速率符合係數

    Raises:
        UnknownTransition: 係數指向不存在的轉移
        StructureError: 係數指向全域自迴圈
        ModelError: 係數非正
        RateLiftError: 某批轉移在 Part D 走到根仍無解，或最終驗證失敗
    """
    _check_modifications(flat, tmod)
    ctx = LiftContext.create(sys, flat, tmod, config, budget)
    report = LiftReport(
        modified_transitions=len(tmod),
        solver={
            "tolerance": ctx.config.tolerance,
            "restarts": ctx.config.restarts,
            "seed": ctx.config.seed,
            "max_nfev": ctx.config.max_nfev,
        },
    )

    while ctx.pending:
        before = len(ctx.pending)
        _lift_one(ctx, min(ctx.pending), report)
        assert len(ctx.pending) < before

    _fill_selfloop_rates(ctx.system, report)
    report.verification = verify_repair(flat, tmod, ctx.system, budget=budget)
    report.success = report.verification.passed
    if not report.success:
        error_msg = (
            f"提升完成但驗證失敗：{report.verification.problems[0]}\n"
            f"建議：以 --report 輸出報告檢查各批次的方程組"
        )
        logger.error(error_msg)
        raise RateLiftError(error_msg, report, ctx.last_infeasible)

    syncs, loops = report.edits
    logger.info(
        f"速率提升完成：{len(report.batches)} 批，修改 {len(syncs)} 個同步集合，"
        f"新增 {len(loops)} 個自迴圈"
    )
    return RepairedSystem(ctx.system, report)


__all__ = [
    "COMMON_FACTOR_REL_TOL",
    "RateLiftError",
    "RepairedSystem",
    "LiftContext",
    "local_repair",
    "part_b",
    "part_c",
    "part_d",
    "rate_lift",
]
