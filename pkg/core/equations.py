"""速率方程式的建立與求解。

每條平面轉移 t 對應一條多重線性方程式：對每個相關自迴圈組合 C 產生一項，
項內為移動行程的轉移速率、must 同步的穩定參與者自迴圈速率，以及 C 中行程的
自迴圈速率相乘；各項相加等於目標速率 rate(t)·factor(t)。

未知數以 ``x = x0·exp(δ)`` 參數化以保證為正。所有方程式都只有一項時取對數，
成為線性最小平方問題並可精確判斷是否無解；否則以 scipy 的 trust-region
least_squares 從多個固定種子的起點求解。
"""

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from core.combinatorics import CombinationSet
from core.constants import (
    DEFAULT_MAX_NFEV,
    DEFAULT_RESTARTS,
    DEFAULT_SEED,
    DEFAULT_SOLVER_TOLERANCE,
    PLACEHOLDER_SELFLOOP_RATE,
)
from core.model import ActionLabel, LocalState, SpaSystem, StructureError
from core.semantics import FlatTS, FlatTransition, TransitionKey
from core.structure import must_neighbours
from core.utils import logger


@dataclass(frozen=True, order=True)
class RateVariable:
    """區域轉移槽位 x^(P)_{s s'} 的未知速率（同槽位的平行轉移共用一個變數）。"""

    process: int
    source: LocalState
    target: LocalState
    action: ActionLabel

    def describe(self, sys: SpaSystem) -> str:
        name = sys.leaf_of(self.process).name
        return f"{name}:{self.source}-{self.action}->{self.target}"


Term = tuple[RateVariable, ...]


@dataclass(frozen=True)
class Equation:
    terms: tuple[Term, ...]
    rhs: float
    key: TransitionKey | None = None

    @property
    def is_single_term(self) -> bool:
        return len(self.terms) == 1


@dataclass(frozen=True)
class EquationSystem:
    """方程組；initial 為各變數的目前值，作為起點與最小擾動的參考。"""

    variables: tuple[RateVariable, ...]
    equations: tuple[Equation, ...]
    initial: tuple[float, ...]

    @property
    def is_single_term(self) -> bool:
        return all(eq.is_single_term for eq in self.equations)

    def initial_assignment(self) -> dict[RateVariable, float]:
        return dict(zip(self.variables, self.initial))


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = DEFAULT_SOLVER_TOLERANCE
    restarts: int = DEFAULT_RESTARTS
    seed: int = DEFAULT_SEED
    max_nfev: int = DEFAULT_MAX_NFEV


@dataclass(frozen=True)
class Solution:
    assignment: dict[RateVariable, float]
    max_residual: float
    method: str
    restarts_used: int = 0


@dataclass(frozen=True)
class Infeasible:
    """無解判定。exact 為 True 表示對數線性路徑證明無解，否則為數值上的啟發式判定。"""

    best_residual: float
    restarts: int
    exact: bool
    message: str


@dataclass(frozen=True)
class ResidualReport:
    residuals: tuple[float, ...]
    max_residual: float
    passed: bool
    failing: tuple[int, ...] = field(default_factory=tuple)


def build_equation(
    sys: SpaSystem,
    flat: FlatTS,
    t: FlatTransition,
    ps: frozenset[int],
    ms: frozenset[int],
    combos: CombinationSet,
    factor: float = 1.0,
) -> Equation:
    """為單一平面轉移建立方程式，右側為 rate(t)·factor。

    Raises:
        StructureError: 當 t 沒有移動行程（全域自迴圈）時
        UnknownTransition: 當 t 不在 flat 中時
    """
    flat.transition(t.key)
    if not ms:
        error_msg = (
            f"轉移 {t.key} 沒有移動行程，無法建立速率方程式\n"
            f"建議：全域自迴圈不能指定修正係數"
        )
        logger.error(error_msg)
        raise StructureError(error_msg)

    c = t.action
    base = [RateVariable(i, t.source[i], t.target[i], c) for i in sorted(ms)]
    base += [
        RateVariable(q, t.source[q], t.source[q], c)
        for q in sorted(must_neighbours(sys, t, ms) & ps)
    ]
    terms = []
    for combo in combos:
        loops = [RateVariable(r, t.source[r], t.source[r], c) for r in sorted(combo)]
        terms.append(tuple(sorted(base + loops)))
    return Equation(terms=tuple(terms), rhs=t.rate * factor, key=t.key)


def current_value(sys: SpaSystem, variable: RateVariable) -> float:
    """變數在系統中的目前值；槽位尚無轉移時回傳暫定值 1。"""
    rate = sys.leaf_of(variable.process).slot_rate(
        variable.source, variable.action, variable.target
    )
    return rate if rate > 0 else PLACEHOLDER_SELFLOOP_RATE


def build_system(sys: SpaSystem, equations: list[Equation]) -> EquationSystem:
    """收集方程式中出現的變數（依首次出現順序），以系統目前的速率為初值。"""
    variables: dict[RateVariable, None] = {}
    for eq in equations:
        for term in eq.terms:
            for v in term:
                variables.setdefault(v, None)
    ordered = tuple(variables)
    return EquationSystem(
        variables=ordered,
        equations=tuple(equations),
        initial=tuple(current_value(sys, v) for v in ordered),
    )


def _relative_residuals(
    system: EquationSystem, assignment: dict[RateVariable, float]
) -> list[float]:
    residuals = []
    for eq in system.equations:
        lhs = 0.0
        for term in eq.terms:
            value = 1.0
            for v in term:
                value *= assignment[v]
            lhs += value
        residuals.append(abs(lhs - eq.rhs) / eq.rhs)
    return residuals


def verify_solution(
    system: EquationSystem,
    solution: Solution,
    tolerance: float = DEFAULT_SOLVER_TOLERANCE,
) -> ResidualReport:
    """逐條計算相對殘差 |lhs − rhs| / rhs，全部不超過 tolerance 即通過。"""
    residuals = _relative_residuals(system, solution.assignment)
    failing = tuple(i for i, r in enumerate(residuals) if r > tolerance)
    max_residual = max(residuals, default=0.0)
    return ResidualReport(
        residuals=tuple(residuals),
        max_residual=max_residual,
        passed=not failing,
        failing=failing,
    )


class _Compiled:
    """把方程組轉成 numpy 陣列形式，供對數線性與數值求解共用。"""

    def __init__(self, system: EquationSystem):
        self.system = system
        position = {v: i for i, v in enumerate(system.variables)}
        self.x0 = np.array(system.initial, dtype=float)
        self.rhs = np.array([eq.rhs for eq in system.equations], dtype=float)
        # 每條方程式的每一項：變數索引與次方
        self.terms: list[list[tuple[np.ndarray, np.ndarray]]] = []
        for eq in system.equations:
            compiled = []
            for term in eq.terms:
                counts = Counter(position[v] for v in term)
                compiled.append(
                    (
                        np.array(list(counts), dtype=int),
                        np.array(list(counts.values()), dtype=float),
                    )
                )
            self.terms.append(compiled)

    def values(self, delta: np.ndarray) -> np.ndarray:
        return self.x0 * np.exp(delta)

    def residuals(self, delta: np.ndarray) -> np.ndarray:
        log_x = np.log(self.x0) + delta
        out = np.empty(len(self.terms))
        for i, terms in enumerate(self.terms):
            out[i] = (
                sum(math.exp(float(power @ log_x[idx])) for idx, power in terms)
                / self.rhs[i]
                - 1.0
            )
        return out

    def jacobian(self, delta: np.ndarray) -> np.ndarray:
        log_x = np.log(self.x0) + delta
        jac = np.zeros((len(self.terms), len(self.x0)))
        for i, terms in enumerate(self.terms):
            for idx, power in terms:
                value = math.exp(float(power @ log_x[idx])) / self.rhs[i]
                jac[i, idx] += power * value
        return jac

    def log_matrix(self) -> np.ndarray:
        matrix = np.zeros((len(self.terms), len(self.x0)))
        for i, terms in enumerate(self.terms):
            ((idx, power),) = terms
            matrix[i, idx] = power
        return matrix

    def assignment(self, delta: np.ndarray) -> dict[RateVariable, float]:
        values = self.values(delta)
        return {v: float(x) for v, x in zip(self.system.variables, values)}


def _solve_log_linear(
    compiled: _Compiled, config: SolverConfig
) -> Solution | Infeasible:
    matrix = compiled.log_matrix()
    target = np.log(compiled.rhs) - matrix @ np.log(compiled.x0)
    # 最小範數解：對數空間中離目前速率最近的解
    delta, *_ = np.linalg.lstsq(matrix, target, rcond=None)
    max_residual = float(np.max(np.abs(compiled.residuals(delta)), initial=0.0))
    if max_residual <= config.tolerance:
        return Solution(compiled.assignment(delta), max_residual, "log-linear")
    return Infeasible(
        best_residual=max_residual,
        restarts=0,
        exact=True,
        message="取對數後的線性方程組不一致，無解",
    )


def _solve_numeric(compiled: _Compiled, config: SolverConfig) -> Solution | Infeasible:
    """多起點 trust-region 求解，回傳第一個達到容忍度的起點的解。

    第 0 個起點即目前速率（δ = 0），其餘起點以 (seed, 次序) 決定，因此結果可重現。
    多線性方程組有解時通常有無限多解；這裡不在成功的起點之間比較擾動大小，
    只保證由第 0 個起點收斂時，解是從目前速率出發的局部解。
    """
    n = len(compiled.x0)
    best: tuple[float, int] | None = None
    for attempt in range(max(config.restarts, 1)):
        if attempt == 0:
            delta0 = np.zeros(n)
        else:
            rng = np.random.default_rng([config.seed, attempt])
            delta0 = rng.normal(0.0, 1.0, n)
        result = least_squares(
            compiled.residuals,
            delta0,
            jac=compiled.jacobian,
            method="trf",
            xtol=1e-15,
            ftol=1e-15,
            gtol=1e-15,
            max_nfev=config.max_nfev,
        )
        max_residual = float(np.max(np.abs(compiled.residuals(result.x)), initial=0.0))
        logger.debug(f"第 {attempt} 次起點：最大相對殘差 {max_residual:.3e}")
        if max_residual <= config.tolerance:
            return Solution(
                compiled.assignment(result.x), max_residual, "numeric", attempt + 1
            )
        if best is None or max_residual < best[0]:
            best = (max_residual, attempt)

    assert best is not None
    return Infeasible(
        best_residual=best[0],
        restarts=max(config.restarts, 1),
        exact=False,
        message=(
            f"{max(config.restarts, 1)} 個起點都未達容忍度 {config.tolerance:g}"
            f"（最佳殘差 {best[0]:.3e}，來自第 {best[1]} 個起點）；此為數值判定"
        ),
    )


def solve(system: EquationSystem, config: SolverConfig | None = None) -> Solution | Infeasible:
    """求解方程組。

    目前速率已滿足所有方程式時直接回傳目前值。所有方程式皆只有一項時走對數
    線性路徑，否則以多起點 trust-region least squares 求解。

    Args:
        system: 方程組
        config: 求解設定；None 時使用預設值

    Returns:
        Solution（最大相對殘差 ≤ tolerance）或 Infeasible

    Example:
        >>> # x·y = 6, x = 2
        >>> solve(system).assignment   # {x: 2.0, y: 3.0}
    """
    config = config or SolverConfig()
    compiled = _Compiled(system)
    if not system.equations:
        return Solution(system.initial_assignment(), 0.0, "initial")

    start_residual = float(np.max(np.abs(compiled.residuals(np.zeros(len(compiled.x0))))))
    if start_residual <= config.tolerance:
        return Solution(system.initial_assignment(), start_residual, "initial")

    if system.is_single_term:
        outcome = _solve_log_linear(compiled, config)
    else:
        outcome = _solve_numeric(compiled, config)

    if isinstance(outcome, Solution):
        logger.debug(
            f"求解成功（{outcome.method}）：{len(system.equations)} 條方程式，"
            f"{len(system.variables)} 個變數，殘差 {outcome.max_residual:.3e}"
        )
    else:
        logger.debug(f"求解失敗：{outcome.message}")
    return outcome


def format_equation(eq: Equation, sys: SpaSystem) -> str:
    terms = [" * ".join(v.describe(sys) for v in term) or "1" for term in eq.terms]
    return f"{' + '.join(terms)} = {eq.rhs:.17g}"


__all__ = [
    "RateVariable",
    "Term",
    "Equation",
    "EquationSystem",
    "SolverConfig",
    "Solution",
    "Infeasible",
    "ResidualReport",
    "build_equation",
    "build_system",
    "current_value",
    "verify_solution",
    "solve",
    "format_equation",
]
