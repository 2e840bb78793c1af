"""速率方程式的建立與求解測試。

求解器以已知正解產生的方程組檢查：有解時殘差必須在容忍度內，
刻意加入矛盾方程式的單項方程組必須判定為無解。
"""

import numpy as np
import pytest

from core.combinatorics import CombinationSet, rslc
from core.equations import (
    Equation,
    EquationSystem,
    Infeasible,
    RateVariable,
    Solution,
    SolverConfig,
    build_equation,
    build_system,
    current_value,
    format_equation,
    solve,
    verify_solution,
)
from core.model import StructureError
from core.parser import parse_system
from core.semantics import flatten
from core.structure import moving_set, participating_set


def _variables(n: int) -> tuple[RateVariable, ...]:
    return tuple(RateVariable(i, f"s{i}", f"t{i}", "a") for i in range(n))


def _planted_system(
    rng: np.random.Generator, max_terms: int, max_equations: int | None = None
) -> tuple[EquationSystem, np.ndarray]:
    """以隨機正解產生方程組，初值全部為 1；max_equations 為 None 時方程式數不超過變數數。"""
    n = int(rng.integers(4, 13))
    variables = _variables(n)
    planted = np.exp(rng.normal(0.0, 0.5, n))
    equations = []
    limit = n if max_equations is None else max_equations
    for _ in range(int(rng.integers(1, limit + 1))):
        terms = []
        for _ in range(int(rng.integers(1, max_terms + 1))):
            size = int(rng.integers(1, 4))
            chosen = sorted(rng.choice(n, size=size, replace=False))
            terms.append(tuple(variables[i] for i in chosen))
        rhs = sum(float(np.prod([planted[v.process] for v in term])) for term in terms)
        equations.append(Equation(terms=tuple(terms), rhs=rhs))
    return EquationSystem(variables, tuple(equations), (1.0,) * n), planted


class TestSolverOracle:
    """以已知正解檢查求解器。"""

    @pytest.mark.parametrize("seed", range(100))
    def test_multilinear_planted(self, seed):
        rng = np.random.default_rng(seed)
        system, _ = _planted_system(rng, max_terms=3)

        outcome = solve(system)

        assert isinstance(outcome, Solution)
        assert outcome.max_residual <= 1e-9
        assert verify_solution(system, outcome).passed
        assert all(value > 0 for value in outcome.assignment.values())

    @pytest.mark.parametrize("seed", range(100))
    def test_single_term_planted(self, seed):
        rng = np.random.default_rng(1000 + seed)
        system, _ = _planted_system(rng, max_terms=1, max_equations=32)

        outcome = solve(system)

        assert isinstance(outcome, Solution)
        assert outcome.method in ("log-linear", "initial")
        assert verify_solution(system, outcome).passed

    @pytest.mark.parametrize("seed", range(100))
    def test_inconsistent_single_term(self, seed):
        rng = np.random.default_rng(2000 + seed)
        system, _ = _planted_system(rng, max_terms=1, max_equations=31)
        first = system.equations[0]
        contradiction = Equation(terms=first.terms, rhs=first.rhs * 1.5)
        system = EquationSystem(
            system.variables, system.equations + (contradiction,), system.initial
        )

        outcome = solve(system)

        assert isinstance(outcome, Infeasible)
        assert outcome.exact
        assert outcome.best_residual > 1e-9


class TestSolvePaths:
    """測試求解器的各條路徑。"""

    def test_initial_assignment_already_satisfies(self):
        x, y = _variables(2)
        system = EquationSystem((x, y), (Equation(((x, y),), 6.0),), (2.0, 3.0))

        outcome = solve(system)

        assert isinstance(outcome, Solution)
        assert outcome.method == "initial"
        assert outcome.assignment == {x: 2.0, y: 3.0}

    def test_log_linear_is_minimum_norm(self):
        """x·y = 4 從 (1, 1) 出發，對數空間中最近的解為 x = y = 2。"""
        x, y = _variables(2)
        system = EquationSystem((x, y), (Equation(((x, y),), 4.0),), (1.0, 1.0))

        outcome = solve(system)

        assert isinstance(outcome, Solution)
        assert outcome.assignment[x] == pytest.approx(2.0)
        assert outcome.assignment[y] == pytest.approx(2.0)

    def test_repeated_variable_is_a_power(self):
        (x,) = _variables(1)
        system = EquationSystem((x,), (Equation(((x, x),), 9.0),), (1.0,))

        outcome = solve(system)

        assert isinstance(outcome, Solution)
        assert outcome.assignment[x] == pytest.approx(3.0)

    def test_numeric_infeasible_is_heuristic(self):
        x, y, z = _variables(3)
        lhs = ((x, y), (x, z))
        system = EquationSystem(
            (x, y, z),
            (Equation(lhs, 2.0), Equation(lhs, 4.0)),
            (1.0, 1.0, 1.0),
        )

        outcome = solve(system, SolverConfig(restarts=4))

        assert isinstance(outcome, Infeasible)
        assert not outcome.exact
        assert outcome.restarts == 4

    def test_numeric_prefers_first_converging_start(self):
        """從目前速率出發即可收斂時不再嘗試其他起點。"""
        x, y, z = _variables(3)
        system = EquationSystem(
            (x, y, z),
            (Equation(((x, y), (x, z)), 6.0), Equation(((y,),), 2.0)),
            (1.0, 1.0, 1.0),
        )

        outcome = solve(system, SolverConfig(restarts=8))

        assert isinstance(outcome, Solution)
        assert outcome.method == "numeric"
        assert outcome.restarts_used == 1
        assert verify_solution(system, outcome).passed

    def test_numeric_is_reproducible(self):
        rng = np.random.default_rng(7)
        system, _ = _planted_system(rng, max_terms=3)
        x, y, z = system.variables[:3]
        extra = Equation(((x, y), (y, z)), 5.0)
        system = EquationSystem(system.variables, system.equations + (extra,), system.initial)
        config = SolverConfig(restarts=8, seed=11)

        first = solve(system, config)
        second = solve(system, config)

        assert type(first) is type(second)
        assert first == second
        if isinstance(first, Solution):
            assert first.method == "numeric"

    def test_empty_system(self):
        outcome = solve(EquationSystem((), (), ()))

        assert isinstance(outcome, Solution)
        assert outcome.assignment == {}


class TestBuildEquation:
    """測試由平面轉移建立方程式。"""

    def test_one_term_per_combination(self, two_derivations):
        flat = flatten(two_derivations)
        (t,) = flat.transitions

        eq = build_equation(
            two_derivations,
            flat,
            t,
            participating_set(two_derivations, flat, t),
            moving_set(t),
            rslc(two_derivations, flat, t),
            factor=2.0,
        )

        assert eq.rhs == 32.0
        assert len(eq.terms) == 2
        assert format_equation(eq, two_derivations) == (
            "P:s1-a->s1' * Q:s2-a->s2 + P:s1-a->s1' * R:s3-a->s3 = 32"
        )

    def test_must_selfloop_in_every_term(self, involved_model):
        flat = flatten(involved_model)
        t = flat.transitions[0]
        assert t.action == "a"

        eq = build_equation(
            involved_model,
            flat,
            t,
            participating_set(involved_model, flat, t),
            moving_set(t),
            rslc(involved_model, flat, t),
        )

        (term,) = eq.terms
        assert [v.describe(involved_model) for v in term] == [
            "P1:s1-a->s1'",
            "P3:s3-a->s3'",
            "P4:s4-a->s4",
        ]

    def test_global_selfloop_rejected(self):
        sys = parse_system(
            "process P { initial s0; s0 -(a, 1)-> s0; s0 -(b, 1)-> s1; } system : P;"
        )
        flat = flatten(sys)
        t = flat.transition((("s0",), "a", ("s0",)))

        with pytest.raises(StructureError):
            build_equation(
                sys, flat, t, frozenset(), frozenset(), CombinationSet.of({frozenset()})
            )

    def test_build_system_uses_current_rates(self, two_derivations):
        flat = flatten(two_derivations)
        (t,) = flat.transitions
        eq = build_equation(
            two_derivations,
            flat,
            t,
            participating_set(two_derivations, flat, t),
            moving_set(t),
            rslc(two_derivations, flat, t),
        )

        system = build_system(two_derivations, [eq])

        assert system.initial == (2.0, 3.0, 5.0)
        assert not system.is_single_term

    def test_missing_slot_uses_placeholder(self, two_derivations):
        assert current_value(two_derivations, RateVariable(0, "s1'", "s1'", "a")) == 1.0
