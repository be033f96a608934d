import json
import math
import random
from fractions import Fraction

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from oracles import brute_force_mckp
from vrtiles.allocation import (
    C1,
    C2,
    C3,
    AllocationInput,
    TileOption,
    allocate_exact,
    allocate_greedy,
    classify_priorities,
    input_from_json,
    input_to_json,
    load_input,
    plan_to_json,
    priority_classes,
)
from vrtiles.errors import InfeasibleBudgetError, ScalingOverflowError

ABC = (
    TileOption("A", 3, (10, 5, 2)),
    TileOption("B", 2, (8, 4, 2)),
    TileOption("C", 1, (6, 3, 1)),
)


def test_abc_greedy():
    plan = allocate_greedy(AllocationInput(ABC, 16))
    assert plan.levels == {"A": 1, "B": 2, "C": 3}
    assert plan.total_bitrate == 15
    assert plan.total_quality == 39
    assert plan.residual == 1
    assert plan.first_blocked == ("B",) and plan.blocked_level == 2


@pytest.mark.parametrize("method", ["enumerate", "dp", "auto"])
def test_abc_exact(method):
    plan = allocate_exact(AllocationInput(ABC, 16), method=method)
    assert plan.total_quality == 39
    assert plan.levels == {"A": 1, "B": 2, "C": 3}


def test_abc_oracle_agrees():
    q, levels = brute_force_mckp([(t.priority, t.ladder) for t in ABC], 16)
    assert q == 39 and levels == (1, 2, 3)


def test_packed_group():
    plan = allocate_greedy(AllocationInput(ABC, 20, packed_groups=[("A", "B")]))
    assert plan.levels == {"A": 1, "B": 1, "C": 3}
    assert plan.total_bitrate == 19
    exact = allocate_exact(AllocationInput(ABC, 20, packed_groups=[("A", "B")]))
    q, _ = brute_force_mckp([(t.priority, t.ladder) for t in ABC], 20, groups=[(0, 1)])
    assert exact.total_quality == q
    assert exact.levels["A"] == exact.levels["B"]


def test_budget_at_w_min():
    plan = allocate_greedy(AllocationInput(ABC, 5))
    assert plan.level_vector() == (3, 3, 3)
    assert plan.residual == 0


def test_infeasible_budget():
    with pytest.raises(InfeasibleBudgetError) as info:
        allocate_greedy(AllocationInput(ABC, 4.5))
    assert info.value.w_min == 5
    with pytest.raises(InfeasibleBudgetError):
        allocate_exact(AllocationInput(ABC, 4.5))


def test_unconstrained():
    for budget in (24, 100, math.inf):
        assert allocate_exact(AllocationInput(ABC, budget)).level_vector() == (1, 1, 1)
        assert allocate_greedy(AllocationInput(ABC, budget)).level_vector() == (1, 1, 1)


def test_single_tile_between_rungs():
    tile = (TileOption("x", 1, (9, 6, 4, 1)),)
    assert allocate_exact(AllocationInput(tile, 7)).level_vector() == (2,)
    assert allocate_greedy(AllocationInput(tile, 7)).level_vector() == (2,)


def test_input_validation():
    with pytest.raises(ValueError):
        TileOption("x", 1, (3, 3))
    with pytest.raises(ValueError):
        TileOption("x", 0, (3, 2))
    with pytest.raises(ValueError):
        AllocationInput(ABC, 0)
    with pytest.raises(ValueError):
        AllocationInput(ABC, 10, packed_groups=[("A",), ("A", "B")])
    with pytest.raises(ValueError):
        AllocationInput(ABC, 10, packed_groups=[("Z",)])


def test_scaling_overflow():
    tiles = tuple(TileOption(i, 1 + i, (Fraction(10**7 + i, 10**7), Fraction(1, 3))) for i in range(12))
    with pytest.raises(ScalingOverflowError):
        allocate_exact(AllocationInput(tiles, 5), method="dp")


def test_json_round_trip(tmp_path, fixtures_dir):
    problem = load_input(fixtures_dir / "abc.json")
    assert problem == AllocationInput(ABC, 16)
    again = input_from_json(json.loads(json.dumps(input_to_json(problem))))
    assert again == problem
    out = plan_to_json(allocate_greedy(problem))
    assert out["total_quality"] == 39 and [t["level"] for t in out["tiles"]] == [1, 2, 3]


# -- priority classes ------------------------------------------------------------


def test_classes_front(hexaface):
    prio = classify_priorities([hexaface.by_name("front").segment_id], hexaface)
    got = {hexaface[s].name: c.class_id for s, c in prio.items()}
    assert got == {"front": C1, "left": C2, "right": C2, "top": C2, "bottom": C2, "back": C3}


def test_classes_all_visible(hexaface):
    prio = classify_priorities(hexaface.ids, hexaface)
    assert {c.class_id for c in prio.values()} == {C1}


def test_classes_top(hexaface):
    prio = classify_priorities([hexaface.top_id], hexaface)
    got = {hexaface[s].name: c.class_id for s, c in prio.items()}
    assert got == {"top": C1, "front": C2, "left": C2, "back": C2, "right": C2, "bottom": C3}


def test_coefficients_must_be_ordered():
    with pytest.raises(ValueError):
        priority_classes(2, 2, 1)
    assert priority_classes()[C1].coefficient == 4.0


# -- properties --------------------------------------------------------------------


@st.composite
def instances(draw, max_tiles=6, max_levels=4, packing=True):
    n = draw(st.integers(1, max_tiles))
    levels = draw(st.integers(1, max_levels))
    tiles = []
    for i in range(n):
        rungs = sorted(draw(st.sets(st.integers(1, 60), min_size=levels, max_size=levels)), reverse=True)
        prio = draw(st.sampled_from([1, 2, 4, 3, 0.5]))
        tiles.append(TileOption(i, prio, tuple(rungs)))
    w_min = sum(t.ladder[-1] for t in tiles)
    top = sum(t.ladder[0] for t in tiles)
    budget = draw(st.integers(w_min, top + 5))
    groups = ()
    if packing and n >= 2 and draw(st.booleans()):
        size = draw(st.integers(2, n))
        groups = (tuple(range(size)),)
    return AllocationInput(tuple(tiles), budget, groups)


def _oracle(problem):
    idx = {t.tile_id: i for i, t in enumerate(problem.tiles)}
    groups = [tuple(idx[m] for m in g) for g in problem.packed_groups]
    return brute_force_mckp([(Fraction(t.priority), t.ladder) for t in problem.tiles], problem.budget, groups)


@settings(max_examples=300, deadline=None)
@given(instances())
def test_greedy_feasible_and_complete(problem):
    plan = allocate_greedy(problem)
    assert plan.total_bitrate <= problem.budget
    assert len(plan.tiles) == len(problem.tiles)
    assert all(1 <= t.level <= len(o.ladder) for t, o in zip(plan.tiles, problem.tiles))
    for g in problem.packed_groups:
        assert len({plan.levels[m] for m in g}) == 1


@settings(max_examples=300, deadline=None)
@given(instances())
def test_exact_matches_independent_oracle(problem):
    best, _ = _oracle(problem)
    for method in ("enumerate", "dp"):
        plan = allocate_exact(problem, method=method)
        assert plan.total_bitrate <= problem.budget
        assert float(plan.total_quality) == pytest.approx(float(best), rel=1e-12)
        for g in problem.packed_groups:
            assert len({plan.levels[m] for m in g}) == 1


@settings(max_examples=300, deadline=None)
@given(instances(packing=False))
def test_error_bound(problem):
    greedy = allocate_greedy(problem)
    best, _ = _oracle(problem)
    gap = best - Fraction(greedy.total_quality)
    assert gap >= 0
    if greedy.first_blocked is None:
        assert gap == 0
        return
    p_max = max(Fraction(t.priority) for t in problem.tiles)
    members = greedy.first_blocked
    by_id = {t.tile_id: t for t in problem.tiles}
    top = sum(by_id[m].ladder[0] for m in members)
    got = sum(by_id[m].ladder[greedy.blocked_level - 1] for m in members)
    assert gap <= p_max * (top - got)


@settings(max_examples=200, deadline=None)
@given(instances(packing=False))
def test_priority_monotonicity(problem):
    # give two tiles the same ladder but different priorities
    assume(len(problem.tiles) >= 2)
    a, b = problem.tiles[0], problem.tiles[1]
    assume(a.priority != b.priority and len(a.ladder) == len(b.ladder))
    tiles = (a, TileOption(b.tile_id, b.priority, a.ladder)) + problem.tiles[2:]
    w_min = sum(t.ladder[-1] for t in tiles)
    p = AllocationInput(tiles, max(problem.budget, w_min))
    plan = allocate_greedy(p)
    hi, lo = (a, b) if a.priority > b.priority else (b, a)
    assert plan.levels[hi.tile_id] <= plan.levels[lo.tile_id]


@settings(max_examples=200, deadline=None)
@given(instances(), st.sampled_from([Fraction(1, 3), Fraction(7, 2), 1000, Fraction(22, 7)]))
def test_scale_invariance(problem, c):
    scaled = AllocationInput(
        tuple(TileOption(t.tile_id, t.priority, tuple(s * c for s in t.ladder)) for t in problem.tiles),
        problem.budget * c,
        problem.packed_groups,
    )
    assert allocate_greedy(scaled).level_vector() == allocate_greedy(problem).level_vector()


@settings(max_examples=200, deadline=None)
@given(instances(), st.integers(1, 30))
def test_greedy_monotone_in_budget(problem, extra):
    more = AllocationInput(problem.tiles, problem.budget + extra, problem.packed_groups)
    assert allocate_greedy(more).total_bitrate >= allocate_greedy(problem).total_bitrate


@settings(max_examples=200, deadline=None)
@given(instances())
def test_operation_counters(problem):
    plan = allocate_greedy(problem)
    n = len(problem.tiles)
    levels = max(len(t.ladder) for t in problem.tiles)
    assert plan.stats["sorts"] == 1
    assert plan.stats["probes"] <= n * (levels + 1)


def test_float_budgets_are_exact():
    tiles = (TileOption("a", 2, (0.1, 0.05)), TileOption("b", 1, (0.2, 0.05)))
    # in floats 0.1 + 0.2 > 0.3, which would wrongly block the second upgrade
    assert 0.1 + 0.2 > 0.3
    assert allocate_greedy(AllocationInput(tiles, 0.3)).level_vector() == (1, 1)
    for method in ("dp", "enumerate"):
        assert allocate_exact(AllocationInput(tiles, 0.29), method=method).level_vector() == (2, 1)


def test_random_instances_quality_ratio():
    rng = random.Random(5)
    ratios = []
    for _ in range(500):
        n, levels = rng.randint(1, 8), rng.randint(1, 4)
        tiles = tuple(
            TileOption(i, rng.choice([1, 2, 4]), tuple(sorted(rng.sample(range(1, 100), levels), reverse=True)))
            for i in range(n)
        )
        w_min = sum(t.ladder[-1] for t in tiles)
        top = sum(t.ladder[0] for t in tiles)
        budget = rng.randint(w_min, top)
        g = allocate_greedy(AllocationInput(tiles, budget))
        e = allocate_exact(AllocationInput(tiles, budget))
        assert g.total_quality <= e.total_quality + 1e-9
        ratios.append(float(g.total_quality) / float(e.total_quality))
    assert sum(ratios) / len(ratios) >= 0.9
