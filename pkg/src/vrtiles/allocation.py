"""Per-tile rate allocation as a multiple-choice knapsack.

Every tile must be delivered at exactly one ladder level; the objective is
total quality ``sum(p_i * s_i)`` under the interval budget ``W``.
``allocate_greedy`` is the priority-ordered heuristic, ``allocate_exact``
the optimum (enumeration or dynamic programming) used to audit it.

Bitrates may be ints, floats or Fractions in any unit, as long as the
ladders and the budget share it.  Budget bookkeeping is done on exact
rationals, so feasibility never depends on float rounding.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import InfeasibleBudgetError, ScalingOverflowError

C1, C2, C3 = "C1", "C2", "C3"
DEFAULT_COEFFICIENTS = {C1: 4.0, C2: 2.0, C3: 1.0}

ENUMERATION_LIMIT = 18  # total (tile, level) choices solved by brute force
DP_UNIT_LIMIT = 1_000_000


@dataclass(frozen=True)
class PriorityClass:
    class_id: str
    coefficient: float


def priority_classes(c1=4.0, c2=2.0, c3=1.0):
    if not c1 > c2 > c3 > 0:
        raise ValueError("priority coefficients must satisfy C1 > C2 > C3 > 0")
    return {C1: PriorityClass(C1, c1), C2: PriorityClass(C2, c2), C3: PriorityClass(C3, c3)}


def classify_priorities(visible, hexaface, classes=None):
    """Map every segment id to its priority class.

    Visible segments are C1, their geometric neighbours C2, the rest C3.
    """
    classes = classes or priority_classes()
    visible = list(visible)
    if not visible:
        raise ValueError("visible set must not be empty")
    seen = set(visible)
    near = set()
    for sid in visible:
        near |= hexaface.neighbors(sid)
    out = {}
    for sid in hexaface.ids:
        if sid in seen:
            out[sid] = classes[C1]
        elif sid in near:
            out[sid] = classes[C2]
        else:
            out[sid] = classes[C3]
    return out


@dataclass(frozen=True)
class TileOption:
    tile_id: object
    priority: float
    ladder: tuple  # highest bitrate first

    def __post_init__(self):
        if len(self.ladder) < 1:
            raise ValueError(f"tile {self.tile_id}: empty ladder")
        if any(b >= a for a, b in zip(self.ladder, self.ladder[1:])):
            raise ValueError(f"tile {self.tile_id}: ladder must be strictly decreasing")
        if not self.priority > 0:
            raise ValueError(f"tile {self.tile_id}: priority must be positive")


@dataclass(frozen=True)
class AllocationInput:
    tiles: tuple
    budget: float
    packed_groups: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "tiles", tuple(self.tiles))
        object.__setattr__(self, "packed_groups", tuple(tuple(g) for g in self.packed_groups))
        if not self.budget > 0:
            raise ValueError("budget must be positive")
        ids = [t.tile_id for t in self.tiles]
        if len(set(ids)) != len(ids):
            raise ValueError("tile ids must be unique")
        seen = set()
        lengths = {t.tile_id: len(t.ladder) for t in self.tiles}
        for group in self.packed_groups:
            for tid in group:
                if tid not in lengths:
                    raise ValueError(f"packed group references unknown tile {tid!r}")
                if tid in seen:
                    raise ValueError(f"tile {tid!r} appears in more than one packed group")
                seen.add(tid)
            if len({lengths[t] for t in group}) > 1:
                raise ValueError("packed tiles must have ladders of equal length")

    @property
    def w_min(self):
        return sum(t.ladder[-1] for t in self.tiles)


@dataclass(frozen=True)
class TileAllocation:
    tile_id: object
    level: int
    bitrate: float
    priority: float

    @property
    def quality(self):
        return self.priority * self.bitrate


@dataclass(frozen=True)
class AllocationPlan:
    tiles: tuple
    budget: float
    method: str
    first_blocked: tuple | None = None  # member tile ids of the first tile that missed R1
    blocked_level: int | None = None
    stats: dict = field(default_factory=dict, compare=False)

    @property
    def levels(self):
        return {t.tile_id: t.level for t in self.tiles}

    @property
    def total_bitrate(self):
        return sum(t.bitrate for t in self.tiles)

    @property
    def total_quality(self):
        return sum(t.quality for t in self.tiles)

    @property
    def residual(self):
        return self.budget - self.total_bitrate

    def level_vector(self):
        return tuple(t.level for t in self.tiles)


def _exact(x):
    if isinstance(x, (int, Fraction)):
        return x
    x = float(x)
    if math.isinf(x):
        return x
    return Fraction(repr(x))


@dataclass
class _Unit:
    """A tile, or a packed group handled as one tile."""

    key: object
    members: tuple
    priority: float  # max over members; orders the greedy pass
    ladder: list  # exact values
    quality: list  # true sum of p * s over members, per level


def _units(problem: AllocationInput):
    by_id = {t.tile_id: t for t in problem.tiles}
    grouped = {}
    for group in problem.packed_groups:
        for tid in group:
            grouped[tid] = group
    units = []
    done = set()
    for t in problem.tiles:
        if t.tile_id in done:
            continue
        group = grouped.get(t.tile_id, (t.tile_id,))
        members = tuple(tid for tid in (x.tile_id for x in problem.tiles) if tid in group)
        done.update(members)
        ladders = [[_exact(s) for s in by_id[m].ladder] for m in members]
        ladder = [sum(col) for col in zip(*ladders)]
        quality = [
            sum(by_id[m].priority * float(col[j]) for j, m in enumerate(members)) for col in zip(*ladders)
        ]
        units.append(
            _Unit(
                key=min(members),
                members=members,
                priority=max(by_id[m].priority for m in members),
                ladder=ladder,
                quality=quality,
            )
        )
    return units


def _plan(problem, units, levels, method, **extra):
    chosen = {}
    for u in units:
        for m in u.members:
            chosen[m] = levels[u.key]
    tiles = tuple(
        TileAllocation(t.tile_id, chosen[t.tile_id], t.ladder[chosen[t.tile_id] - 1], t.priority)
        for t in problem.tiles
    )
    return AllocationPlan(tiles, problem.budget, method, **extra)


def _check_budget(problem, units):
    w_min = sum(u.ladder[-1] for u in units)
    budget = _exact(problem.budget)
    if budget < w_min:
        raise InfeasibleBudgetError(problem.budget, float(w_min))
    return budget, w_min


def allocate_greedy(problem: AllocationInput) -> AllocationPlan:
    """Priority-ordered rate allocation.

    All tiles start at their lowest level.  Tiles are visited by descending
    priority (ties by ascending tile id); each is raised to its top level
    while the spare budget covers the upgrade.  The first tile that does
    not fit, and every tile after it, gets the highest level whose bitrate
    fits in the spare budget plus its own minimum.
    """
    units = _units(problem)
    budget, w_min = _check_budget(problem, units)
    order = sorted(units, key=lambda u: (-u.priority, u.key))
    levels = {u.key: len(u.ladder) for u in units}
    remaining = budget - w_min
    probes = 0

    i = 0
    while i < len(order):
        u = order[i]
        probes += 1
        upgrade = u.ladder[0] - u.ladder[-1]
        if upgrade > remaining:
            break
        levels[u.key] = 1
        remaining -= upgrade
        i += 1

    first_blocked = blocked_level = None
    for j, u in enumerate(order[i:]):
        cap = remaining + u.ladder[-1]
        start = 1 if j == 0 else 0  # the blocking tile already failed its top level
        for k in range(start, len(u.ladder)):
            probes += 1
            if u.ladder[k] <= cap:
                break
        levels[u.key] = k + 1
        remaining -= u.ladder[k] - u.ladder[-1]
        if j == 0:
            first_blocked, blocked_level = u.members, k + 1

    return _plan(
        problem,
        units,
        levels,
        "greedy",
        first_blocked=first_blocked,
        blocked_level=blocked_level,
        stats={"sorts": 1, "probes": probes, "units": len(units)},
    )


def _scaled_costs(units, budget, w_min):
    """Integer upgrade costs and capacity after rational scaling."""
    values = [s for u in units for s in u.ladder] + [budget]
    denom = 1
    for v in values:
        denom = math.lcm(denom, Fraction(v).denominator)
    costs = [[int((s - u.ladder[-1]) * denom) for s in u.ladder] for u in units]
    capacity = math.floor((budget - w_min) * denom)
    g = 0
    for row in costs:
        for c in row:
            g = math.gcd(g, c)
    if g > 1:
        costs = [[c // g for c in row] for row in costs]
        capacity //= g
    top = sum(row[0] for row in costs)
    capacity = min(capacity, top)
    if capacity > DP_UNIT_LIMIT:
        raise ScalingOverflowError(
            f"budget spans {capacity} scaled units, above the DP limit of {DP_UNIT_LIMIT}"
        )
    return costs, capacity


def _tol(value):
    return 1e-9 * max(1.0, abs(value))


def _enumerate(units, budget, w_min):
    spare = budget - w_min
    best_q, best = -math.inf, None
    quality = [u.quality for u in units]
    upgrade = [[s - u.ladder[-1] for s in u.ladder] for u in units]
    for combo in itertools.product(*(range(len(u.ladder)) for u in units)):
        if sum(upgrade[i][k] for i, k in enumerate(combo)) > spare:
            continue
        q = sum(quality[i][k] for i, k in enumerate(combo))
        if best is None or q > best_q + _tol(best_q):
            best_q, best = q, combo
    return best


def _dynamic(units, budget, w_min):
    costs, cap = _scaled_costs(units, budget, w_min)
    quality = [u.quality for u in units]
    n = len(units)
    # best[i][c]: max quality of units i.. with at most c scaled upgrade units
    best = [None] * (n + 1)
    best[n] = np.zeros(cap + 1)
    for i in range(n - 1, -1, -1):
        row = np.full(cap + 1, -np.inf)
        nxt = best[i + 1]
        for c, q in zip(costs[i], quality[i]):
            if c > cap:
                continue
            cand = np.full(cap + 1, -np.inf)
            cand[c:] = q + nxt[: cap + 1 - c]
            np.maximum(row, cand, out=row)
        best[i] = row
    combo, c = [], cap
    for i in range(n):
        target = best[i][c]
        for k, (cost, q) in enumerate(zip(costs[i], quality[i])):
            if cost <= c and q + best[i + 1][c - cost] >= target - _tol(target):
                combo.append(k)
                c -= cost
                break
    return tuple(combo)


def allocate_exact(problem: AllocationInput, method: str = "auto") -> AllocationPlan:
    """Optimal allocation; ties go to the lexicographically smallest level vector.

    ``method`` is ``"enumerate"``, ``"dp"`` or ``"auto"`` (enumeration up to
    ``ENUMERATION_LIMIT`` total choices, DP beyond).
    """
    units = _units(problem)
    budget, w_min = _check_budget(problem, units)
    top = sum(u.ladder[0] for u in units)
    if budget >= top:
        levels = {u.key: 1 for u in units}
        return _plan(problem, units, levels, "exact:unconstrained")
    if method == "auto":
        method = "enumerate" if sum(len(u.ladder) for u in units) <= ENUMERATION_LIMIT else "dp"
    if method == "enumerate":
        combo = _enumerate(units, budget, w_min)
    elif method == "dp":
        combo = _dynamic(units, budget, w_min)
    else:
        raise ValueError(f"unknown method {method!r}")
    levels = {u.key: k + 1 for u, k in zip(units, combo)}
    return _plan(problem, units, levels, f"exact:{method}")


# -- JSON exchange -------------------------------------------------------------


def input_from_json(d) -> AllocationInput:
    tiles = tuple(
        TileOption(t["tile_id"], t["priority"], tuple(t["ladder_mbps"])) for t in d["tiles"]
    )
    budget = d["budget_mbps"]
    budget = math.inf if budget in ("inf", None) else budget
    return AllocationInput(tiles, budget, tuple(tuple(g) for g in d.get("packed_groups", ())))


def input_to_json(problem: AllocationInput):
    return {
        "budget_mbps": "inf" if problem.budget == math.inf else _num(problem.budget),
        "tiles": [
            {"tile_id": t.tile_id, "priority": t.priority, "ladder_mbps": [_num(c) for c in t.ladder]}
            for t in problem.tiles
        ],
        "packed_groups": [list(g) for g in problem.packed_groups],
    }


def _num(x):
    if isinstance(x, Fraction):
        return float(x)
    return x


def plan_to_json(plan: AllocationPlan):
    return {
        "method": plan.method,
        "budget_mbps": "inf" if plan.budget == math.inf else _num(plan.budget),
        "tiles": [
            {
                "tile_id": t.tile_id,
                "level": t.level,
                "bitrate_mbps": _num(t.bitrate),
                "priority": t.priority,
                "quality": _num(t.quality),
            }
            for t in plan.tiles
        ],
        "total_bitrate_mbps": _num(plan.total_bitrate),
        "total_quality": _num(plan.total_quality),
        "residual_mbps": "inf" if plan.budget == math.inf else _num(plan.residual),
        "first_blocked": None if plan.first_blocked is None else list(plan.first_blocked),
        "blocked_level": plan.blocked_level,
    }


def load_input(path) -> AllocationInput:
    with open(path, encoding="utf-8") as fh:
        return input_from_json(json.load(fh))
