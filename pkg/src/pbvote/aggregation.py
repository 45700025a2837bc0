"""Aggregation rules over proxy valuations.

Two rules are provided.  Greedy funds projects in decreasing total score,
skipping anything that no longer fits.  Equal shares gives every voter an
identical virtual budget and funds the project its supporters can cover at
the lowest price per unit of utility, charging each supporter
min(budget, price * value); when no project can be covered by supporters
alone, a second phase spends leftover budgets by treating every voter as an
infinitesimal supporter (the exact limit of perturbing all valuations
upward, computed without any epsilon).

All equal-shares arithmetic uses exact rationals; greedy uses integers.
Ties are always broken by lower price/score, then lower cost, then lower
project id, so outcomes are deterministic and platform independent.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Sequence

import numpy as np

from .core import (
    ComputationError,
    FundingStep,
    Instance,
    Outcome,
    ValuationProfile,
    project_scores,
)

_ZERO = Fraction(0)


def aggregate_greedy(instance: Instance, valuations: ValuationProfile) -> Outcome:
    """Fund projects in decreasing total score while they fit the remaining
    budget (ties: cheaper first, then lower id)."""
    if valuations.n == 0:
        warnings.warn("empty profile: greedy returns no funded projects", stacklevel=2)
        return Outcome(frozenset(), "greedy", Fraction(instance.budget))
    scores = project_scores(valuations)
    order = sorted(
        instance.project_ids, key=lambda p: (-scores[p], instance.cost(p), p)
    )
    remaining = instance.budget
    funded = []
    for pid in order:
        cost = instance.cost(pid)
        if cost <= remaining:
            funded.append(pid)
            remaining -= cost
    return Outcome(frozenset(funded), "greedy", Fraction(remaining))


def _capped_price(
    pairs: Sequence[tuple[Fraction, int]], target: Fraction
) -> Fraction:
    """Minimal x with sum_i min(budget_i, x * weight_i) == target.

    Caller guarantees target > 0 and sum of budgets >= target.  Solved
    exactly by sorting the cap breakpoints budget/weight and walking the
    piecewise-linear segments.
    """
    items = sorted((b / w, b, w) for b, w in pairs)
    paid = _ZERO
    weight = sum(w for _, _, w in items)
    for ratio, budget, w in items:
        x = (target - paid) / weight
        if x <= ratio:
            return x
        paid += budget
        weight -= w
    # every contribution capped: budgets sum exactly to target
    return items[-1][0]


def mes_rho(
    cost: int, values: Sequence[int], budgets: Sequence[Fraction]
) -> Fraction | None:
    """Equal-shares price of one project given its valuation column and the
    voters' remaining budgets.

    Returns the minimal rho with sum_i min(budget_i, rho * value_i) == cost,
    or None when the supporters' combined budgets cannot cover the cost.
    """
    pairs = [(b, int(v)) for b, v in zip(budgets, values) if v > 0]
    if sum(b for b, _ in pairs) < cost:
        return None
    return _capped_price(pairs, Fraction(cost))


@dataclass
class MesState:
    """Mutable ledger of one equal-shares run: per-voter remaining budgets,
    the funding trace, and per-project payment breakdowns."""

    voter_ids: tuple[str, ...]
    budgets: list[Fraction]
    steps: list[FundingStep] = field(default_factory=list)
    payments: dict[str, dict[str, Fraction]] = field(default_factory=dict)

    def copy(self) -> "MesState":
        return MesState(
            voter_ids=self.voter_ids,
            budgets=list(self.budgets),
            steps=list(self.steps),
            payments={p: dict(by) for p, by in self.payments.items()},
        )

    @property
    def funded(self) -> frozenset[str]:
        return frozenset(s.project for s in self.steps)

    def leftover(self) -> Fraction:
        return sum(self.budgets, _ZERO)

    def charge(self, project: str, shares: dict[int, Fraction], price: Fraction, phase: int):
        ledger = {}
        for i, amount in shares.items():
            if amount < 0 or amount > self.budgets[i]:
                raise ComputationError(
                    f"payment {amount} of voter {self.voter_ids[i]} for "
                    f"{project} exceeds their remaining budget"
                )
            self.budgets[i] -= amount
            if amount:
                ledger[self.voter_ids[i]] = amount
        self.payments[project] = ledger
        self.steps.append(FundingStep(project, price, phase))


class _Candidates:
    """Per-project supporter columns with cached prices.

    A project's price can only rise as budgets shrink, and stays exact while
    none of its supporters pays anything, so cached values double as lower
    bounds for a best-first scan and as exact answers when untouched.
    """

    def __init__(self, instance: Instance, valuations: ValuationProfile):
        self.cost = {p: instance.cost(p) for p in valuations.project_ids}
        self.supporters: dict[str, list[tuple[int, int]]] = {}
        mat = valuations.matrix
        for j, pid in enumerate(valuations.project_ids):
            col = mat[:, j]
            self.supporters[pid] = [(i, int(col[i])) for i in np.nonzero(col)[0]]
        self.bound: dict[str, Fraction] = {p: _ZERO for p in valuations.project_ids}
        self.stamp: dict[str, int] = {p: -1 for p in valuations.project_ids}

    def price(self, pid: str, budgets: list[Fraction]) -> Fraction | None:
        supp = self.supporters[pid]
        if sum(budgets[i] for i, _ in supp) < self.cost[pid]:
            return None
        pairs = [(budgets[i], v) for i, v in supp]
        return _capped_price(pairs, Fraction(self.cost[pid]))


def mes_phase1(instance: Instance, valuations: ValuationProfile) -> MesState:
    """Run the supporter-funded phase of equal shares to exhaustion."""
    n = valuations.n
    state = MesState(
        voter_ids=valuations.voter_ids,
        budgets=[Fraction(instance.budget, n) for _ in range(n)] if n else [],
    )
    if n == 0:
        return state
    cands = _Candidates(instance, valuations)
    remaining = set(valuations.project_ids)
    paid_mark = [0] * n  # number of funded projects when each voter last paid
    while remaining:
        # Best-first scan over cached price bounds: budgets only shrink, so
        # prices only rise, and once the bound of the next candidate exceeds
        # the best exact price found no later candidate can win.  A cached
        # price is still exact while none of the project's supporters paid.
        best: tuple[Fraction, int, str] | None = None
        dead = []
        for pid in sorted(
            remaining, key=lambda p: (cands.bound[p], cands.cost[p], p)
        ):
            if best is not None and cands.bound[pid] > best[0]:
                break
            supp = cands.supporters[pid]
            if cands.stamp[pid] >= 0 and all(
                paid_mark[i] <= cands.stamp[pid] for i, _ in supp
            ):
                price = cands.bound[pid]
            else:
                cands.stamp[pid] = len(state.steps)
                price = cands.price(pid, state.budgets)
                if price is None:
                    # supporters can never cover the cost again
                    dead.append(pid)
                    continue
                cands.bound[pid] = price
            key = (price, cands.cost[pid], pid)
            if best is None or key < best:
                best = key
        for pid in dead:
            remaining.discard(pid)
        if best is None:
            break
        price, _, pid = best
        shares = {
            i: min(state.budgets[i], price * v) for i, v in cands.supporters[pid]
        }
        state.charge(pid, shares, price, phase=1)
        for i in shares:
            paid_mark[i] = len(state.steps)
        remaining.discard(pid)
    return state


def mes_completion(
    instance: Instance, valuations: ValuationProfile, state: MesState
) -> MesState:
    """Spend leftover budgets as if every voter had infinitesimal value for
    every project.

    For each unfunded project the supporters contribute their full remaining
    budgets; the shortfall is split over the non-supporters, each paying
    min(budget, x) for the minimal uniform cap x that covers it.  Projects
    are funded in increasing order of x (ties: cheaper, then lower id) until
    none can be covered.  Requires phase 1 to have terminated.
    """
    state = state.copy()
    if not state.voter_ids:
        return state
    pids = valuations.project_ids
    index = {pid: j for j, pid in enumerate(pids)}
    mat = valuations.matrix
    remaining = set(pids) - state.funded
    while remaining:
        best = None
        for pid in sorted(remaining, key=lambda p: (instance.cost(p), p)):
            col = mat[:, index[pid]]
            supp_total = sum(
                (state.budgets[i] for i in range(len(col)) if col[i] > 0), _ZERO
            )
            slack = instance.cost(pid) - supp_total
            if slack <= 0:
                raise ComputationError(
                    f"project {pid!r} is still supporter-affordable; "
                    "run the supporter phase to exhaustion first"
                )
            others = [
                (state.budgets[i], 1) for i in range(len(col)) if col[i] == 0
            ]
            if sum(b for b, _ in others) < slack:
                continue
            x = _capped_price(others, slack)
            key = (x, instance.cost(pid), pid)
            if best is None or key < best:
                best = key
        if best is None:
            break
        x, _, pid = best
        col = mat[:, index[pid]]
        shares = {}
        for i in range(len(col)):
            amount = state.budgets[i] if col[i] > 0 else min(state.budgets[i], x)
            if amount:
                shares[i] = amount
        state.charge(pid, shares, x, phase=2)
        remaining.discard(pid)
    return state


def _mes_outcome(instance: Instance, state: MesState) -> Outcome:
    return Outcome(
        funded=state.funded,
        rule="mes",
        leftover=state.leftover() if state.voter_ids else Fraction(instance.budget),
        payments={p: dict(by) for p, by in state.payments.items()},
        trace=tuple(state.steps),
    )


def aggregate_mes(instance: Instance, valuations: ValuationProfile) -> Outcome:
    """Equal shares with the leftover-spending completion applied."""
    if valuations.n == 0:
        warnings.warn(
            "empty profile: equal shares returns no funded projects", stacklevel=2
        )
        return Outcome(frozenset(), "mes", Fraction(instance.budget), payments={})
    state = mes_phase1(instance, valuations)
    state = mes_completion(instance, valuations, state)
    return _mes_outcome(instance, state)


DEFAULT_TABLE_CELLS = 8_000_000


def optimal_welfare_outcome(
    instance: Instance,
    valuations: ValuationProfile,
    *,
    max_table_cells: int = DEFAULT_TABLE_CELLS,
) -> Outcome:
    """Budget-feasible set maximizing total score, via an exact knapsack
    dynamic program over the budget.

    Among maximizers, returns the lexicographically smallest funded set
    (compared as sorted id tuples).  Costs are divided by their gcd and the
    budget is clipped to the total cost, which keeps the table small for
    realistic price grids; beyond ``max_table_cells`` a ComputationError is
    raised.
    """
    pids = sorted(instance.project_ids)
    scores = project_scores(valuations)
    costs = [instance.cost(p) for p in pids]
    m = len(pids)
    if m == 0:
        return Outcome(frozenset(), "optimal", Fraction(instance.budget))
    g = gcd(*costs)
    scaled = [c // g for c in costs]
    cap = min(instance.budget // g, sum(scaled))
    if (m + 1) * (cap + 1) > max_table_cells:
        raise ComputationError(
            f"knapsack table of {(m + 1) * (cap + 1)} cells exceeds the cap "
            f"{max_table_cells}; raise max_table_cells to proceed"
        )
    # best[j][b] = max score achievable with projects j.. and budget b
    best = np.zeros((m + 1, cap + 1), dtype=np.int64)
    for j in range(m - 1, -1, -1):
        best[j] = best[j + 1]
        c, v = scaled[j], scores[pids[j]]
        if c <= cap:
            np.maximum(best[j, c:], best[j + 1, : cap - c + 1] + v, out=best[j, c:])
    target = int(best[0, cap])
    funded = []
    b = cap
    for j in range(m):
        if target == 0:
            break
        c, v = scaled[j], scores[pids[j]]
        if c <= b and v + best[j + 1, b - c] == target:
            funded.append(pids[j])
            b -= c
            target -= v
    leftover = instance.budget - instance.total_cost(funded)
    return Outcome(frozenset(funded), "optimal", Fraction(leftover))


RULES = {
    "greedy": aggregate_greedy,
    "mes": aggregate_mes,
    "optimal": optimal_welfare_outcome,
}


def aggregate(rule: str, instance: Instance, valuations: ValuationProfile) -> Outcome:
    try:
        fn = RULES[rule]
    except KeyError:
        raise ComputationError(f"unknown aggregation rule {rule!r}") from None
    return fn(instance, valuations)
