"""Complexity functionals on finite function dictionaries: sup-norm covering
numbers, one-sided bracketing numbers and the separation quantity.

Exact answers use subset search over bitmask coverage sets and are gated at 20
pool elements / 20 members; larger inputs fall back to greedy set cover, whose
value is an upper bound within a factor 1 + ln(size) of the optimum.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .grid import GridFunction, common_values, positive_part_integral

__all__ = [
    "FunctionDictionary",
    "UncoverableMemberError",
    "ExactSizeError",
    "CoverResult",
    "covering_number",
    "one_sided_bracketing_number",
    "separation_quantity",
    "covering_number_detailed",
    "one_sided_bracketing_number_detailed",
    "separation_quantity_detailed",
    "default_bracket_pool",
]

EXACT_LIMIT = 20


class UncoverableMemberError(ValueError):
    """Some dictionary member admits no admissible bracket in the pool."""


class ExactSizeError(ValueError):
    """Exact enumeration requested beyond the supported size."""


@dataclass(frozen=True)
class FunctionDictionary:
    """Finite list of grid functions at a common grid level."""

    members: tuple

    def __post_init__(self) -> None:
        members = tuple(self.members)
        if not members:
            raise ValueError("dictionary must be nonempty")
        lvl = members[0].grid_level
        if any(f.grid_level != lvl for f in members):
            raise ValueError("all members must share one grid level")
        object.__setattr__(self, "members", members)

    def __len__(self) -> int:
        return len(self.members)

    @property
    def grid_level(self) -> int:
        return self.members[0].grid_level


@dataclass(frozen=True)
class CoverResult:
    value: float
    exact: bool
    selection: tuple


def _exact_min_cover(masks: list[int], full: int) -> list[int]:
    """Minimal-cardinality cover by breadth-first search over coverage states."""
    frontier = {0: []}
    for _size in range(1, len(masks) + 1):
        nxt: dict[int, list[int]] = {}
        for state, chosen in frontier.items():
            for i, mask in enumerate(masks):
                if chosen and i <= chosen[-1]:
                    continue
                new = state | mask
                if new == full:
                    return chosen + [i]
                if new not in nxt:
                    nxt[new] = chosen + [i]
        frontier = nxt
        if not frontier:
            break
    raise UncoverableMemberError("pool cannot cover the dictionary")


def _exact_min_weight_cover(masks: list[int], weights: list[float], full: int) -> list[int]:
    """Minimal-weight cover by Dijkstra over coverage states."""
    best: dict[int, float] = {0: 0.0}
    heap = [(0.0, 0, [])]
    while heap:
        cost, state, chosen = heapq.heappop(heap)
        if state == full:
            return chosen
        if cost > best.get(state, math.inf):
            continue
        for i, mask in enumerate(masks):
            if chosen and i <= chosen[-1]:
                continue
            new = state | mask
            new_cost = cost + weights[i]
            if new_cost < best.get(new, math.inf):
                best[new] = new_cost
                heapq.heappush(heap, (new_cost, new, chosen + [i]))
    raise UncoverableMemberError("pool cannot cover the dictionary")


def _greedy_complete(masks: list[int], weights: list[float] | None, full: int, first: int) -> list[int]:
    """Complete a cover greedily from a forced first pick, then drop redundancies."""
    chosen = [first]
    covered = masks[first]
    while covered != full:
        best_i = -1
        best_score = math.inf
        for i, mask in enumerate(masks):
            gain = bin(mask & ~covered).count("1")
            if gain == 0:
                continue
            score = (weights[i] if weights is not None else 1.0) / gain
            if score < best_score - 1e-15:
                best_score = score
                best_i = i
        if best_i < 0:
            raise UncoverableMemberError("pool cannot cover the dictionary")
        chosen.append(best_i)
        covered |= masks[best_i]
    # prune: remove redundant picks, most expensive first
    for i in sorted(chosen, key=lambda k: -(weights[k] if weights is not None else 1.0)):
        rest = [j for j in chosen if j != i]
        rest_cover = 0
        for j in rest:
            rest_cover |= masks[j]
        if rest_cover == full:
            chosen = rest
    return chosen


def _greedy_cover(masks: list[int], weights: list[float] | None, full: int) -> list[int]:
    """Multi-start pruned greedy set cover; ties broken by lowest index.

    Each pool element is tried as the forced first pick, the rest of the cover
    is filled by weight-per-gain greedy and pruned of redundant picks; the
    cheapest completed cover wins.  Still an upper bound on the optimum, but
    exact on most small instances.
    """
    best: list[int] | None = None
    best_weight = math.inf
    for first, mask in enumerate(masks):
        if mask == 0:
            continue
        chosen = _greedy_complete(masks, weights, full, first)
        total = sum((weights[i] if weights is not None else 1.0) for i in chosen)
        if total < best_weight - 1e-15:
            best_weight = total
            best = chosen
    if best is None:
        raise UncoverableMemberError("pool cannot cover the dictionary")
    return best


def _sup_distance(f: GridFunction, g: GridFunction) -> float:
    a, b, _ = common_values(f, g)
    return float(np.abs(a - b).max())


def _check_coverage(masks: list[int], n_members: int, what: str) -> None:
    union = 0
    for m in masks:
        union |= m
    missing = [k for k in range(n_members) if not (union >> k) & 1]
    if missing:
        raise UncoverableMemberError(f"members {missing} have no admissible {what}")


def covering_number_detailed(dict_: FunctionDictionary, eps: float, exact: bool) -> CoverResult:
    if not eps > 0:
        raise ValueError("eps must be positive")
    members = dict_.members
    n = len(members)
    masks = []
    for center in members:
        mask = 0
        for k, f in enumerate(members):
            if _sup_distance(center, f) <= eps:
                mask |= 1 << k
        masks.append(mask)
    full = (1 << n) - 1
    if exact:
        if n > EXACT_LIMIT:
            raise ExactSizeError(f"exact covering limited to {EXACT_LIMIT} members")
        sel = _exact_min_cover(masks, full)
    else:
        sel = _greedy_cover(masks, None, full)
    return CoverResult(float(len(sel)), exact, tuple(sel))


def covering_number(dict_: FunctionDictionary, eps: float, exact: bool = True) -> int:
    """Minimal number of closed sup-norm eps-balls centered at members covering the dictionary."""
    return int(covering_number_detailed(dict_, eps, exact).value)


def _bracket_masks(dict_: FunctionDictionary, delta: float, pool: FunctionDictionary) -> list[int]:
    masks = []
    for ell in pool.members:
        mask = 0
        for k, f in enumerate(dict_.members):
            a, b, _ = common_values(ell, f)
            if np.all(a <= b) and float((b - a).mean()) <= delta:
                mask |= 1 << k
        masks.append(mask)
    _check_coverage(masks, len(dict_.members), f"lower bracket at tolerance {delta}")
    return masks


def one_sided_bracketing_number_detailed(
    dict_: FunctionDictionary, delta: float, bracket_pool: FunctionDictionary
) -> CoverResult:
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    masks = _bracket_masks(dict_, delta, bracket_pool)
    full = (1 << len(dict_.members)) - 1
    exact = len(bracket_pool) <= EXACT_LIMIT and len(dict_.members) <= EXACT_LIMIT
    sel = _exact_min_cover(masks, full) if exact else _greedy_cover(masks, None, full)
    return CoverResult(float(len(sel)), exact, tuple(sel))


def one_sided_bracketing_number(
    dict_: FunctionDictionary, delta: float, bracket_pool: FunctionDictionary
) -> int:
    """Smallest number of pool functions lower-bracketing every member within delta."""
    return int(one_sided_bracketing_number_detailed(dict_, delta, bracket_pool).value)


def separation_quantity_detailed(
    dict_: FunctionDictionary, f0: GridFunction, n: float, bracket_pool: FunctionDictionary
) -> CoverResult:
    if not n > 0:
        raise ValueError("n must be positive")
    masks = []
    for ell in bracket_pool.members:
        mask = 0
        for k, f in enumerate(dict_.members):
            a, b, _ = common_values(ell, f)
            if np.all(a <= b):
                mask |= 1 << k
        masks.append(mask)
    _check_coverage(masks, len(dict_.members), "lower bracket")
    weights = [math.exp(-n * positive_part_integral(ell, f0)) for ell in bracket_pool.members]
    full = (1 << len(dict_.members)) - 1
    exact = len(bracket_pool) <= EXACT_LIMIT and len(dict_.members) <= EXACT_LIMIT
    sel = (
        _exact_min_weight_cover(masks, weights, full)
        if exact
        else _greedy_cover(masks, weights, full)
    )
    return CoverResult(float(sum(weights[i] for i in sel)), exact, tuple(sel))


def separation_quantity(
    dict_: FunctionDictionary, f0: GridFunction, n: float, bracket_pool: FunctionDictionary
) -> float:
    """Minimized sum of exp(-n * integral((l - f0)_+)) over lower-bracket families from the pool."""
    return separation_quantity_detailed(dict_, f0, n, bracket_pool).value


def default_bracket_pool(dict_: FunctionDictionary) -> FunctionDictionary:
    """The dictionary itself plus all pairwise pointwise minima (deduplicated)."""
    pool = list(dict_.members)
    seen = set(pool)
    for i, f in enumerate(dict_.members):
        for g in dict_.members[i + 1 :]:
            h = f.pointwise_min(g)
            if h not in seen:
                seen.add(h)
                pool.append(h)
    return FunctionDictionary(tuple(pool))
