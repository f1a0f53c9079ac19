"""Exhaustive optima for small instances.

Every approximation bound in the test suites is checked against the
optimum produced here, so this module must stay independent of the
streaming code paths.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .constraints import IndependenceOracle, KnapsackSpec
from .errors import CapacityError
from .objectives import Element, ValueOracle

MAX_GROUND = 20


@dataclass(frozen=True)
class BruteForceResult:
    best_set: frozenset[Element]
    best_value: float
    subsets_enumerated: int


def brute_opt(
    oracle: ValueOracle,
    ground: Iterable[Element],
    constraint: IndependenceOracle | None = None,
    knapsacks: KnapsackSpec | None = None,
) -> BruteForceResult:
    """Enumerate all subsets and return a feasible maximizer.

    Ties are broken toward smaller cardinality, then lexicographic ids.
    Hard-capped at 20 ground elements (2^n enumeration).
    """
    order = sorted(set(ground), key=lambda e: e.id)
    n = len(order)
    if n > MAX_GROUND:
        raise CapacityError(f"ground set of {n} exceeds the cap of {MAX_GROUND}")

    best_set: frozenset[Element] = frozenset()
    best_value: float | None = None
    best_key: tuple[int, tuple[int, ...]] | None = None
    enumerated = 0
    for mask in range(1 << n):
        subset = frozenset(order[i] for i in range(n) if mask >> i & 1)
        enumerated += 1
        if constraint is not None and not constraint.is_independent(subset):
            continue
        if knapsacks is not None and not knapsacks.feasible(subset):
            continue
        value = oracle.value(subset)
        key = (len(subset), tuple(sorted(e.id for e in subset)))
        if best_value is None or value > best_value or (
            value == best_value and best_key is not None and key < best_key
        ):
            best_set, best_value, best_key = subset, value, key
    if best_value is None:
        # The empty set is always hereditary-feasible; reaching this
        # means the supplied constraint is not a legal independence system.
        raise CapacityError("no feasible subset found, not even the empty set")
    return BruteForceResult(best_set, best_value, enumerated)
