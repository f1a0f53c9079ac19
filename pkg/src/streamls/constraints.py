"""Independence systems and knapsack feasibility.

Concrete matroids (uniform, partition), the matchoid composition over
overlapping grounds, an opaque predicate oracle, and d-knapsack checks
with costs normalized to unit capacity.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import AbstractSet, Callable, Mapping, Sequence

from .errors import ConfigError, DomainError, PreconditionError
from .objectives import Element

# Slack guarding float summation of normalized costs.
KNAPSACK_SLACK = 1e-12


class IndependenceOracle(ABC):
    """Hereditary feasibility test over element sets."""

    @abstractmethod
    def is_independent(self, elements: AbstractSet[Element]) -> bool: ...

    @property
    def rank_hint(self) -> int | None:
        """Optional upper bound on the size of a maximal independent set."""
        return None


class UniformMatroid(IndependenceOracle):
    """All subsets of size at most ``limit``."""

    def __init__(self, limit: int):
        if limit < 0:
            raise ConfigError("uniform matroid limit must be non-negative")
        self.limit = int(limit)

    def is_independent(self, elements: AbstractSet[Element]) -> bool:
        return len(elements) <= self.limit

    @property
    def rank_hint(self) -> int | None:
        return self.limit


class PartitionMatroid(IndependenceOracle):
    """Per-block caps over disjoint group labels.

    An element belongs to the block whose label appears in its groups;
    elements carrying none of the declared labels are unconstrained.
    """

    def __init__(self, limits: Mapping[str, int]):
        for label, limit in limits.items():
            if limit < 0:
                raise ConfigError(f"block {label!r} has negative limit")
        self._limits = dict(limits)

    def _block_of(self, e: Element) -> str | None:
        hits = [label for label in self._limits if label in e.groups]
        if len(hits) > 1:
            raise DomainError(
                f"element {e.id} lies in blocks {sorted(hits)}; blocks must be disjoint"
            )
        return hits[0] if hits else None

    def is_independent(self, elements: AbstractSet[Element]) -> bool:
        counts: dict[str, int] = {}
        for e in elements:
            block = self._block_of(e)
            if block is None:
                continue
            counts[block] = counts.get(block, 0) + 1
            if counts[block] > self._limits[block]:
                return False
        return True

    @property
    def rank_hint(self) -> int | None:
        return sum(self._limits.values())


class PredicateOracle(IndependenceOracle):
    """Opaque independence predicate for systems without structure."""

    def __init__(
        self,
        predicate: Callable[[frozenset[Element]], bool],
        rank_hint: int | None = None,
    ):
        self._predicate = predicate
        self._rank_hint = rank_hint

    def is_independent(self, elements: AbstractSet[Element]) -> bool:
        return bool(self._predicate(frozenset(elements)))

    @property
    def rank_hint(self) -> int | None:
        return self._rank_hint


class Matchoid(IndependenceOracle):
    """Composition of matroids over overlapping grounds.

    Each part is (matroid, ground) where the ground is either an id set
    or a group label; a set is independent when its restriction to every
    part ground is independent in that part. ``p`` is the maximum number
    of parts any single element belongs to — computed from id-set
    grounds, or supplied when label grounds make it unknowable upfront.
    """

    def __init__(
        self,
        parts: Sequence[tuple[IndependenceOracle, frozenset[int] | str]],
        p: int | None = None,
    ):
        if not parts:
            raise ConfigError("a matchoid needs at least one part")
        self._parts = [
            (oracle, ground if isinstance(ground, str) else frozenset(ground))
            for oracle, ground in parts
        ]
        if p is not None:
            if p < 1:
                raise ConfigError("p must be at least 1")
            self.p = int(p)
        else:
            if any(isinstance(g, str) for _, g in self._parts):
                # Label grounds are only known element by element.
                self.p = len(self._parts)
            else:
                multiplicity: dict[int, int] = {}
                for _, ground in self._parts:
                    for eid in ground:  # type: ignore[union-attr]
                        multiplicity[eid] = multiplicity.get(eid, 0) + 1
                self.p = max(multiplicity.values(), default=1)

    @property
    def parts(self) -> list[tuple[IndependenceOracle, frozenset[int] | str]]:
        return list(self._parts)

    @staticmethod
    def _in_ground(e: Element, ground: frozenset[int] | str) -> bool:
        if isinstance(ground, str):
            return ground in e.groups
        return e.id in ground

    def restrict(self, elements: AbstractSet[Element], part: int) -> frozenset[Element]:
        _, ground = self._parts[part]
        return frozenset(e for e in elements if self._in_ground(e, ground))

    def is_independent(self, elements: AbstractSet[Element]) -> bool:
        for i, (oracle, _) in enumerate(self._parts):
            if not oracle.is_independent(self.restrict(elements, i)):
                return False
        return True

    @property
    def rank_hint(self) -> int | None:
        hints = [oracle.rank_hint for oracle, _ in self._parts]
        if any(h is None for h in hints):
            return None
        return sum(h for h in hints if h is not None)


class KnapsackSpec:
    """d additive budgets; every capacity is 1 after normalization."""

    def __init__(self, d: int):
        if d < 0:
            raise ConfigError("knapsack count must be non-negative")
        self.d = int(d)

    def _costs(self, e: Element) -> tuple[float, ...]:
        if len(e.costs) != self.d:
            raise DomainError(
                f"element {e.id} carries {len(e.costs)} costs, expected {self.d}"
            )
        return e.costs

    def feasible(self, elements: AbstractSet[Element]) -> bool:
        if self.d == 0:
            for e in elements:
                self._costs(e)
            return True
        totals = [0.0] * self.d
        for e in elements:
            for j, c in enumerate(self._costs(e)):
                totals[j] += c
        return all(t <= 1.0 + KNAPSACK_SLACK for t in totals)

    def singleton_fits(self, e: Element) -> bool:
        return all(c <= 1.0 + KNAPSACK_SLACK for c in self._costs(e))

    def total_cost(self, e: Element) -> float:
        """Sum of the element's costs across all knapsacks."""
        return float(sum(self._costs(e)))


def normalize_costs(
    raw_costs: Mapping[int, Sequence[float]],
    capacities: Sequence[float],
) -> tuple[dict[int, tuple[float, ...]], set[int]]:
    """Divide raw costs by per-knapsack capacities.

    Costs above 1 after normalization are kept but the element id is
    flagged: such an element can never enter a feasible solution.
    """
    caps = [float(c) for c in capacities]
    if any(c <= 0 for c in caps):
        raise ConfigError("capacities must be positive")
    normalized: dict[int, tuple[float, ...]] = {}
    flagged: set[int] = set()
    for eid, costs in raw_costs.items():
        if len(costs) != len(caps):
            raise DomainError(
                f"element {eid} carries {len(costs)} costs, expected {len(caps)}"
            )
        row = []
        for c, cap in zip(costs, caps):
            if c < 0:
                raise DomainError(f"element {eid} has negative cost {c}")
            row.append(float(c) / cap)
        normalized[eid] = tuple(row)
        if any(c > 1.0 + KNAPSACK_SLACK for c in row):
            flagged.add(eid)
    return normalized, flagged


def exchange_candidates(
    oracle: IndependenceOracle,
    s: AbstractSet[Element],
    e: Element,
) -> list[frozenset[Element]]:
    """Single-swap repair options for adding ``e`` to independent ``s``.

    Returns [empty set] when no repair is needed, one candidate set per
    blocked matchoid part otherwise, and [] when some blocked part has
    no single-element removal that restores feasibility.
    """
    if e in s:
        raise PreconditionError(f"element {e.id} is already in the solution")
    if not oracle.is_independent(s):
        raise PreconditionError("the current solution is not independent")
    grown = set(s) | {e}
    if oracle.is_independent(grown):
        return [frozenset()]

    if isinstance(oracle, Matchoid):
        out: list[frozenset[Element]] = []
        for i, (part, ground) in enumerate(oracle.parts):
            if not Matchoid._in_ground(e, ground):
                continue
            local = oracle.restrict(grown, i)
            if part.is_independent(local):
                continue
            candidates = frozenset(
                x for x in local if x != e and part.is_independent(local - {x})
            )
            if not candidates:
                return []
            out.append(candidates)
        return out

    candidates = frozenset(x for x in s if oracle.is_independent(grown - {x}))
    if not candidates:
        return []
    return [candidates]
