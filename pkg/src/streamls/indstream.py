"""Swap-based monotone streaming greedy over independence systems.

Each instance keeps one independent solution. A new element is taken
outright when it fits and strictly improves the objective; when it is
blocked, the cheapest single-element swap per blocked part is evicted
if the newcomer's gain beats (1 + swap_margin) times the evicted
weight. Every element the instance lets go is reported back so callers
can route it onward. The density-gated variant additionally filters by
gain per unit knapsack cost and freezes itself the first time a would-be
acceptance overflows a knapsack, exposing the pre-overflow solution and
the overflowing element as fallback candidates.
"""

from __future__ import annotations

from dataclasses import dataclass

from .constraints import (
    IndependenceOracle,
    KnapsackSpec,
    Matchoid,
    PartitionMatroid,
    UniformMatroid,
    exchange_candidates,
)
from .errors import ConfigError, PreconditionError
from .objectives import GAIN_TOL, Element, ValueOracle


def backbone_alpha(constraint: IndependenceOracle) -> float | None:
    """Declared approximation factor of the swap backbone: 1/(4p)."""
    if isinstance(constraint, Matchoid):
        return 1.0 / (4.0 * constraint.p)
    if isinstance(constraint, (UniformMatroid, PartitionMatroid)):
        return 0.25
    return None


@dataclass(frozen=True)
class ProcessOutcome:
    accepted: bool
    discarded: frozenset[Element]


class IndStreamInstance:
    """One streaming solution with swap-rule acceptance."""

    def __init__(
        self,
        oracle: ValueOracle,
        constraint: IndependenceOracle,
        swap_margin: float = 1.0,
        alpha: float | None = None,
    ):
        if swap_margin <= 0:
            raise ConfigError("swap margin must be positive")
        self.oracle = oracle
        self.constraint = constraint
        self.swap_margin = float(swap_margin)
        resolved = backbone_alpha(constraint) if alpha is None else float(alpha)
        if resolved is None:
            raise ConfigError(
                "alpha must be given explicitly for opaque independence oracles"
            )
        if not 0.0 < resolved <= 1.0:
            raise ConfigError("alpha must lie in (0, 1]")
        self.alpha = resolved

        self._solution: dict[int, Element] = {}
        self._weights: dict[int, float] = {}
        self._value = oracle.value(frozenset())
        self._frozen = False
        self._overflow: tuple[frozenset[Element], Element] | None = None

        self.processed = 0
        self.accept_events = 0
        self.discarded_total = 0
        self.high_water = 0

    # -- read-only views ---------------------------------------------------

    def current_solution(self) -> frozenset[Element]:
        return frozenset(self._solution.values())

    @property
    def current_value(self) -> float:
        return self._value

    def overflow_record(self) -> tuple[frozenset[Element], Element] | None:
        return self._overflow

    @property
    def held(self) -> int:
        """Elements currently kept alive by this instance."""
        return len(self._solution) + (1 if self._overflow else 0)

    # -- streaming updates ---------------------------------------------------

    def _note_memory(self) -> None:
        self.high_water = max(self.high_water, self.held)

    def _reject(self, e: Element) -> ProcessOutcome:
        self.discarded_total += 1
        self._note_memory()
        return ProcessOutcome(False, frozenset({e}))

    def _choose_swap(self, s: frozenset[Element], e: Element) -> frozenset[Element] | None:
        """Cheapest one-element-per-blocked-part eviction, or None."""
        per_part = exchange_candidates(self.constraint, s, e)
        if not per_part:
            return None
        evict: set[Element] = set()
        for candidates in per_part:
            evict.add(min(candidates, key=lambda x: (self._weights[x.id], x.id)))
        if not evict or not self.constraint.is_independent((s | {e}) - evict):
            return None
        return frozenset(evict)

    def _commit(
        self, e: Element, gain: float, evicted: frozenset[Element]
    ) -> ProcessOutcome:
        for x in evicted:
            del self._solution[x.id]
            del self._weights[x.id]
        self._solution[e.id] = e
        self._weights[e.id] = gain
        if evicted:
            self._value = self.oracle.value(self.current_solution())
        else:
            self._value += gain
        self.accept_events += 1
        self.discarded_total += len(evicted)
        self._note_memory()
        return ProcessOutcome(True, evicted)

    def process(self, e: Element) -> ProcessOutcome:
        """Plain swap-rule update (no density gate, no knapsacks)."""
        return self._process(e, rho=None, knapsacks=None)

    def process_with_threshold(
        self, e: Element, rho: float, knapsacks: KnapsackSpec | None
    ) -> ProcessOutcome:
        """Density-gated update; records an overflow and freezes on it."""
        return self._process(e, rho=rho, knapsacks=knapsacks)

    def _process(
        self, e: Element, rho: float | None, knapsacks: KnapsackSpec | None
    ) -> ProcessOutcome:
        self.processed += 1
        if self._frozen:
            return self._reject(e)
        if e.id in self._solution:
            raise PreconditionError(f"element {e.id} is already in the solution")

        if knapsacks is not None and not knapsacks.singleton_fits(e):
            # Cost above a unit capacity: never placeable in any solution.
            return self._reject(e)

        s = self.current_solution()
        gain = self.oracle.value(s | {e}) - self._value

        if rho is not None:
            total_cost = knapsacks.total_cost(e) if knapsacks is not None else 0.0
            if total_cost > 0.0:
                if gain / total_cost < rho:
                    return self._reject(e)
            elif gain <= GAIN_TOL:
                # Zero-cost elements pass the gate only on positive gain.
                return self._reject(e)

        if self.constraint.is_independent(s | {e}):
            if gain <= GAIN_TOL:
                return self._reject(e)
            evicted: frozenset[Element] = frozenset()
        else:
            swap = self._choose_swap(s, e)
            if swap is None:
                return self._reject(e)
            threshold = (1.0 + self.swap_margin) * sum(
                self._weights[x.id] for x in swap
            )
            if gain < threshold:
                return self._reject(e)
            evicted = swap

        if knapsacks is not None and knapsacks.d > 0:
            if not knapsacks.feasible((s | {e}) - evicted):
                # Theorem-2 fallback pair: the feasible solution just
                # before the overflow, and the overflowing element itself.
                self._overflow = (s, e)
                self._frozen = True
                return self._reject(e)

        return self._commit(e, gain, evicted)

    def stats(self) -> dict[str, int]:
        return {
            "processed": self.processed,
            "accepted": self.accept_events,
            "discarded": self.discarded_total,
            "solution_size": len(self._solution),
            "high_water": self.high_water,
        }
