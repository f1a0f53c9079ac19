"""Chained streaming local search and its density-threshold grid.

The chain runs q swap-greedy instances in sequence: whatever instance i
discards (rejections and evictions alike) is offered to instance i+1 in
the same update, and only the last instance's discards leave for good.
Finalizing prunes every instance solution with double greedy and takes
the best candidate, which converts a monotone backbone guarantee into a
non-monotone one.

For knapsacks, a geometric grid of density thresholds brackets the
unknown optimum between the best feasible singleton m and k*m; one chain
runs per threshold, plus the singleton fallback.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Iterable

from .constraints import IndependenceOracle, KnapsackSpec
from .errors import ConfigError, DomainError
from .indstream import IndStreamInstance, backbone_alpha
from .objectives import Element, ValueOracle
from .unconstrained import DoubleGreedyConfig, unconstrained_max

# Guards ceil() against float noise at exact integer arguments.
_CEIL_EPS = 1e-9


def _ceil(x: float) -> int:
    return math.ceil(x - _CEIL_EPS)


def chain_length(alpha: float, beta: float) -> int:
    """Number of chained instances: ceil(sqrt(2*beta/alpha) + 1)."""
    if not 0.0 < alpha <= 1.0:
        raise ConfigError("alpha must lie in (0, 1]")
    if not 0.0 < beta <= 0.5:
        raise ConfigError("beta must lie in (0, 1/2]")
    return _ceil(math.sqrt(2.0 * beta / alpha) + 1.0)


def guarantee_bound(alpha: float, beta: float, d: int, eps: float) -> float:
    """End-to-end approximation factor of the chained local search.

    (1 - eps) / ((1/sqrt(a) + 1/sqrt(2b)) * (1/sqrt(a) + 2d*sqrt(a) + 1/sqrt(2b)))

    With beta = 1/2 and d = 0 this is 1/(1 + 1/sqrt(alpha))^2; with
    alpha = 1/(4p) it reproduces 1/(1+2*sqrt(p))^2 and, for d knapsacks,
    (1-eps)/(1+4p+4*sqrt(p)+d(2+1/sqrt(p))).
    """
    if not 0.0 < alpha <= 1.0:
        raise ConfigError("alpha must lie in (0, 1]")
    if not 0.0 < beta <= 0.5:
        raise ConfigError("beta must lie in (0, 1/2]")
    if d < 0:
        raise ConfigError("knapsack count must be non-negative")
    if not 0.0 <= eps < 1.0:
        raise ConfigError("eps must lie in [0, 1)")
    a = 1.0 / math.sqrt(alpha) + 1.0 / math.sqrt(2.0 * beta)
    b = a + 2.0 * d * math.sqrt(alpha)
    return (1.0 - eps) / (a * b)


@dataclass(frozen=True)
class Selection:
    elements: frozenset[Element]
    value: float

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(sorted(e.id for e in self.elements))


class ChainState:
    """q chained backbone instances with discarded-element routing."""

    def __init__(
        self,
        oracle: ValueOracle,
        constraint: IndependenceOracle,
        *,
        alpha: float | None = None,
        prune: DoubleGreedyConfig = DoubleGreedyConfig(),
        swap_margin: float = 1.0,
        rho: float | None = None,
        knapsacks: KnapsackSpec | None = None,
    ):
        resolved = backbone_alpha(constraint) if alpha is None else float(alpha)
        if resolved is None:
            raise ConfigError(
                "alpha must be given explicitly for opaque independence oracles"
            )
        self.alpha = resolved
        self.prune = prune
        self.beta = prune.beta
        self.rho = rho
        self.knapsacks = knapsacks
        self.q = chain_length(self.alpha, self.beta)
        self.oracle = oracle
        self.instances = tuple(
            IndStreamInstance(oracle, constraint, swap_margin, alpha=self.alpha)
            for _ in range(self.q)
        )
        self.processed = 0
        self.dropped = 0
        self.high_water = 0

    @property
    def held(self) -> int:
        return sum(inst.held for inst in self.instances)

    def process(self, e: Element) -> None:
        """Route one stream element through the whole chain."""
        self.processed += 1
        batch: list[Element] = [e]
        for inst in self.instances:
            discarded: list[Element] = []
            for x in sorted(batch, key=lambda el: el.id):
                if self.rho is None:
                    outcome = inst.process(x)
                else:
                    outcome = inst.process_with_threshold(x, self.rho, self.knapsacks)
                discarded.extend(outcome.discarded)
            batch = discarded
            if not batch:
                break
        self.dropped += len(batch)
        self.high_water = max(self.high_water, self.held)

    def finalize(self) -> Selection:
        """Best of all instance solutions and their pruned variants.

        Pure snapshot: the stream may continue afterwards. Ties keep the
        earliest candidate (lowest instance, constrained before pruned).
        """
        best: Selection | None = None
        for inst in self.instances:
            candidates: list[frozenset[Element]] = []
            solution = inst.current_solution()
            candidates.append(solution)
            candidates.append(unconstrained_max(self.oracle, solution, self.prune))
            record = inst.overflow_record()
            if record is not None:
                before, last = record
                candidates.append(before)
                candidates.append(frozenset({last}))
            for cand in candidates:
                value = self.oracle.value(cand)
                if best is None or value > best.value:
                    best = Selection(frozenset(cand), value)
        assert best is not None
        return best

    def stats(self) -> dict:
        return {
            "q": self.q,
            "processed": self.processed,
            "dropped": self.dropped,
            "high_water": self.high_water,
            "instances": [inst.stats() for inst in self.instances],
        }


class GridState:
    """Lazily instantiated density-threshold runs plus the max singleton.

    Runs are keyed by the absolute grid index j with threshold
    (1+eps)^j; growing the singleton maximum only retires low indices
    and opens high ones, so surviving runs never restart. The active
    window keeps one index at or below gamma so that some active
    threshold rho satisfies rho <= rho* <= (1+eps) rho.
    """

    def __init__(
        self,
        oracle: ValueOracle,
        constraint: IndependenceOracle,
        knapsacks: KnapsackSpec,
        *,
        k: int | None = None,
        eps: float = 0.2,
        alpha: float | None = None,
        prune: DoubleGreedyConfig = DoubleGreedyConfig(),
        swap_margin: float = 1.0,
    ):
        if knapsacks.d > 0:
            if eps <= 0.0:
                raise ConfigError("eps must be positive")
            if k is None:
                k = constraint.rank_hint
            if k is None or k < 1:
                raise ConfigError(
                    "k (bound on the largest feasible solution) is required"
                )
        self.oracle = oracle
        self.constraint = constraint
        self.knapsacks = knapsacks
        self.k = k
        self.eps = float(eps)
        resolved = backbone_alpha(constraint) if alpha is None else float(alpha)
        if resolved is None:
            raise ConfigError(
                "alpha must be given explicitly for opaque independence oracles"
            )
        self.alpha = resolved
        self.prune = prune
        self.swap_margin = swap_margin

        self.m = 0.0
        self.e_m: Element | None = None
        self.runs: dict[int, ChainState] = {}
        self.processed = 0
        self.retired = 0
        self.high_water = 0
        self.max_active_runs = 0
        self.max_chain_high_water = 0

    def _new_chain(self, rho: float | None) -> ChainState:
        return ChainState(
            self.oracle,
            self.constraint,
            alpha=self.alpha,
            prune=self.prune,
            swap_margin=self.swap_margin,
            rho=rho,
            knapsacks=self.knapsacks,
        )

    def gamma(self) -> float:
        """Low end of the threshold window: 2m over the bound product."""
        return 2.0 * self.m * guarantee_bound(self.alpha, self.prune.beta, self.knapsacks.d, 0.0)

    def _active_window(self) -> tuple[int, int]:
        # lo is biased down and hi up so float noise can only widen the
        # window: the run bracketing the unknown optimum must never be cut.
        base = math.log1p(self.eps)
        gamma = self.gamma()
        lo = math.floor(math.log(gamma) / base - _CEIL_EPS)
        hi = math.floor(math.log(gamma * self.k) / base + _CEIL_EPS)
        return lo, hi

    def process(self, e: Element) -> None:
        self.processed += 1
        if len(e.costs) != self.knapsacks.d:
            raise DomainError(
                f"element {e.id} carries {len(e.costs)} costs, "
                f"expected {self.knapsacks.d}"
            )
        if self.knapsacks.d == 0:
            # No budgets: a single plain chain reproduces the base search.
            if 0 not in self.runs:
                self.runs[0] = self._new_chain(rho=None)
            self.runs[0].process(e)
            self._note_memory()
            return

        if self.knapsacks.singleton_fits(e) and self.constraint.is_independent(
            frozenset({e})
        ):
            value = self.oracle.value(frozenset({e}))
            if value > self.m:
                self.m = value
                self.e_m = e

        if self.m > 0.0:
            lo, hi = self._active_window()
            for j in [j for j in self.runs if j < lo]:
                self.max_chain_high_water = max(
                    self.max_chain_high_water, self.runs[j].high_water
                )
                del self.runs[j]
                self.retired += 1
            for j in range(lo, hi + 1):
                if j not in self.runs:
                    self.runs[j] = self._new_chain(rho=(1.0 + self.eps) ** j)
        for j in sorted(self.runs):
            self.runs[j].process(e)
        self._note_memory()

    def _note_memory(self) -> None:
        self.high_water = max(self.high_water, sum(c.held for c in self.runs.values()))
        self.max_active_runs = max(self.max_active_runs, len(self.runs))
        for chain in self.runs.values():
            self.max_chain_high_water = max(self.max_chain_high_water, chain.high_water)

    def finalize(self) -> Selection:
        """Best run result versus the best feasible singleton."""
        best: Selection | None = None
        for j in sorted(self.runs):
            candidate = self.runs[j].finalize()
            if best is None or candidate.value > best.value:
                best = candidate
        if self.e_m is not None:
            singleton = frozenset({self.e_m})
            value = self.oracle.value(singleton)
            if best is None or value > best.value:
                best = Selection(singleton, value)
        if best is None:
            empty: frozenset[Element] = frozenset()
            best = Selection(empty, self.oracle.value(empty))
        return best

    def stats(self) -> dict:
        return {
            "active_runs": len(self.runs),
            "max_active_runs": self.max_active_runs,
            "retired_runs": self.retired,
            "processed": self.processed,
            "high_water": self.high_water,
            "m": self.m,
            "runs": {j: c.stats() for j, c in sorted(self.runs.items())},
        }


@dataclass
class SessionReport:
    selection: Selection
    pushed: int
    seconds_total: float
    stats: dict = field(default_factory=dict)

    @property
    def seconds_per_element(self) -> float:
        return self.seconds_total / self.pushed if self.pushed else 0.0


class StreamingSession:
    """Push-based driver around one chain or one threshold grid."""

    def __init__(
        self,
        oracle: ValueOracle,
        constraint: IndependenceOracle,
        knapsacks: KnapsackSpec | None = None,
        *,
        k: int | None = None,
        eps: float = 0.2,
        alpha: float | None = None,
        prune: DoubleGreedyConfig = DoubleGreedyConfig(),
        swap_margin: float = 1.0,
    ):
        if knapsacks is not None and knapsacks.d > 0:
            self._engine: ChainState | GridState = GridState(
                oracle,
                constraint,
                knapsacks,
                k=k,
                eps=eps,
                alpha=alpha,
                prune=prune,
                swap_margin=swap_margin,
            )
        else:
            self._engine = ChainState(
                oracle,
                constraint,
                alpha=alpha,
                prune=prune,
                swap_margin=swap_margin,
            )
        self.pushed = 0
        self.seconds_total = 0.0

    @property
    def engine(self) -> ChainState | GridState:
        return self._engine

    def push(self, e: Element) -> None:
        start = time.perf_counter()
        self._engine.process(e)
        self.seconds_total += time.perf_counter() - start
        self.pushed += 1

    def push_all(self, elements: Iterable[Element]) -> None:
        for e in elements:
            self.push(e)

    def snapshot(self) -> Selection:
        """Current best selection; does not disturb the stream state."""
        return self._engine.finalize()

    def close(self) -> SessionReport:
        return SessionReport(
            selection=self._engine.finalize(),
            pushed=self.pushed,
            seconds_total=self.seconds_total,
            stats=self._engine.stats(),
        )
