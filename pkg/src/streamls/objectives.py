"""Stream elements and submodular value oracles.

The oracles here are the utility functions the streaming optimizers
maximize: set coverage, weighted graph cut, log-determinant of a DPP
kernel, the segment-conditional DPP used for sequential data, and a
sampled approximation for additively decomposable objectives.
"""

from __future__ import annotations

import math
import random
import warnings
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import AbstractSet, Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DomainError, PreconditionError

# Marginal gains inside this band are treated as zero by selection rules.
GAIN_TOL = 1e-12

# Pivots below this floor are clamped so near-singular kernels yield a
# large negative log-det instead of -inf (streaming runs stay alive).
DET_FLOOR = 1e-300

_SYMMETRY_TOL = 1e-9
_PSD_EIG_TOL = -1e-8


@dataclass(frozen=True)
class Element:
    """One stream item.

    Identity is the integer ``id`` alone; ids must be unique within a
    stream. ``costs`` holds one entry per configured knapsack, already
    normalized to capacity 1.
    """

    id: int
    features: tuple[float, ...] | None = None
    costs: tuple[float, ...] = ()
    groups: frozenset[str] = frozenset()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Element):
            return NotImplemented
        return self.id == other.id

    def __hash__(self) -> int:
        return hash(self.id)

    def total_cost(self) -> float:
        return float(sum(self.costs))


def ids_of(elements: Iterable[Element]) -> frozenset[int]:
    return frozenset(e.id for e in elements)


class ValueOracle(ABC):
    """A non-negative submodular set function f over stream elements."""

    ground_size_hint: int | None = None

    @abstractmethod
    def value(self, elements: Iterable[Element]) -> float:
        """Return f(S). Must be deterministic for a fixed oracle."""

    def gain(self, e: Element, base: AbstractSet[Element]) -> float:
        """Marginal gain f(S + e) - f(S). May be negative."""
        if e in base:
            raise PreconditionError(f"element {e.id} already in the base set")
        return self.value(set(base) | {e}) - self.value(base)


class ModularOracle(ValueOracle):
    """Additive weights; the equality case of diminishing returns."""

    def __init__(self, weights: Mapping[int, float]):
        self._weights = dict(weights)
        self.ground_size_hint = len(self._weights)

    def value(self, elements: Iterable[Element]) -> float:
        total = 0.0
        for e in elements:
            if e.id not in self._weights:
                raise DomainError(f"element {e.id} has no weight")
            total += self._weights[e.id]
        return total


class CoverageOracle(ValueOracle):
    """Weighted set coverage: f(S) = total weight of items covered by S."""

    def __init__(
        self,
        covers: Mapping[int, Iterable[Hashable]],
        item_weights: Mapping[Hashable, float] | None = None,
    ):
        self._covers = {eid: frozenset(items) for eid, items in covers.items()}
        self._item_weights = dict(item_weights) if item_weights else None
        self.ground_size_hint = len(self._covers)

    def value(self, elements: Iterable[Element]) -> float:
        covered: set[Hashable] = set()
        for e in elements:
            if e.id not in self._covers:
                raise DomainError(f"element {e.id} not in coverage universe")
            covered |= self._covers[e.id]
        if self._item_weights is None:
            return float(len(covered))
        return float(sum(self._item_weights.get(item, 1.0) for item in covered))


class CutOracle(ValueOracle):
    """Weighted undirected cut: f(S) = weight of edges leaving S.

    Symmetric and non-monotone; f(empty) = f(all nodes) = 0.
    """

    def __init__(
        self,
        edges: Iterable[tuple[int, int, float]],
        nodes: Iterable[int] | None = None,
    ):
        self._edges = [(int(u), int(v), float(w)) for u, v, w in edges]
        known = set() if nodes is None else set(nodes)
        for u, v, _ in self._edges:
            known.add(u)
            known.add(v)
        self._nodes = frozenset(known)
        self.ground_size_hint = len(self._nodes)

    def value(self, elements: Iterable[Element]) -> float:
        inside = ids_of(elements)
        unknown = inside - self._nodes
        if unknown:
            raise DomainError(f"elements {sorted(unknown)} are not graph nodes")
        total = 0.0
        for u, v, w in self._edges:
            if (u in inside) != (v in inside):
                total += w
        return total


class WeightedSumOracle(ValueOracle):
    """Non-negative combination of oracles (submodularity is preserved)."""

    def __init__(self, terms: Sequence[tuple[float, ValueOracle]]):
        for coeff, _ in terms:
            if coeff < 0:
                raise ConfigError("mixture coefficients must be non-negative")
        self._terms = list(terms)

    def value(self, elements: Iterable[Element]) -> float:
        s = set(elements)
        return sum(coeff * oracle.value(s) for coeff, oracle in self._terms)


# ---------------------------------------------------------------------------
# DPP kernels and log-det objectives
# ---------------------------------------------------------------------------


class DppKernel:
    """A positive semidefinite similarity kernel indexed by element id.

    ``offset`` is added to every log-det value so the objective can be
    kept non-negative on its intended domain.
    """

    def __init__(
        self,
        matrix: np.ndarray,
        offset: float = 0.0,
        ids: Sequence[int] | None = None,
    ):
        m = np.asarray(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ConfigError("kernel matrix must be square")
        if not np.allclose(m, m.T, atol=_SYMMETRY_TOL, rtol=0.0):
            raise ConfigError("kernel matrix is not symmetric")
        if m.shape[0] > 0 and float(np.linalg.eigvalsh(m).min()) < _PSD_EIG_TOL:
            raise ConfigError("kernel matrix is not positive semidefinite")
        if offset < 0:
            raise ConfigError("offset must be non-negative")
        self.matrix = m
        self.offset = float(offset)
        self.ids = tuple(range(m.shape[0])) if ids is None else tuple(ids)
        if len(self.ids) != m.shape[0]:
            raise ConfigError("id list length must match the kernel size")
        self._index = {eid: i for i, eid in enumerate(self.ids)}
        if len(self._index) != len(self.ids):
            raise ConfigError("kernel ids must be distinct")
        # Normalizers for the sequential conditional, keyed by
        # (previous-selection ids, segment ids); writes are idempotent.
        self._norm_cache: dict[tuple[frozenset[int], frozenset[int]], float] = {}

    def indices(self, elements: Iterable[Element]) -> list[int]:
        out = []
        for e in elements:
            if e.id not in self._index:
                raise DomainError(f"element {e.id} is not indexed by the kernel")
            out.append(self._index[e.id])
        return out

    def submatrix(self, elements: Iterable[Element]) -> np.ndarray:
        idx = self.indices(elements)
        return self.matrix[np.ix_(idx, idx)]


def load_kernel(path: str, offset: float = 0.0) -> DppKernel:
    """Read a dense kernel: first line n, then n rows of n reals."""
    with open(path) as fh:
        tokens = fh.read().split()
    if not tokens:
        raise ConfigError(f"{path}: empty kernel file")
    n = int(tokens[0])
    values = [float(t) for t in tokens[1:]]
    if len(values) != n * n:
        raise ConfigError(f"{path}: expected {n * n} entries, found {len(values)}")
    return DppKernel(np.array(values).reshape(n, n), offset=offset)


def _logdet_floored(matrix: np.ndarray, floor: float = DET_FLOOR) -> tuple[float, bool]:
    """log det of a PSD matrix via pivoted elimination with a pivot floor.

    Returns (value, clamped). A fast Cholesky path covers the common
    well-conditioned case; the elimination fallback clamps tiny pivots
    to ``floor`` instead of failing.
    """
    n = matrix.shape[0]
    if n == 0:
        return 0.0, False  # det of the empty matrix is 1
    try:
        chol = np.linalg.cholesky(matrix)
        diag = np.diag(chol)
        if np.all(diag * diag >= floor):
            return float(2.0 * np.sum(np.log(diag))), False
    except np.linalg.LinAlgError:
        pass
    m = np.array(matrix, dtype=float, copy=True)
    total = 0.0
    clamped = False
    for j in range(n):
        pivot = m[j, j]
        if pivot < floor:
            pivot = floor
            clamped = True
        total += math.log(pivot)
        if j + 1 < n:
            m[j + 1 :, j + 1 :] -= np.outer(m[j + 1 :, j], m[j, j + 1 :]) / pivot
    return total, clamped


def logdet_value(kernel: DppKernel, elements: Iterable[Element]) -> float:
    """log det of the kernel restricted to ``elements``, plus the offset.

    Near-singular submatrices are clamped at the pivot floor and flagged
    with a RuntimeWarning rather than raised.
    """
    sub = kernel.submatrix(elements)
    value, clamped = _logdet_floored(sub)
    if clamped:
        warnings.warn(
            "log-det pivot clamped at floor; kernel submatrix is near singular",
            RuntimeWarning,
            stacklevel=2,
        )
    return value + kernel.offset


class LogDetOracle(ValueOracle):
    """f(S) = log det(L_S) + offset; non-monotone submodular."""

    def __init__(self, kernel: DppKernel):
        self.kernel = kernel
        self.ground_size_hint = len(kernel.ids)

    def value(self, elements: Iterable[Element]) -> float:
        return logdet_value(self.kernel, elements)


def suggest_logdet_offset(matrix: np.ndarray) -> float:
    """Heuristic non-negativity offset: singleton and pair log-dets only.

    Global minimization over all subsets is intractable, so the offset
    is max(0, -min sampled log-det) + 1.
    """
    m = np.asarray(matrix, dtype=float)
    n = m.shape[0]
    worst = 0.0
    for i in range(n):
        worst = min(worst, _logdet_floored(m[np.ix_([i], [i])])[0])
        for j in range(i + 1, n):
            worst = min(worst, _logdet_floored(m[np.ix_([i, j], [i, j])])[0])
    return max(0.0, -worst) + 1.0


def seqdpp_conditional_value(
    kernel: DppKernel,
    s_t: AbstractSet[Element],
    s_prev: AbstractSet[Element],
    segment: AbstractSet[Element],
) -> float:
    """Conditional log-probability of picking ``s_t`` from a segment.

    Computes log det(L_{s_t + s_prev}) - log det(I_t + L_{s_prev + segment})
    where I_t is diagonal with zeros on the s_prev positions and ones on
    the segment positions. The normalizer depends only on (s_prev,
    segment) and is cached on the kernel.
    """
    if s_prev & segment:
        raise PreconditionError("previous selection overlaps the segment")
    if not s_t <= segment:
        raise PreconditionError("selection must lie inside the segment")
    numerator, _ = _logdet_floored(kernel.submatrix(set(s_t) | set(s_prev)))

    key = (ids_of(s_prev), ids_of(segment))
    normalizer = kernel._norm_cache.get(key)
    if normalizer is None:
        ordered = sorted(set(s_prev) | set(segment), key=lambda e: e.id)
        sub = kernel.submatrix(ordered)
        prev_ids = ids_of(s_prev)
        diag = np.array([0.0 if e.id in prev_ids else 1.0 for e in ordered])
        normalizer, _ = _logdet_floored(sub + np.diag(diag))
        kernel._norm_cache[key] = normalizer
    return numerator - normalizer


class SequentialDppOracle(ValueOracle):
    """Within-segment objective conditioned on the previous selection.

    f(S) = log det(L_{S + prev}) - log det(L_prev) + offset, which has
    the same marginal gains as the full conditional (the normalizer is
    constant per segment) and satisfies f(empty) = offset >= 0.
    """

    def __init__(self, kernel: DppKernel, prev: AbstractSet[Element] = frozenset()):
        self.kernel = kernel
        self.prev = frozenset(prev)
        self._base, _ = _logdet_floored(kernel.submatrix(self.prev))
        self.ground_size_hint = len(kernel.ids)

    def value(self, elements: Iterable[Element]) -> float:
        chosen = set(elements)
        overlap = chosen & self.prev
        if overlap:
            raise DomainError(
                f"elements {sorted(e.id for e in overlap)} are already conditioned on"
            )
        raw, clamped = _logdet_floored(self.kernel.submatrix(chosen | self.prev))
        if clamped:
            warnings.warn(
                "log-det pivot clamped at floor; kernel submatrix is near singular",
                RuntimeWarning,
                stacklevel=2,
            )
        return raw - self._base + self.kernel.offset


# ---------------------------------------------------------------------------
# Decomposable objectives and their sampled estimates
# ---------------------------------------------------------------------------

ComponentFn = Callable[[frozenset[Element]], float]


class DecomposableOracle(ValueOracle):
    """Mean-of-components objective estimated on a uniform sample W.

    The exact objective is the mean of per-element components over the
    whole ground set; the oracle evaluates the mean over W instead.
    Components are rescaled once at construction so sampled magnitudes
    stay within 1.
    """

    def __init__(
        self,
        components: Mapping[int, ComponentFn],
        ground: Sequence[Element],
        sample: Sequence[Element],
        *,
        scale: float | None = None,
        probe_rng: random.Random | None = None,
    ):
        if not sample:
            raise ConfigError("sample W must be non-empty")
        self._components = dict(components)
        self._ground = list(ground)
        for e in self._ground:
            if e.id not in self._components:
                raise DomainError(f"ground element {e.id} has no component")
        for e in sample:
            if e.id not in self._components:
                raise DomainError(f"sampled element {e.id} has no component")
        self._sample = list(sample)
        self._scale = self._probe_scale(probe_rng) if scale is None else float(scale)
        if self._scale <= 0:
            self._scale = 1.0
        self.ground_size_hint = len(self._components)

    def _probe_scale(self, rng: random.Random | None) -> float:
        rng = rng or random.Random(0)
        probes: list[frozenset[Element]] = [frozenset(), frozenset(self._ground)]
        for _ in range(16):
            probes.append(frozenset(e for e in self._ground if rng.random() < 0.5))
        worst = 0.0
        for fn in self._components.values():
            for s in probes:
                worst = max(worst, abs(fn(s)))
        return worst

    @property
    def sample(self) -> list[Element]:
        return list(self._sample)

    @property
    def scale(self) -> float:
        return self._scale

    def component_value(self, eid: int, elements: AbstractSet[Element]) -> float:
        if eid not in self._components:
            raise DomainError(f"element {eid} has no component")
        return self._components[eid](frozenset(elements)) / self._scale

    def value(self, elements: Iterable[Element]) -> float:
        s = frozenset(elements)
        return sum(self.component_value(e.id, s) for e in self._sample) / len(
            self._sample
        )

    def exact_value(self, elements: Iterable[Element]) -> float:
        """Mean over every ground component; the quantity ``value`` estimates."""
        s = frozenset(elements)
        return sum(self.component_value(e.id, s) for e in self._ground) / len(
            self._ground
        )


def reservoir_sample(
    position: int,
    sample: list[Element],
    capacity: int,
    e: Element,
    rng: random.Random,
) -> list[Element]:
    """Single-pass uniform reservoir update for the element at ``position``.

    ``position`` is 1-based. While the reservoir is short of capacity the
    element is appended; afterwards it replaces a uniform slot with
    probability capacity / position.
    """
    if capacity < 1:
        raise ConfigError("reservoir capacity must be at least 1")
    if position < 1:
        raise PreconditionError("stream position is 1-based")
    if len(sample) < capacity:
        sample.append(e)
        return sample
    slot = rng.randrange(position)
    if slot < capacity:
        sample[slot] = e
    return sample


def sample_size_bound(k: int, eps: float, delta: float, ground_size: float) -> int:
    """Sample size sufficient for eps-accurate decomposable estimates.

    ceil((2 k^2 ln(2/delta) + 2 k^3 ln(ground_size)) / eps^2).
    """
    if k < 1:
        raise ConfigError("k must be at least 1")
    if not 0.0 < eps <= 1.0 or not 0.0 < delta < 1.0:
        raise ConfigError("eps must lie in (0, 1] and delta in (0, 1)")
    if ground_size < 2:
        raise ConfigError("ground size must be at least 2")
    raw = (2.0 * k * k * math.log(2.0 / delta) + 2.0 * k**3 * math.log(ground_size))
    return math.ceil(raw / (eps * eps))


def check_submodularity(
    oracle: ValueOracle,
    ground: Iterable[Element],
    trials: int = 1000,
    rng: random.Random | None = None,
    tol: float = 1e-9,
) -> tuple[bool, tuple[frozenset[Element], frozenset[Element], Element] | None]:
    """Spot-check diminishing returns on random triples S <= T, e not in T.

    Returns (True, None) if no violation exceeds ``tol``; otherwise
    (False, (S, T, e)) with the first witnessing triple.
    """
    pool = sorted(set(ground), key=lambda e: e.id)
    if not pool:
        raise PreconditionError("ground set must be non-empty")
    rng = rng or random.Random(0)
    for _ in range(trials):
        t = {e for e in pool if rng.random() < 0.5}
        outside = [e for e in pool if e not in t]
        if not outside:
            continue
        e = rng.choice(outside)
        s = {x for x in t if rng.random() < 0.5}
        gain_small = oracle.value(s | {e}) - oracle.value(s)
        gain_large = oracle.value(t | {e}) - oracle.value(t)
        if gain_small < gain_large - tol:
            return False, (frozenset(s), frozenset(t), e)
    return True, None
