"""Randomized verification of every advertised guarantee.

Small instances are generated with seeded RNGs, solved exactly by brute
force, and streamed through the algorithms; each check reports the
violation count and the worst observed margin. The CLI ``verify``
command and the acceptance test suite both run these checks.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

from .bruteforce import brute_opt
from .constraints import (
    IndependenceOracle,
    KnapsackSpec,
    Matchoid,
    PartitionMatroid,
    UniformMatroid,
)
from .indstream import IndStreamInstance
from .localsearch import ChainState, GridState, StreamingSession, guarantee_bound
from .objectives import (
    CoverageOracle,
    CutOracle,
    DecomposableOracle,
    DppKernel,
    Element,
    LogDetOracle,
    ValueOracle,
    WeightedSumOracle,
    _logdet_floored,
    reservoir_sample,
    sample_size_bound,
)
from .unconstrained import DoubleGreedyConfig, unconstrained_max

# Absolute slack for float noise when comparing against exact bounds.
BOUND_SLACK = 1e-9


@dataclass
class Instance:
    name: str
    elements: list[Element]
    oracle: ValueOracle
    constraint: IndependenceOracle
    knapsacks: KnapsackSpec | None
    alpha: float
    k: int


@dataclass
class CheckResult:
    name: str
    trials: int
    violations: int
    worst_margin: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        return (
            f"{status} {self.name}: {self.trials} trials, "
            f"{self.violations} violations, worst margin {self.worst_margin:+.4f}{extra}"
        )


# ---------------------------------------------------------------------------
# Instance generators
# ---------------------------------------------------------------------------


def _coverage(rng: random.Random, ids: list[int]) -> CoverageOracle:
    universe = range(max(4, len(ids)))
    covers = {
        i: rng.sample(list(universe), rng.randint(1, min(4, len(universe))))
        for i in ids
    }
    return CoverageOracle(covers)


def _cut(rng: random.Random, ids: list[int]) -> CutOracle:
    edges = []
    for a in range(len(ids)):
        for b in range(a + 1, len(ids)):
            if rng.random() < 0.45:
                edges.append((ids[a], ids[b], rng.uniform(0.5, 1.5)))
    return CutOracle(edges, nodes=ids)


def exact_logdet_offset(matrix: np.ndarray) -> float:
    """Smallest offset making log det non-negative on every subset.

    Exhaustive, so only usable at test scale.
    """
    n = matrix.shape[0]
    worst = 0.0
    for mask in range(1, 1 << n):
        idx = [i for i in range(n) if mask >> i & 1]
        worst = min(worst, _logdet_floored(matrix[np.ix_(idx, idx)])[0])
    return max(0.0, -worst) + 1e-9


def _logdet(rng: random.Random, ids: list[int]) -> LogDetOracle:
    n = len(ids)
    nprng = np.random.default_rng(rng.randrange(1 << 30))
    factors = nprng.normal(size=(n, max(2, n // 2))) * 0.6
    matrix = factors @ factors.T + 0.05 * np.eye(n)
    # Keep at least one singleton log-det non-negative for conditioning.
    matrix *= 1.5 / max(1e-9, float(np.max(np.diag(matrix))))
    kernel = DppKernel(matrix, offset=exact_logdet_offset(matrix), ids=ids)
    return LogDetOracle(kernel)


def _objective(rng: random.Random, ids: list[int], kind: str) -> ValueOracle:
    if kind == "coverage":
        return _coverage(rng, ids)
    if kind == "cut":
        return _cut(rng, ids)
    if kind == "mix":
        return WeightedSumOracle(
            [
                (rng.uniform(0.4, 1.2), _coverage(rng, ids)),
                (rng.uniform(0.4, 1.2), _cut(rng, ids)),
            ]
        )
    if kind == "logdet":
        return _logdet(rng, ids)
    raise ValueError(kind)


_BLOCK_LABELS = ("b0", "b1", "b2")


def _constraint(
    rng: random.Random, n: int
) -> tuple[str, IndependenceOracle, dict[int, frozenset[str]], int, float]:
    """Returns (kind, oracle, per-element groups, k, alpha)."""
    kind = rng.choice(("uniform", "partition", "matchoid"))
    groups: dict[int, frozenset[str]] = {i: frozenset() for i in range(n)}
    if kind == "uniform":
        limit = rng.randint(1, 4)
        return kind, UniformMatroid(limit), groups, limit, 0.25
    if kind == "partition":
        blocks = rng.randint(2, 3)
        labels = _BLOCK_LABELS[:blocks]
        # Every element gets exactly one block so sum(limits) caps the rank.
        for i in range(n):
            groups[i] = frozenset({rng.choice(labels)})
        limits = {label: rng.randint(1, 2) for label in labels}
        matroid = PartitionMatroid(limits)
        return kind, matroid, groups, sum(limits.values()), 0.25
    ids = list(range(n))
    rng.shuffle(ids)
    split = rng.randint(1, n - 1)
    overlap = rng.randint(1, max(1, n // 3))
    ground_a = frozenset(ids[: split + overlap])
    ground_b = frozenset(ids[split:])
    limit_a = rng.randint(1, 3)
    limit_b = rng.randint(1, 3)
    matchoid = Matchoid(
        [(UniformMatroid(limit_a), ground_a), (UniformMatroid(limit_b), ground_b)]
    )
    return (
        kind,
        matchoid,
        groups,
        limit_a + limit_b,
        1.0 / (4.0 * matchoid.p),
    )


def random_instance(
    rng: random.Random,
    d: int = 0,
    kinds: tuple[str, ...] = ("coverage", "cut", "mix", "logdet"),
) -> Instance:
    mix = rng.choice(kinds)
    n = rng.randint(6, 10 if mix == "logdet" else 12)
    ckind, constraint, groups, k, alpha = _constraint(rng, n)
    elements = [
        Element(
            id=i,
            costs=tuple(rng.uniform(0.05, 1.0) for _ in range(d)),
            groups=groups[i],
        )
        for i in range(n)
    ]
    oracle = _objective(rng, [e.id for e in elements], mix)
    order = list(elements)
    rng.shuffle(order)
    return Instance(
        name=f"{mix}/{ckind}/n{n}/d{d}",
        elements=order,
        oracle=oracle,
        constraint=constraint,
        knapsacks=KnapsackSpec(d) if d else None,
        alpha=alpha,
        k=k,
    )


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------


def check_guarantee_formulas() -> CheckResult:
    """Closed-form factors match the published constants to 1e-12."""
    tol = 1e-12
    violations = 0
    worst = math.inf
    trials = 0
    for p in (1, 2, 3, 4):
        got = guarantee_bound(1.0 / (4.0 * p), 0.5, 0, 0.0)
        want = 1.0 / (1.0 + 2.0 * math.sqrt(p)) ** 2
        trials += 1
        worst = min(worst, tol - abs(got - want))
        if abs(got - want) > tol:
            violations += 1
        for d in (1, 2, 3):
            for eps in (0.0, 0.1):
                got = guarantee_bound(1.0 / (4.0 * p), 0.5, d, eps)
                want = (1.0 - eps) / (
                    1.0 + 4.0 * p + 4.0 * math.sqrt(p) + d * (2.0 + 1.0 / math.sqrt(p))
                )
                trials += 1
                worst = min(worst, tol - abs(got - want))
                if abs(got - want) > tol:
                    violations += 1
    # d = 0 reduction equals the independence-system-only constant.
    for alpha in (1.0, 0.5, 0.25, 0.125, 1.0 / 12.0):
        for beta in (0.5, 1.0 / 3.0):
            got = guarantee_bound(alpha, beta, 0, 0.0)
            root = 1.0 / math.sqrt(alpha) + 1.0 / math.sqrt(2.0 * beta)
            want = math.sqrt(2.0 * beta) / root**2 * (1.0 / math.sqrt(2.0 * beta))
            trials += 1
            worst = min(worst, tol - abs(got - want))
            if abs(got - want) > tol:
                violations += 1
    return CheckResult("guarantee-formula-exactness", trials, violations, worst)


def _stream_chain(instance: Instance, prune: DoubleGreedyConfig) -> ChainState:
    chain = ChainState(
        instance.oracle,
        instance.constraint,
        alpha=instance.alpha,
        prune=prune,
    )
    for e in instance.elements:
        chain.process(e)
    return chain


def _stream_grid(
    instance: Instance, prune: DoubleGreedyConfig, eps: float
) -> GridState:
    assert instance.knapsacks is not None
    grid = GridState(
        instance.oracle,
        instance.constraint,
        instance.knapsacks,
        k=instance.k,
        eps=eps,
        alpha=instance.alpha,
        prune=prune,
    )
    for e in instance.elements:
        grid.process(e)
    return grid


def check_alg1_bound(trials: int = 300, seed: int = 1) -> CheckResult:
    """Chain output vs brute-force optimum at the proven factor."""
    rng = random.Random(seed)
    prune = DoubleGreedyConfig()
    violations = 0
    worst = math.inf
    detail = ""
    for _ in range(trials):
        instance = random_instance(rng)
        chain = _stream_chain(instance, prune)
        got = chain.finalize().value
        opt = brute_opt(instance.oracle, instance.elements, instance.constraint)
        bound = guarantee_bound(instance.alpha, prune.beta, 0, 0.0)
        margin = got - bound * opt.best_value
        worst = min(worst, margin)
        if margin < -BOUND_SLACK * max(1.0, abs(opt.best_value)):
            violations += 1
            if not detail:
                detail = f"first violation on {instance.name}"
    return CheckResult("alg1-end-to-end-bound", trials, violations, worst, detail)


def check_alg2_bound(trials: int = 300, seed: int = 2, eps: float = 0.2) -> CheckResult:
    """Grid output vs constrained optimum; output must stay feasible."""
    rng = random.Random(seed)
    prune = DoubleGreedyConfig()
    violations = 0
    worst = math.inf
    detail = ""
    for t in range(trials):
        instance = random_instance(rng, d=1 + t % 2)
        grid = _stream_grid(instance, prune, eps)
        final = grid.finalize()
        assert instance.knapsacks is not None
        feasible = instance.constraint.is_independent(
            final.elements
        ) and instance.knapsacks.feasible(final.elements)
        opt = brute_opt(
            instance.oracle,
            instance.elements,
            instance.constraint,
            instance.knapsacks,
        )
        bound = guarantee_bound(
            instance.alpha, prune.beta, instance.knapsacks.d, eps
        )
        margin = final.value - bound * opt.best_value
        worst = min(worst, margin)
        if not feasible or margin < -BOUND_SLACK * max(1.0, abs(opt.best_value)):
            violations += 1
            if not detail:
                why = "infeasible output" if not feasible else "bound violation"
                detail = f"first {why} on {instance.name}"
    return CheckResult("alg2-end-to-end-bound", trials, violations, worst, detail)


def check_backbone_monotone(trials: int = 200, seed: int = 3) -> CheckResult:
    """Single swap-greedy instance: 1/4 of OPT for monotone coverage."""
    rng = random.Random(seed)
    violations = 0
    worst = math.inf
    for _ in range(trials):
        n = rng.randint(6, 12)
        ids = list(range(n))
        oracle = _coverage(rng, ids)
        limit = rng.randint(1, 5)
        constraint = UniformMatroid(limit)
        elements = [Element(id=i) for i in ids]
        rng.shuffle(elements)
        inst = IndStreamInstance(oracle, constraint)
        for e in elements:
            inst.process(e)
        got = oracle.value(inst.current_solution())
        opt = brute_opt(oracle, elements, constraint)
        margin = got - 0.25 * opt.best_value
        worst = min(worst, margin)
        if margin < -BOUND_SLACK * max(1.0, opt.best_value):
            violations += 1
    return CheckResult("monotone-backbone-quarter", trials, violations, worst)


def check_double_greedy_deterministic(trials: int = 300, seed: int = 4) -> CheckResult:
    """Deterministic double greedy: a third of the unconstrained optimum."""
    rng = random.Random(seed)
    violations = 0
    worst = math.inf
    for _ in range(trials):
        instance = random_instance(rng, kinds=("coverage", "cut", "mix"))
        result = unconstrained_max(instance.oracle, instance.elements)
        got = instance.oracle.value(result)
        opt = brute_opt(instance.oracle, instance.elements)
        margin = got - opt.best_value / 3.0
        worst = min(worst, margin)
        if margin < -BOUND_SLACK * max(1.0, opt.best_value):
            violations += 1
    return CheckResult("double-greedy-deterministic-third", trials, violations, worst)


def check_double_greedy_randomized(
    instances: int = 25, seeds: int = 500, seed: int = 5
) -> CheckResult:
    """Randomized rule: seed-averaged value within 3 SEs of OPT/2."""
    rng = random.Random(seed)
    violations = 0
    worst = math.inf
    for _ in range(instances):
        instance = random_instance(rng, kinds=("cut", "mix"))
        opt = brute_opt(instance.oracle, instance.elements)
        values = []
        for s in range(seeds):
            cfg = DoubleGreedyConfig(mode="randomized", seed=s)
            result = unconstrained_max(instance.oracle, instance.elements, cfg)
            values.append(instance.oracle.value(result))
        mean = float(np.mean(values))
        stderr = float(np.std(values, ddof=1)) / math.sqrt(len(values))
        margin = mean - (0.5 * opt.best_value - 3.0 * stderr)
        worst = min(worst, margin)
        if margin < -BOUND_SLACK * max(1.0, opt.best_value):
            violations += 1
    return CheckResult(
        "double-greedy-randomized-half", instances, violations, worst,
        f"{seeds} seeds per instance",
    )


def check_memory_accounting(trials: int = 40, seed: int = 6, eps: float = 0.2) -> CheckResult:
    """High-water counters obey the chain and grid memory bounds."""
    rng = random.Random(seed)
    violations = 0
    worst = math.inf
    for t in range(trials):
        instance = random_instance(rng, d=1 + t % 2)
        grid = _stream_grid(instance, DoubleGreedyConfig(), eps)
        run_cap = math.ceil(math.log(instance.k) / math.log(1.0 + eps)) + 2
        margin = float(run_cap - grid.max_active_runs)
        chain_bound = 0
        for chain in grid.runs.values():
            per_inst = max((i.high_water for i in chain.instances), default=0)
            margin = min(margin, float(chain.q * per_inst - chain.high_water))
            chain_bound = max(chain_bound, chain.q * per_inst)
        chain_bound = max(chain_bound, grid.max_chain_high_water)
        margin = min(
            margin, float(grid.max_active_runs * chain_bound - grid.high_water)
        )
        worst = min(worst, margin)
        if margin < 0:
            violations += 1
    return CheckResult("memory-accounting", trials, violations, worst)


def check_conservation(
    stream_size: int = 100_000, checkpoint: int = 1_000, seed: int = 7
) -> CheckResult:
    """Disjointness plus held+discarded == processed on a q=3 chain."""
    rng = random.Random(seed)
    n_items = 40
    covers = {
        i: rng.sample(range(n_items), rng.randint(1, 3)) for i in range(stream_size)
    }
    oracle = CoverageOracle(covers)
    chain = ChainState(
        oracle, UniformMatroid(20), alpha=0.25, prune=DoubleGreedyConfig()
    )
    assert chain.q == 3
    violations = 0
    checks = 0
    for i in range(stream_size):
        chain.process(Element(id=i))
        if (i + 1) % checkpoint == 0:
            checks += 1
            solutions = [inst.current_solution() for inst in chain.instances]
            union = frozenset().union(*solutions)
            if len(union) != sum(len(s) for s in solutions):
                violations += 1
            for inst in chain.instances:
                if inst.processed != len(inst.current_solution()) + inst.discarded_total:
                    violations += 1
            if chain.processed != len(union) + chain.dropped:
                violations += 1
    return CheckResult("conservation-and-disjointness", checks, violations, 0.0)


def check_decomposable(trials: int = 100, seed: int = 8) -> CheckResult:
    """Sampled estimates stay within eps of the exact decomposable value."""
    rng = random.Random(seed)
    k, eps, delta = 3, 0.5, 0.1
    failures = 0
    worst = math.inf
    for _ in range(trials):
        n = rng.randint(12, 24)
        elements = [Element(id=i) for i in range(n)]
        covers = {i: frozenset(rng.sample(range(10), rng.randint(1, 4))) for i in range(n)}

        def make(eid: int):
            targets = covers[eid]

            def component(s: frozenset[Element]) -> float:
                covered: set[int] = set()
                for x in s:
                    covered |= covers[x.id]
                return len(targets & covered) / len(targets)

            return component

        components = {i: make(i) for i in range(n)}
        capacity = min(sample_size_bound(k, eps, delta, n), n)
        sample: list[Element] = []
        for position, e in enumerate(elements, start=1):
            reservoir_sample(position, sample, capacity, e, rng)
        oracle = DecomposableOracle(components, elements, sample)
        instance_ok = True
        for _ in range(20):
            subset = frozenset(rng.sample(elements, rng.randint(0, k)))
            err = abs(oracle.value(subset) - oracle.exact_value(subset))
            worst = min(worst, eps - err)
            if err > eps:
                instance_ok = False
        if not instance_ok:
            failures += 1
    violations = 0 if failures <= delta * trials else failures
    return CheckResult(
        "decomposable-estimation", trials, violations, worst,
        f"{failures} instance failures allowed up to {int(delta * trials)}",
    )


def check_anytime(seed: int = 9, trials: int = 20) -> CheckResult:
    """Mid-stream snapshots must not disturb the final state."""
    rng = random.Random(seed)
    violations = 0
    for t in range(trials):
        d = t % 3  # mix plain chains and grids
        instance = random_instance(rng, d=d)
        mode = "randomized" if t % 2 else "deterministic"
        prune = DoubleGreedyConfig(mode=mode, seed=11)

        def session() -> StreamingSession:
            return StreamingSession(
                instance.oracle,
                instance.constraint,
                instance.knapsacks,
                k=instance.k,
                alpha=instance.alpha,
                prune=prune,
            )

        fresh = session()
        for e in instance.elements:
            fresh.push(e)
        baseline = fresh.snapshot()

        probed = session()
        n = len(instance.elements)
        marks = {n // 4, n // 2, 3 * n // 4}
        for i, e in enumerate(instance.elements):
            probed.push(e)
            if i + 1 in marks:
                probed.snapshot()
        final = probed.snapshot()
        if final.ids != baseline.ids or final.value != baseline.value:
            violations += 1
    return CheckResult("anytime-snapshots", trials, violations, 0.0)


def run_all(quick: bool = False, seed: int = 0) -> list[CheckResult]:
    scale = 0.2 if quick else 1.0

    def n(x: int) -> int:
        return max(10, int(x * scale))

    return [
        check_guarantee_formulas(),
        check_alg1_bound(trials=n(300), seed=seed + 1),
        check_alg2_bound(trials=n(300), seed=seed + 2),
        check_backbone_monotone(trials=n(200), seed=seed + 3),
        check_double_greedy_deterministic(trials=n(300), seed=seed + 4),
        check_double_greedy_randomized(
            instances=max(5, int(25 * scale)), seeds=n(500), seed=seed + 5
        ),
        check_memory_accounting(trials=max(10, int(40 * scale)), seed=seed + 6),
        check_conservation(
            stream_size=20_000 if quick else 100_000, seed=seed + 7
        ),
        check_decomposable(trials=n(100), seed=seed + 8),
        check_anytime(seed=seed + 9, trials=max(6, int(20 * scale))),
    ]
