"""Chain routing, finalize argmax, the lazy threshold grid and the
session API."""

import math
import random

import pytest

from streamls import (
    ChainState,
    ConfigError,
    CoverageOracle,
    CutOracle,
    DoubleGreedyConfig,
    Element,
    GridState,
    KnapsackSpec,
    ModularOracle,
    StreamingSession,
    UniformMatroid,
    chain_length,
    guarantee_bound,
)
from streamls.unconstrained import unconstrained_max
from streamls.verify import random_instance


def costed(i, *costs):
    return Element(id=i, costs=tuple(costs))


RANDOMIZED = DoubleGreedyConfig(mode="randomized", seed=0)  # beta = 1/2


class TestChainLength:
    def test_alg1_specialization(self):
        # beta = 1/2 reduces to ceil(1/sqrt(alpha) + 1).
        assert chain_length(0.25, 0.5) == 3
        assert chain_length(1.0, 0.5) == 2
        assert chain_length(1.0 / 16.0, 0.5) == 5

    def test_general_beta(self):
        assert chain_length(0.25, 1.0 / 3.0) == 3
        assert chain_length(1.0 / 8.0, 1.0 / 3.0) == math.ceil(math.sqrt(16.0 / 3.0) + 1)

    def test_at_least_two(self):
        assert chain_length(1.0, 1.0 / 3.0) >= 2

    def test_parameter_validation(self):
        with pytest.raises(ConfigError):
            chain_length(0.0, 0.5)
        with pytest.raises(ConfigError):
            chain_length(0.5, 0.7)


class TestGuaranteeBound:
    def test_corollary_single_matroid(self):
        assert guarantee_bound(0.25, 0.5, 0, 0.0) == pytest.approx(1.0 / 9.0, abs=1e-12)

    def test_corollary_knapsack_form(self):
        for p in (1, 2, 3):
            for d in (1, 2):
                got = guarantee_bound(1.0 / (4 * p), 0.5, d, 0.1)
                want = 0.9 / (1 + 4 * p + 4 * math.sqrt(p) + d * (2 + 1 / math.sqrt(p)))
                assert got == pytest.approx(want, abs=1e-12)

    def test_alpha_one(self):
        assert guarantee_bound(1.0, 0.5, 0, 0.0) == pytest.approx(0.25, abs=1e-12)

    def test_d_zero_reduction_identity(self):
        for alpha in (1.0, 0.5, 0.25, 0.1):
            for beta in (0.5, 1.0 / 3.0):
                got = guarantee_bound(alpha, beta, 0, 0.0)
                a = 1.0 / math.sqrt(alpha) + 1.0 / math.sqrt(2.0 * beta)
                want = math.sqrt(2.0 * beta) / a**2 / math.sqrt(2.0 * beta)
                assert got == pytest.approx(want, abs=1e-15)

    def test_validation(self):
        with pytest.raises(ConfigError):
            guarantee_bound(2.0, 0.5, 0, 0.0)
        with pytest.raises(ConfigError):
            guarantee_bound(0.5, 0.5, -1, 0.0)
        with pytest.raises(ConfigError):
            guarantee_bound(0.5, 0.5, 0, 1.0)


class TestChain:
    def test_instance_count_from_alpha(self):
        chain = ChainState(ModularOracle({}), UniformMatroid(2), alpha=0.25, prune=RANDOMIZED)
        assert chain.q == 3
        assert len(chain.instances) == 3

    def test_eviction_routes_to_next_instance_in_same_call(self):
        oracle = ModularOracle({0: 1.0, 1: 3.0})
        chain = ChainState(oracle, UniformMatroid(1), alpha=0.25)
        chain.process(Element(id=0))
        chain.process(Element(id=1))
        assert chain.instances[0].current_solution() == frozenset({Element(id=1)})
        assert chain.instances[1].current_solution() == frozenset({Element(id=0)})

    def test_all_reject_drops_permanently(self):
        oracle = ModularOracle({0: 1.0, 1: 0.0})
        chain = ChainState(oracle, UniformMatroid(1), alpha=0.25)
        chain.process(Element(id=0))
        chain.process(Element(id=1))  # zero gain everywhere: dropped
        assert chain.dropped == 1
        for inst in chain.instances[1:]:
            assert inst.current_solution() == frozenset()

    def test_solutions_stay_disjoint(self):
        rng = random.Random(41)
        for _ in range(25):
            instance = random_instance(rng)
            chain = ChainState(
                instance.oracle, instance.constraint, alpha=instance.alpha
            )
            for e in instance.elements:
                chain.process(e)
                solutions = [i.current_solution() for i in chain.instances]
                union = frozenset().union(*solutions)
                assert len(union) == sum(len(s) for s in solutions)

    def test_finalize_empty_chain(self):
        oracle = ModularOracle({})
        chain = ChainState(oracle, UniformMatroid(1), alpha=0.25)
        result = chain.finalize()
        assert result.elements == frozenset()
        assert result.value == 0.0

    def test_finalize_does_not_mutate(self):
        rng = random.Random(42)
        instance = random_instance(rng)
        chain = ChainState(instance.oracle, instance.constraint, alpha=instance.alpha)
        for e in instance.elements[: len(instance.elements) // 2]:
            chain.process(e)
        before = [i.current_solution() for i in chain.instances]
        chain.finalize()
        after = [i.current_solution() for i in chain.instances]
        assert before == after

    def test_pruning_strictly_helps_on_cut_instance(self):
        # Frozen search result: stream where an instance ends holding a
        # set whose strict subset cuts more, so the pruned variant wins.
        rng = random.Random(43)
        n = rng.randint(5, 9)
        ids = list(range(n))
        edges = []
        for a in range(n):
            for b in range(a + 1, n):
                if rng.random() < 0.5:
                    edges.append((a, b, rng.uniform(0.5, 2.0)))
        oracle = CutOracle(edges, nodes=ids)
        limit = rng.randint(2, 4)
        chain = ChainState(oracle, UniformMatroid(limit), alpha=0.25)
        elements = [Element(id=i) for i in ids]
        rng.shuffle(elements)
        for e in elements:
            chain.process(e)
        first = chain.instances[0].current_solution()
        pruned = unconstrained_max(oracle, first, DoubleGreedyConfig())
        assert oracle.value(pruned) > oracle.value(first) + 1e-9
        final = chain.finalize()
        assert final.elements == pruned
        assert final.value == pytest.approx(oracle.value(pruned))

    def test_monotone_objective_prune_never_helps(self):
        rng = random.Random(44)
        for _ in range(20):
            n = rng.randint(5, 10)
            oracle = CoverageOracle(
                {i: rng.sample(range(12), rng.randint(1, 3)) for i in range(n)}
            )
            chain = ChainState(oracle, UniformMatroid(3), alpha=0.25)
            elements = [Element(id=i) for i in range(n)]
            rng.shuffle(elements)
            for e in elements:
                chain.process(e)
            final = chain.finalize()
            best_constrained = max(
                oracle.value(i.current_solution()) for i in chain.instances
            )
            assert final.value == pytest.approx(best_constrained)


class TestGrid:
    def _grid(self, oracle, d=1, *, k=4, eps=1.0, alpha=0.25, prune=RANDOMIZED):
        return GridState(
            oracle,
            UniformMatroid(k),
            KnapsackSpec(d),
            k=k,
            eps=eps,
            alpha=alpha,
            prune=prune,
        )

    def test_gamma_formula(self):
        # m=1, alpha=1/4, d=1, beta=1/2: 2/((1+2)(1+2+1)) = 1/6.
        grid = self._grid(ModularOracle({0: 1.0}))
        grid.process(costed(0, 0.01))
        assert grid.m == 1.0
        assert grid.gamma() == pytest.approx(1.0 / 6.0)

    def test_first_element_creates_grid(self):
        grid = self._grid(ModularOracle({0: 1.0}))
        assert not grid.runs
        grid.process(costed(0, 0.01))
        assert grid.e_m == Element(id=0)
        assert len(grid.runs) == 3  # powers of 2 spanning [1/6, 2/3]
        assert sorted(grid.runs) == [-3, -2, -1]

    def test_active_window_tracks_growing_maximum(self):
        grid = self._grid(ModularOracle({0: 1.0, 1: 64.0}))
        grid.process(costed(0, 0.01))
        low_indices = set(grid.runs)
        grid.process(costed(1, 0.01))
        assert grid.m == 64.0
        assert min(grid.runs) > min(low_indices)
        assert grid.retired > 0

    def test_grid_size_stays_within_cap(self):
        rng = random.Random(45)
        for _ in range(15):
            instance = random_instance(rng, d=1)
            grid = GridState(
                instance.oracle,
                instance.constraint,
                instance.knapsacks,
                k=instance.k,
                eps=0.2,
                alpha=instance.alpha,
            )
            for e in instance.elements:
                grid.process(e)
            cap = math.ceil(math.log(instance.k) / math.log(1.2)) + 2
            assert grid.max_active_runs <= cap

    def test_finalize_empty_stream(self):
        grid = self._grid(ModularOracle({}))
        result = grid.finalize()
        assert result.elements == frozenset()

    def test_singleton_fallback_wins_when_chains_hold_less(self):
        # Three blockers fill the rank-1 instances before a strictly
        # better singleton arrives; every run rejects it (gain below
        # twice the held weight), so only e_m can return it.
        covers = {i: {(i, j) for j in range(9)} for i in range(3)}
        covers[3] = {(3, j) for j in range(10)}
        oracle = CoverageOracle(covers)
        grid = self._grid(oracle, k=1, eps=0.5, prune=DoubleGreedyConfig())
        for i in range(3):
            grid.process(costed(i, 0.01))
        grid.process(costed(3, 0.01))
        for chain in grid.runs.values():
            for inst in chain.instances:
                assert Element(id=3) not in inst.current_solution()
        result = grid.finalize()
        assert result.elements == frozenset({Element(id=3)})
        assert result.value == 10.0

    def test_no_knapsacks_degenerates_to_plain_chain(self):
        rng = random.Random(46)
        instance = random_instance(rng, d=0)
        grid = GridState(
            instance.oracle,
            instance.constraint,
            KnapsackSpec(0),
            k=instance.k,
            alpha=instance.alpha,
        )
        chain = ChainState(instance.oracle, instance.constraint, alpha=instance.alpha)
        for e in instance.elements:
            grid.process(e)
            chain.process(e)
        assert len(grid.runs) == 1
        assert grid.finalize() == chain.finalize()

    def test_final_set_feasible(self):
        rng = random.Random(47)
        for _ in range(20):
            instance = random_instance(rng, d=2)
            grid = GridState(
                instance.oracle,
                instance.constraint,
                instance.knapsacks,
                k=instance.k,
                eps=0.2,
                alpha=instance.alpha,
            )
            for e in instance.elements:
                grid.process(e)
            final = grid.finalize()
            assert instance.constraint.is_independent(final.elements)
            assert instance.knapsacks.feasible(final.elements)

    def test_k_required_with_knapsacks(self):
        from streamls import PredicateOracle

        with pytest.raises(ConfigError):
            GridState(
                ModularOracle({}),
                PredicateOracle(lambda s: True),
                KnapsackSpec(1),
                alpha=0.25,
            )

    def test_cost_count_mismatch_is_domain_error(self):
        from streamls import DomainError

        grid = self._grid(ModularOracle({0: 1.0}), d=1)
        with pytest.raises(DomainError):
            grid.process(costed(0, 0.1, 0.2))


class TestSession:
    def test_snapshot_then_close(self):
        rng = random.Random(48)
        instance = random_instance(rng, d=1)
        session = StreamingSession(
            instance.oracle,
            instance.constraint,
            instance.knapsacks,
            k=instance.k,
            alpha=instance.alpha,
        )
        mid = None
        for i, e in enumerate(instance.elements):
            session.push(e)
            if i == len(instance.elements) // 2:
                mid = session.snapshot()
        report = session.close()
        assert mid is not None
        assert report.pushed == len(instance.elements)
        assert report.selection.value >= 0.0
        assert report.stats["high_water"] >= 0
        assert report.seconds_per_element >= 0.0

    def test_session_prefers_grid_only_with_knapsacks(self):
        plain = StreamingSession(ModularOracle({}), UniformMatroid(2), alpha=0.25)
        assert isinstance(plain.engine, ChainState)
        grid = StreamingSession(
            ModularOracle({}), UniformMatroid(2), KnapsackSpec(1), k=2, alpha=0.25
        )
        assert isinstance(grid.engine, GridState)
