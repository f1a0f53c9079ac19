"""Exhaustive oracle: maximizers, tie-breaking and the size cap."""

import random

import pytest

from streamls import (
    CapacityError,
    CoverageOracle,
    CutOracle,
    Element,
    KnapsackSpec,
    ModularOracle,
    PredicateOracle,
    UniformMatroid,
    brute_opt,
)


def costed(i, *costs):
    return Element(id=i, costs=tuple(costs))


class TestBruteOpt:
    def test_coverage_under_rank_one_matroid(self):
        oracle = CoverageOracle({0: {1, 2}, 1: {3}})
        result = brute_opt(
            oracle, [Element(id=0), Element(id=1)], UniformMatroid(1)
        )
        assert result.best_set == frozenset({Element(id=0)})
        assert result.best_value == 2.0
        assert result.subsets_enumerated == 4

    def test_unconstrained_cut_maximum(self):
        oracle = CutOracle([(0, 1, 1.0)])
        result = brute_opt(oracle, [Element(id=0), Element(id=1)])
        assert result.best_value == 1.0

    def test_all_singletons_infeasible_returns_empty(self):
        oracle = ModularOracle({0: 5.0, 1: 5.0})
        result = brute_opt(
            oracle,
            [costed(0, 2.0), costed(1, 2.0)],
            knapsacks=KnapsackSpec(1),
        )
        assert result.best_set == frozenset()
        assert result.best_value == 0.0

    def test_no_constraint_equals_trivial_oracle(self):
        rng = random.Random(51)
        oracle = CoverageOracle({i: rng.sample(range(9), 2) for i in range(7)})
        ground = [Element(id=i) for i in range(7)]
        free = brute_opt(oracle, ground)
        trivial = brute_opt(oracle, ground, PredicateOracle(lambda s: True))
        assert free.best_set == trivial.best_set
        assert free.best_value == trivial.best_value

    def test_tie_breaks_toward_smaller_then_lexicographic(self):
        oracle = CoverageOracle({0: {9}, 1: {9}, 2: set()})
        result = brute_opt(oracle, [Element(id=i) for i in range(3)])
        assert result.best_set == frozenset({Element(id=0)})

    def test_modular_maximizer_cardinality(self):
        rng = random.Random(52)
        for _ in range(20):
            n = rng.randint(4, 9)
            weights = {i: rng.uniform(-1.0, 2.0) for i in range(n)}
            limit = rng.randint(1, n)
            oracle = ModularOracle(weights)
            result = brute_opt(
                oracle, [Element(id=i) for i in range(n)], UniformMatroid(limit)
            )
            positive = sum(1 for w in weights.values() if w > 0)
            assert len(result.best_set) == min(limit, positive)

    def test_ground_cap(self):
        oracle = ModularOracle({i: 1.0 for i in range(21)})
        with pytest.raises(CapacityError):
            brute_opt(oracle, [Element(id=i) for i in range(21)])
