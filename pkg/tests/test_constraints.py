"""Independence oracles, knapsack feasibility and the swap-repair search."""

import random

import pytest

from streamls import (
    ConfigError,
    DomainError,
    Element,
    KnapsackSpec,
    Matchoid,
    PartitionMatroid,
    PreconditionError,
    PredicateOracle,
    UniformMatroid,
    exchange_candidates,
    normalize_costs,
)


def labeled(i, *labels):
    return Element(id=i, groups=frozenset(labels))


def costed(i, *costs):
    return Element(id=i, costs=tuple(costs))


class TestMatroids:
    def test_uniform_cardinality_bound(self):
        matroid = UniformMatroid(2)
        assert not matroid.is_independent(frozenset(Element(id=i) for i in range(3)))
        assert matroid.is_independent(frozenset(Element(id=i) for i in range(2)))
        assert matroid.is_independent(frozenset())

    def test_partition_at_limit(self):
        matroid = PartitionMatroid({"b1": 1})
        assert matroid.is_independent(frozenset({labeled(0, "b1")}))
        assert not matroid.is_independent(
            frozenset({labeled(0, "b1"), labeled(1, "b1")})
        )

    def test_partition_unconstrained_outside_blocks(self):
        matroid = PartitionMatroid({"b1": 1})
        outsiders = frozenset(labeled(i) for i in range(5))
        assert matroid.is_independent(outsiders)

    def test_partition_blocks_must_be_disjoint(self):
        matroid = PartitionMatroid({"b1": 1, "b2": 1})
        with pytest.raises(DomainError):
            matroid.is_independent(frozenset({labeled(0, "b1", "b2")}))

    def test_matchoid_overlapping_rank_one_parts(self):
        a, b, c = Element(id=0), Element(id=1), Element(id=2)
        matchoid = Matchoid(
            [(UniformMatroid(1), frozenset({0, 1})), (UniformMatroid(1), frozenset({1, 2}))]
        )
        assert matchoid.is_independent(frozenset({a, c}))
        assert not matchoid.is_independent(frozenset({a, b}))
        assert matchoid.p == 2

    def test_matchoid_p_matches_brute_force_multiplicity(self):
        rng = random.Random(4)
        for _ in range(50):
            n = rng.randint(3, 8)
            parts = []
            for _ in range(rng.randint(1, 4)):
                ground = frozenset(rng.sample(range(n), rng.randint(1, n)))
                parts.append((UniformMatroid(rng.randint(1, 3)), ground))
            matchoid = Matchoid(parts)
            expected = max(
                sum(1 for _, g in parts if i in g) for i in range(n)
            )
            assert matchoid.p == max(expected, 1)

    def test_matchoid_rank_hint_sums_parts(self):
        matchoid = Matchoid(
            [(UniformMatroid(2), frozenset({0, 1})), (UniformMatroid(3), frozenset({1, 2}))]
        )
        assert matchoid.rank_hint == 5

    def test_hereditary_fuzz(self):
        rng = random.Random(11)
        oracles = [
            UniformMatroid(3),
            PartitionMatroid({"b0": 1, "b1": 2}),
            Matchoid(
                [
                    (UniformMatroid(2), frozenset(range(0, 7))),
                    (UniformMatroid(2), frozenset(range(4, 10))),
                ]
            ),
        ]
        pool = [labeled(i, f"b{i % 2}") for i in range(10)]
        checked = 0
        while checked < 1000:
            oracle = rng.choice(oracles)
            subset = frozenset(e for e in pool if rng.random() < 0.4)
            if not oracle.is_independent(subset) or not subset:
                continue
            checked += 1
            victim = rng.choice(sorted(subset, key=lambda e: e.id))
            assert oracle.is_independent(subset - {victim})

    def test_exchange_property_fuzz(self):
        # Matroid exchange: |B| > |A| implies some e in B-A extends A.
        rng = random.Random(13)
        pool = [labeled(i, f"b{i % 3}") for i in range(9)]
        for oracle in (UniformMatroid(4), PartitionMatroid({"b0": 2, "b1": 2, "b2": 2})):
            for _ in range(500):
                a = frozenset(e for e in pool if rng.random() < 0.3)
                b = frozenset(e for e in pool if rng.random() < 0.5)
                if not (oracle.is_independent(a) and oracle.is_independent(b)):
                    continue
                if len(b) <= len(a):
                    continue
                assert any(
                    oracle.is_independent(a | {e}) for e in b - a
                ), f"exchange failed for A={sorted(e.id for e in a)}, B={sorted(e.id for e in b)}"


class TestKnapsacks:
    def test_single_budget_feasible(self):
        spec = KnapsackSpec(1)
        assert spec.feasible(frozenset({costed(0, 0.4), costed(1, 0.5)}))

    def test_single_budget_overflow(self):
        spec = KnapsackSpec(1)
        assert not spec.feasible(frozenset({costed(0, 0.6), costed(1, 0.5)}))

    def test_two_budgets(self):
        spec = KnapsackSpec(2)
        assert spec.feasible(frozenset({costed(0, 0.5, 1.0)}))
        assert not spec.feasible(frozenset({costed(0, 0.5, 0.6), costed(1, 0.5, 0.6)}))

    def test_cost_length_mismatch(self):
        spec = KnapsackSpec(2)
        with pytest.raises(DomainError):
            spec.feasible(frozenset({costed(0, 0.5)}))

    def test_monotone_under_subsets(self):
        rng = random.Random(3)
        spec = KnapsackSpec(2)
        for _ in range(300):
            pool = [costed(i, rng.uniform(0, 0.5), rng.uniform(0, 0.5)) for i in range(6)]
            t = frozenset(e for e in pool if rng.random() < 0.6)
            if not spec.feasible(t):
                continue
            s = frozenset(e for e in t if rng.random() < 0.5)
            assert spec.feasible(s)

    def test_normalize_costs(self):
        normalized, flagged = normalize_costs(
            {0: [5.0], 1: [0.0], 2: [12.0]}, capacities=[10.0]
        )
        assert normalized[0] == (0.5,)
        assert normalized[1] == (0.0,)
        assert normalized[2] == (1.2,)
        assert flagged == {2}

    def test_normalize_rejects_negative_cost(self):
        with pytest.raises(DomainError):
            normalize_costs({0: [-1.0]}, capacities=[1.0])

    def test_normalize_rejects_bad_capacity(self):
        with pytest.raises(ConfigError):
            normalize_costs({0: [1.0]}, capacities=[0.0])


class TestExchangeCandidates:
    def test_single_possible_swap(self):
        a, b = Element(id=0), Element(id=1)
        out = exchange_candidates(UniformMatroid(1), frozenset({a}), b)
        assert out == [frozenset({a})]

    def test_no_exchange_needed(self):
        out = exchange_candidates(UniformMatroid(2), frozenset({Element(id=0)}), Element(id=1))
        assert out == [frozenset()]

    def test_partition_per_block_circuit(self):
        a = labeled(0, "b1")
        c = labeled(1, "b2")
        e = labeled(2, "b1")
        matroid = PartitionMatroid({"b1": 1, "b2": 1})
        out = exchange_candidates(matroid, frozenset({a, c}), e)
        assert out == [frozenset({a})]

    def test_matchoid_one_candidate_set_per_blocked_part(self):
        matchoid = Matchoid(
            [(UniformMatroid(1), frozenset({0, 1})), (UniformMatroid(1), frozenset({1, 2}))]
        )
        a, b, c = Element(id=0), Element(id=1), Element(id=2)
        out = exchange_candidates(matchoid, frozenset({a, c}), b)
        assert sorted(out, key=lambda s: min(e.id for e in s)) == [
            frozenset({a}),
            frozenset({c}),
        ]

    def test_unsalvageable_part_returns_empty_list(self):
        # A zero-capacity part blocks e and no removal can help.
        matchoid = Matchoid([(UniformMatroid(0), frozenset({5}))])
        assert exchange_candidates(matchoid, frozenset(), Element(id=5)) == []

    def test_preconditions(self):
        a = Element(id=0)
        with pytest.raises(PreconditionError):
            exchange_candidates(UniformMatroid(1), frozenset({a}), a)
        with pytest.raises(PreconditionError):
            exchange_candidates(
                UniformMatroid(1),
                frozenset({Element(id=1), Element(id=2)}),
                Element(id=3),
            )

    def test_opaque_predicate_oracle_single_part(self):
        forbidden = frozenset({0, 1})
        oracle = PredicateOracle(
            lambda s: not forbidden <= frozenset(e.id for e in s), rank_hint=3
        )
        a, b, c = Element(id=0), Element(id=1), Element(id=2)
        out = exchange_candidates(oracle, frozenset({a, c}), b)
        assert out == [frozenset({a})]
        assert oracle.rank_hint == 3
