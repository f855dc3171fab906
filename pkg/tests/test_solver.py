import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amap import (
    AnnealSchedule,
    Assignment,
    InconsistentEvidenceError,
    MapProblem,
    OracleCapError,
    acceptance_probability,
    annealed_map,
    brute_force_map,
    geometric_cool,
    gibbs_chain,
    hill_climb_map,
    map_posterior,
    parse_network,
    reheat_temperature,
    sequential_init,
    specific_heat,
)
from netgen import enum_best, joint_size, random_network, random_problem


class TestAcceptanceProbability:
    def test_always_one_at_unit_temperature(self):
        rng = random.Random(1)
        for _ in range(100):
            a, b = -10 * rng.random(), -10 * rng.random()
            assert acceptance_probability(1.0, a, b) == 1.0

    def test_improving_ratio_clamps_to_one(self):
        # exponent (1/0.5 - 1) = 1, ratio 9 -> 1.0
        assert acceptance_probability(0.5, math.log(0.9), math.log(0.1)) == 1.0

    def test_worsening_ratio(self):
        a = acceptance_probability(0.5, math.log(0.1), math.log(0.9))
        assert a == pytest.approx(1.0 / 9.0, rel=1e-12)

    def test_infinite_cases(self):
        assert acceptance_probability(0.5, math.log(0.3), -math.inf) == 1.0
        assert acceptance_probability(0.5, -math.inf, math.log(0.3)) == 0.0
        assert acceptance_probability(0.5, -math.inf, -math.inf) == 1.0

    def test_nonpositive_temperature_rejected(self):
        with pytest.raises(ValueError):
            acceptance_probability(0.0, -1.0, -2.0)


class TestScheduleArithmetic:
    def test_paper_default_first_step(self):
        assert geometric_cool(0.99, 0.8) == pytest.approx(0.792, rel=1e-12)

    def test_floor(self):
        assert geometric_cool(1e-6, 0.8, t_min=1e-6) == 1e-6

    def test_twice(self):
        assert geometric_cool(geometric_cool(1.0, 0.5), 0.5) == pytest.approx(0.25)

    @given(st.floats(1e-6, 1.0), st.floats(0.01, 0.99), st.floats(1e-9, 1e-3))
    def test_cool_closed_form(self, t, alpha, t_min):
        assert geometric_cool(t, alpha, t_min) == max(alpha * t, t_min)

    def test_specific_heat_examples(self):
        assert specific_heat([1.0, 2.0, 3.0], 0.5) == pytest.approx(8.0 / 3.0, rel=1e-12)
        assert specific_heat([5.0, 5.0, 5.0], 0.3) == 0.0
        assert specific_heat([0.0, 2.0], 1.0) == pytest.approx(1.0, rel=1e-12)

    def test_specific_heat_empty_rejected(self):
        with pytest.raises(ValueError):
            specific_heat([], 0.5)

    @given(st.lists(st.floats(0.0, 100.0), min_size=1, max_size=20),
           st.floats(1e-3, 1.0))
    def test_specific_heat_closed_form(self, costs, t):
        mean = sum(costs) / len(costs)
        var = sum((c - mean) ** 2 for c in costs) / len(costs)
        got = specific_heat(costs, t)
        assert got == pytest.approx(var / t ** 2, rel=1e-12, abs=1e-300)

    def test_reheat_examples(self):
        assert reheat_temperature(2.0, 0.3, 0.1, 1.0) == pytest.approx(0.5, rel=1e-12)
        assert reheat_temperature(0.0, 0.3, 0.1, 1.0) == 0.3
        assert reheat_temperature(47.0, 0.3, 0.1, 0.99) == 0.99  # clamp at t0

    @given(st.floats(0.0, 100.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0),
           st.floats(0.01, 1.0))
    def test_reheat_closed_form(self, c_b, t_ch, k, t0):
        assert reheat_temperature(c_b, t_ch, k, t0) == min(t0, k * c_b + t_ch)

    def test_schedule_validation(self):
        with pytest.raises(ValueError):
            AnnealSchedule(alpha=1.0)
        with pytest.raises(ValueError):
            AnnealSchedule(t0=1.5)
        with pytest.raises(ValueError):
            AnnealSchedule(wait=30, stop=20)
        with pytest.raises(ValueError):
            AnnealSchedule(k=-0.1)


class TestSequentialInit:
    def test_sprinkler(self, sprinkler, sprinkler_problem):
        # p(R|W=t) favors f; then p(S|R=f,W=t) favors t
        init = sequential_init(sprinkler, sprinkler_problem)
        assert init[sprinkler.by_name("Rain").id] == 1
        assert init[sprinkler.by_name("Sprinkler").id] == 0

    def test_single_root_prior_argmax(self):
        net = parse_network("network n\nvar A { t, f }\ncpt A { 0.2 0.8 }\n")
        init = sequential_init(net, MapProblem((0,), Assignment()))
        assert init[0] == 1

    def test_uniform_tie_breaks_low(self):
        net = parse_network("network n\nvar A { t, f }\ncpt A { 0.5 0.5 }\n")
        init = sequential_init(net, MapProblem((0,), Assignment()))
        assert init[0] == 0

    def test_inconsistent_evidence(self):
        net = parse_network(
            "network d\nvar A { t, f }\nvar B { t, f }\n"
            "cpt A { 1.0 0.0 }\ncpt B | A { 1.0 0.0 ; 0.5 0.5 }\n")
        with pytest.raises(InconsistentEvidenceError):
            sequential_init(net, MapProblem((0,), Assignment({1: 1})))


class TestBruteForce:
    def test_sprinkler(self, sprinkler, sprinkler_problem):
        report = brute_force_map(sprinkler, sprinkler_problem)
        assert report.best[sprinkler.by_name("Sprinkler").id] == 0
        assert report.best[sprinkler.by_name("Rain").id] == 1
        assert math.exp(report.logp) == pytest.approx(0.288 / 0.44838, rel=1e-12)

    def test_single_variable(self):
        net = parse_network("network n\nvar A { t, f }\ncpt A { 0.2 0.8 }\n")
        report = brute_force_map(net, MapProblem((0,), Assignment()))
        assert report.best[0] == 1

    def test_deterministic_net(self):
        net = parse_network(
            "network d\nvar A { t, f }\nvar B { t, f }\n"
            "cpt A { 1.0 0.0 }\ncpt B | A { 0.0 1.0 ; 0.5 0.5 }\n")
        report = brute_force_map(net, MapProblem((0, 1), Assignment()))
        assert report.best.as_tuple((0, 1)) == (0, 1)
        assert report.logp == pytest.approx(0.0, abs=1e-12)

    def test_cap(self, sprinkler, sprinkler_problem):
        with pytest.raises(OracleCapError, match="cap is 2"):
            brute_force_map(sprinkler, sprinkler_problem, cap=2)

    def test_agrees_with_full_enumeration(self):
        rng = random.Random(101)
        checked = 0
        while checked < 30:
            net = random_network(rng, rng.randint(2, 8))
            if joint_size(net) > 4096:
                continue
            problem = random_problem(rng, net)
            try:
                report = brute_force_map(net, problem)
            except InconsistentEvidenceError:
                continue
            checked += 1
            want_states, want_lp = enum_best(net, problem)
            assert report.best.as_tuple(problem.map_vars) == want_states
            assert report.logp == pytest.approx(want_lp, abs=1e-9)


class TestAnnealedMap:
    def test_single_variable_exact(self):
        net = parse_network("network n\nvar A { t, f }\ncpt A { 0.2 0.8 }\n")
        report = annealed_map(net, MapProblem((0,), Assignment()),
                              rng=random.Random(3))
        assert report.best[0] == 1
        assert report.logp == pytest.approx(math.log(0.8), rel=1e-12)

    def test_sprinkler_matches_oracle(self, sprinkler, sprinkler_problem):
        report = annealed_map(sprinkler, sprinkler_problem,
                              rng=random.Random(7), debug_check=True)
        oracle = brute_force_map(sprinkler, sprinkler_problem)
        assert report.best.as_tuple(sprinkler_problem.map_vars) == \
            oracle.best.as_tuple(sprinkler_problem.map_vars)
        assert report.logp == pytest.approx(oracle.logp, abs=1e-9)

    def test_determinism(self, sprinkler, sprinkler_problem):
        runs = []
        for _ in range(2):
            r = annealed_map(sprinkler, sprinkler_problem,
                             rng=random.Random(42), restarts=3,
                             collect_trace=True)
            runs.append((r.best.as_tuple(sprinkler_problem.map_vars), r.logp,
                         r.sweeps, r.reheats, r.best_found_sweep,
                         [(t.sweep, t.temperature, t.current_logp, t.best_logp)
                          for t in r.trace]))
        assert runs[0] == runs[1]

    def test_best_logp_non_decreasing_and_temperature_bounds(
            self, sprinkler, sprinkler_problem):
        sched = AnnealSchedule()
        r = annealed_map(sprinkler, sprinkler_problem, sched,
                         rng=random.Random(5), collect_trace=True)
        last_best = -math.inf
        for row in r.trace:
            assert row.best_logp >= last_best
            assert sched.t_min <= row.temperature <= sched.t0
            assert row.best_logp >= row.current_logp - 1e-12
            last_best = row.best_logp

    def test_temperature_trace_geometric_or_reheat(self):
        rng = random.Random(2)
        net = random_network(rng, 9)
        problem = random_problem(rng, net)
        sched = AnnealSchedule()
        r = annealed_map(net, problem, sched, rng=random.Random(8),
                         collect_trace=True, debug_check=True)
        by_run = {}
        for row in r.trace:
            by_run.setdefault((row.component, row.restart), []).append(row)
        for rows in by_run.values():
            for prev, cur in zip(rows, rows[1:]):
                cooled = max(sched.alpha * prev.temperature, sched.t_min)
                is_cool = cur.temperature == pytest.approx(cooled, rel=1e-12)
                is_reheat = cur.temperature > prev.temperature or \
                    cur.temperature == sched.t0
                assert is_cool or is_reheat

    def test_small_corpus_matches_oracle(self):
        rng = random.Random(500)
        hits, total = 0, 0
        while total < 15:
            net = random_network(rng, rng.randint(5, 10), cards=(2, 2))
            problem = random_problem(rng, net)
            try:
                oracle = brute_force_map(net, problem)
            except InconsistentEvidenceError:
                continue
            total += 1
            report = annealed_map(net, problem, rng=random.Random(total),
                                  restarts=3, debug_check=True)
            if report.best.as_tuple(problem.map_vars) == \
                    oracle.best.as_tuple(problem.map_vars):
                hits += 1
        assert hits >= 14

    def test_inconsistent_evidence(self):
        net = parse_network(
            "network d\nvar A { t, f }\nvar B { t, f }\n"
            "cpt A { 1.0 0.0 }\ncpt B | A { 1.0 0.0 ; 0.5 0.5 }\n")
        with pytest.raises(InconsistentEvidenceError):
            annealed_map(net, MapProblem((0,), Assignment({1: 1})))


class TestGibbsChain:
    def test_visits_follow_conditional_support(self, sprinkler, sprinkler_problem):
        chain = gibbs_chain(sprinkler, sprinkler_problem, 500, random.Random(6))
        assert len(chain) == 500
        # (S=f, R=f) has zero posterior mass given W=t and must never appear
        assert (1, 1) not in set(chain)


class TestHillClimb:
    def test_single_variable(self):
        net = parse_network("network n\nvar A { t, f }\ncpt A { 0.2 0.8 }\n")
        r = hill_climb_map(net, MapProblem((0,), Assignment()))
        assert r.best[0] == 1

    def test_sprinkler(self, sprinkler, sprinkler_problem):
        r = hill_climb_map(sprinkler, sprinkler_problem)
        oracle = brute_force_map(sprinkler, sprinkler_problem)
        assert r.best.as_tuple(sprinkler_problem.map_vars) == \
            oracle.best.as_tuple(sprinkler_problem.map_vars)


class TestLocalOptimumInstance:
    """The crafted two-root network where greedy search gets trapped."""

    def test_instance_shape(self, trap_net, trap_problem):
        # verify by enumeration: (a0,b0) is a strict local optimum,
        # (a1,b1) the global one
        from netgen import enum_factor
        f = enum_factor(trap_net, trap_problem.map_vars, trap_problem.evidence)
        assert f[(0, 0)] == pytest.approx(0.30, rel=1e-4)
        assert f[(1, 1)] == pytest.approx(0.32, rel=1e-4)
        assert f[(0, 1)] < f[(0, 0)] and f[(1, 0)] < f[(0, 0)]
        assert f[(1, 1)] > f[(0, 0)]

    def test_hill_climb_trapped(self, trap_net, trap_problem):
        r = hill_climb_map(trap_net, trap_problem)
        assert r.best.as_tuple(trap_problem.map_vars) == (0, 0)

    def test_anneal_escapes(self, trap_net, trap_problem):
        oracle = brute_force_map(trap_net, trap_problem)
        assert oracle.best.as_tuple(trap_problem.map_vars) == (1, 1)
        hits = 0
        for seed in range(40):
            r = annealed_map(trap_net, trap_problem, rng=random.Random(seed),
                             restarts=5)
            if r.best.as_tuple(trap_problem.map_vars) == (1, 1):
                hits += 1
        assert hits >= 36


class TestTrackingIdentity:
    def test_tracked_logp_matches_exact_each_sweep(self):
        rng = random.Random(300)
        for i in range(10):
            net = random_network(rng, rng.randint(4, 9))
            problem = random_problem(rng, net)
            try:
                # debug_check recomputes ln p(x|E) after every sweep and
                # raises if the incremental value drifts past 1e-6
                annealed_map(net, problem, rng=random.Random(i),
                             restarts=2, debug_check=True)
            except InconsistentEvidenceError:
                continue
