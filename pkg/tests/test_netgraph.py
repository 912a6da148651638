"""Partner selection, degree tracking, and all-communication graph metrics."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from botforge.errors import ValidationError
from botforge.netgraph import (
    POLICY_PRESETS,
    CandidateCache,
    CommGraph,
    DegreeState,
    MixingPolicy,
    build_comm_graph,
    draw_interaction_counts,
    eligible_candidates,
    export_edges_csv,
    export_graphml,
    graph_metrics,
    pa_select,
    per_agent_centralities,
    select_partner,
    select_partner_detail,
    weighted_density,
)
from botforge.persona import Population
from botforge.simcore import Tweet

from conftest import make_persona


def interaction(tid, src, dst, kind="reply", target_tweet=1):
    return Tweet(
        id=tid,
        author_id=src,
        kind=kind,
        text=f"@x placeholder {tid}",
        target_tweet_id=target_tweet,
        target_agent_id=dst,
        run_index=0,
        slot_index=tid,
        slot_kind=kind,
    )


class TestMixingPolicy:
    def test_presets(self):
        assert set(POLICY_PRESETS) == {"pa", "pa+leader", "pa+leader+random"}
        assert POLICY_PRESETS["pa"]() == MixingPolicy(1.0, 0.0, 0.0)
        assert POLICY_PRESETS["pa+leader"]() == MixingPolicy(0.7, 0.3, 0.0)
        assert POLICY_PRESETS["pa+leader+random"]() == MixingPolicy(0.6, 0.3, 0.1)

    def test_sum_must_be_one(self):
        with pytest.raises(ValidationError):
            MixingPolicy(0.5, 0.3, 0.1)

    def test_negative_rejected(self):
        with pytest.raises(ValidationError):
            MixingPolicy(1.2, -0.2, 0.0)

    def test_tolerates_float_rounding(self):
        MixingPolicy(0.1 + 0.2, 0.7, 0.0)  # 0.30000000000000004


class TestDegreeState:
    def test_commit_updates_both_ends(self, micro_pop):
        d = DegreeState(micro_pop)
        d.commit("a_01", "b_02")
        d.commit("a_01", "b_02")
        d.commit("b_02", "a_01")
        assert d.total_of("a_01") == 3
        assert d.total_of("b_02") == 3
        assert d.total_of("a_02") == 0
        assert d.violations() == []
        np.testing.assert_array_equal(d.total_deg(), [3, 0, 0, 3])

    def test_unknown_agent_rejected(self, micro_pop):
        d = DegreeState(micro_pop)
        with pytest.raises(KeyError):
            d.commit("ghost", "a_01")


class TestEligibility:
    def test_or_join(self, micro_pop):
        # a_01 shares a community with a_02 only; narratives differ per community
        assert eligible_candidates(micro_pop.get("a_01"), micro_pop) == {"a_02"}

    def test_shared_narrative_counts(self):
        pop = Population(
            personas=[
                make_persona("x_01", "alpha", narratives=("Line A", "Line B")),
                make_persona("y_01", "beta", narratives=("Line B",)),
                make_persona("z_01", "gamma", narratives=("Line C",)),
            ]
        )
        assert eligible_candidates(pop.get("x_01"), pop) == {"y_01"}

    def test_require_both(self):
        pop = Population(
            personas=[
                make_persona("x_01", "alpha", narratives=("Line A",)),
                make_persona("x_02", "alpha", narratives=("Line A",)),
                make_persona("x_03", "alpha", narratives=("Line Z",)),
            ]
        )
        agent = pop.get("x_01")
        assert eligible_candidates(agent, pop) == {"x_02", "x_03"}
        assert eligible_candidates(agent, pop, require_both=True) == {"x_02"}

    def test_never_self(self, seed_pop):
        agent = seed_pop.personas[0]
        assert agent.id not in eligible_candidates(agent, seed_pop)

    def test_unknown_agent_rejected(self, micro_pop):
        with pytest.raises(ValidationError):
            eligible_candidates(make_persona("ghost"), micro_pop)

    def test_cache_matches_direct_computation(self, seed_pop):
        cache = CandidateCache(seed_pop)
        for agent in seed_pop.personas[::40]:
            direct = eligible_candidates(agent, seed_pop)
            via_cache = {seed_pop.personas[i].id for i in cache.indexes(agent.id)}
            assert via_cache == direct


class TestPaSelect:
    def test_empty_candidates_rejected(self, micro_pop):
        with pytest.raises(ValidationError):
            pa_select([], DegreeState(micro_pop), np.random.default_rng(0))

    def test_only_candidates_returned(self, micro_pop):
        d = DegreeState(micro_pop)
        rng = np.random.default_rng(1)
        for _ in range(50):
            assert pa_select(["a_02", "b_01"], d, rng) in {"a_02", "b_01"}

    def test_deterministic_for_fixed_seed(self, micro_pop):
        d = DegreeState(micro_pop)
        picks_a = [pa_select(["a_02", "b_01", "b_02"], d, np.random.default_rng(42))
                   for _ in range(10)]
        picks_b = [pa_select(["a_02", "b_01", "b_02"], d, np.random.default_rng(42))
                   for _ in range(10)]
        assert picks_a == picks_b

    def test_iteration_order_does_not_matter(self, micro_pop):
        d = DegreeState(micro_pop)
        cands = ["a_02", "b_01", "b_02"]
        a = pa_select(cands, d, np.random.default_rng(5))
        b = pa_select(list(reversed(cands)), d, np.random.default_rng(5))
        assert a == b

    def test_degree_weighting_shifts_mass(self, micro_pop):
        d = DegreeState(micro_pop)
        for _ in range(9):  # b_01 total degree 9 -> weight 10 vs 1
            d.commit("a_01", "b_01")
        rng = np.random.default_rng(3)
        picks = [pa_select(["a_02", "b_01"], d, rng) for _ in range(2000)]
        frac_b = picks.count("b_01") / len(picks)
        assert abs(frac_b - 10 / 11) < 0.03


class TestSelectPartner:
    def test_pure_pa_mode(self, micro_pop):
        rng = np.random.default_rng(0)
        d = DegreeState(micro_pop)
        for _ in range(20):
            pid, mode = select_partner(
                micro_pop.get("a_02"), micro_pop, MixingPolicy.pa_only(), d, rng
            )
            assert mode == "pa"
            assert pid == "a_01"  # only eligible candidate for a_02

    def test_leader_mode_returns_community_leader(self, micro_pop):
        rng = np.random.default_rng(0)
        d = DegreeState(micro_pop)
        choice = select_partner_detail(
            micro_pop.get("a_02"), micro_pop, MixingPolicy(0.0, 1.0, 0.0), d, rng
        )
        assert choice.partner_id == "a_01"
        assert choice.mode == "leader"
        assert choice.requested_mode == "leader"
        assert choice.fallbacks == ()

    def test_leader_self_falls_back_to_pa(self, micro_pop):
        rng = np.random.default_rng(0)
        d = DegreeState(micro_pop)
        choice = select_partner_detail(
            micro_pop.get("a_01"), micro_pop, MixingPolicy(0.0, 1.0, 0.0), d, rng
        )
        assert choice.mode == "pa"
        assert choice.requested_mode == "leader"
        assert "leader->pa" in choice.fallbacks
        assert choice.partner_id == "a_02"

    def test_missing_leader_falls_back_to_pa(self):
        pop = Population(
            personas=[make_persona("x_01", "alpha"), make_persona("x_02", "alpha")]
        )
        choice = select_partner_detail(
            pop.get("x_01"), pop, MixingPolicy(0.0, 1.0, 0.0), DegreeState(pop),
            np.random.default_rng(0),
        )
        assert choice.mode == "pa"
        assert "leader->pa" in choice.fallbacks

    def test_no_candidates_falls_back_to_random(self):
        pop = Population(
            personas=[
                make_persona("x_01", "alpha", narratives=("Line A",)),
                make_persona("y_01", "beta", narratives=("Line B",)),
            ]
        )
        choice = select_partner_detail(
            pop.get("x_01"), pop, MixingPolicy.pa_only(), DegreeState(pop),
            np.random.default_rng(0),
        )
        assert choice.mode == "random"
        assert choice.requested_mode == "pa"
        assert "pa->random" in choice.fallbacks
        assert choice.partner_id == "y_01"

    def test_random_mode_never_self(self, micro_pop):
        rng = np.random.default_rng(0)
        d = DegreeState(micro_pop)
        for _ in range(200):
            pid, mode = select_partner(
                micro_pop.get("a_01"), micro_pop, MixingPolicy(0.0, 0.0, 1.0), d, rng
            )
            assert mode == "random"
            assert pid != "a_01"

    def test_single_agent_population_rejected(self):
        pop = Population(personas=[make_persona("x_01")])
        with pytest.raises(ValidationError):
            select_partner_detail(
                pop.get("x_01"), pop, MixingPolicy.pa_only(), DegreeState(pop),
                np.random.default_rng(0),
            )


class TestInteractionCounts:
    def test_within_bounds(self):
        p = make_persona("x_01", posts=(3, 10), retweets=(2, 5), replies=(1, 5), quotes=(0, 2))
        rng = np.random.default_rng(0)
        for _ in range(300):
            c = draw_interaction_counts(p, rng)
            assert 3 <= c["posts"] <= 10
            assert 2 <= c["retweets"] <= 5
            assert 1 <= c["replies"] <= 5
            assert 0 <= c["quotes"] <= 2

    def test_bounds_inclusive(self):
        p = make_persona("x_01", posts=(4, 4), retweets=(0, 0), replies=(2, 2), quotes=(1, 1))
        c = draw_interaction_counts(p, np.random.default_rng(0))
        assert c == {"posts": 4, "retweets": 0, "replies": 2, "quotes": 1}

    def test_draw_order_fixed(self):
        p = make_persona("x_01", posts=(0, 9), retweets=(0, 9), replies=(0, 9), quotes=(0, 9))
        a = draw_interaction_counts(p, np.random.default_rng(8))
        rng = np.random.default_rng(8)
        expected = {k: int(rng.integers(0, 10)) for k in ("posts", "retweets", "replies", "quotes")}
        assert a == expected


@pytest.fixture()
def star_pop():
    """Four leaves all pointing at one center: every metric comes out 0.2."""
    return Population(
        personas=[make_persona(f"s_{i:02d}", "star") for i in range(5)]
    )


@pytest.fixture()
def star_graph(star_pop):
    tweets = [interaction(i + 1, f"s_{i:02d}", "s_04") for i in range(4)]
    return build_comm_graph(tweets, star_pop)


class TestCommGraph:
    def test_star_counts(self, star_graph):
        assert star_graph.n_nodes == 5
        assert star_graph.n_edges == 4
        assert star_graph.total_weight() == 4

    def test_parallel_interactions_collapse(self, micro_pop):
        tweets = [
            interaction(1, "a_01", "b_01", "reply"),
            interaction(2, "a_01", "b_01", "quote"),
            interaction(3, "a_01", "b_01", "retweet"),
        ]
        g = build_comm_graph(tweets, micro_pop)
        assert g.n_edges == 1
        e = g.edges[("a_01", "b_01")]
        assert (e.weight, e.retweets, e.quotes, e.replies) == (3, 1, 1, 1)

    def test_originals_contribute_no_edges(self, micro_pop):
        t = Tweet(id=1, author_id="a_01", kind="original", text="plain",
                  target_tweet_id=None, target_agent_id=None, run_index=0, slot_index=0)
        g = build_comm_graph([t], micro_pop)
        assert g.n_edges == 0
        assert g.n_nodes == len(micro_pop)  # isolates retained

    def test_unknown_author_rejected(self, micro_pop):
        with pytest.raises(ValidationError, match="unknown author"):
            build_comm_graph([interaction(1, "ghost", "a_01")], micro_pop)

    def test_unknown_target_rejected(self, micro_pop):
        with pytest.raises(ValidationError, match="unknown target"):
            build_comm_graph([interaction(1, "a_01", "ghost")], micro_pop)

    def test_self_interaction_rejected(self, micro_pop):
        with pytest.raises(ValidationError, match="self-interaction"):
            build_comm_graph([interaction(1, "a_01", "a_01")], micro_pop)


class TestGraphMetrics:
    def test_star_all_metrics_point_two(self, star_pop, star_graph):
        m = graph_metrics(star_graph, star_pop)
        assert m.density == pytest.approx(4 / 20)
        assert m.avg_in_degree_centrality == pytest.approx(0.2)
        assert m.avg_out_degree_centrality == pytest.approx(0.2)
        assert m.avg_total_degree_centrality == pytest.approx(0.2)

    def test_star_per_agent_centralities(self, star_pop, star_graph):
        c = per_agent_centralities(star_graph, star_pop)
        np.testing.assert_allclose(c["in"], [0, 0, 0, 0, 1.0])
        np.testing.assert_allclose(c["out"], [0.25] * 4 + [0.0])
        np.testing.assert_allclose(c["total"], [0.125] * 4 + [0.5])

    def test_complete_graph_density_one(self):
        pop = Population(personas=[make_persona(f"k_{i}", "k") for i in range(3)])
        tweets = []
        tid = 0
        for a in pop.ids():
            for b in pop.ids():
                if a != b:
                    tid += 1
                    tweets.append(interaction(tid, a, b))
        m = graph_metrics(build_comm_graph(tweets, pop), pop)
        assert m.density == pytest.approx(1.0)
        assert m.avg_total_degree_centrality == pytest.approx(1.0)

    def test_weighted_density_counts_multiplicity(self, micro_pop):
        tweets = [interaction(i, "a_01", "b_01") for i in range(1, 7)]
        g = build_comm_graph(tweets, micro_pop)
        assert g.n_edges == 1
        assert weighted_density(g) == pytest.approx(6 / 12)

    def test_single_node_rejected(self):
        pop = Population(personas=[make_persona("x_01")])
        g = build_comm_graph([], pop)
        with pytest.raises(ValidationError):
            graph_metrics(g, pop)


class TestExports:
    def test_csv_sorted_with_header(self, micro_pop, tmp_path):
        tweets = [
            interaction(1, "b_02", "a_01", "reply"),
            interaction(2, "a_01", "b_01", "quote"),
            interaction(3, "a_01", "b_01", "quote"),
        ]
        g = build_comm_graph(tweets, micro_pop)
        path = tmp_path / "graph.csv"
        export_edges_csv(g, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "source,target,weight,retweets,quotes,replies"
        assert lines[1] == "a_01,b_01,2,0,2,0"
        assert lines[2] == "b_02,a_01,1,0,0,1"

    def test_graphml_round_trip(self, micro_pop, tmp_path):
        import networkx as nx

        tweets = [interaction(1, "a_01", "b_01"), interaction(2, "b_01", "a_02")]
        g = build_comm_graph(tweets, micro_pop)
        path = tmp_path / "graph.graphml"
        export_graphml(g, micro_pop, path)
        back = nx.read_graphml(path)
        assert set(back.nodes) == set(micro_pop.ids())
        assert back.nodes["a_01"]["community"] == "alpha"
        assert back.edges["a_01", "b_01"]["weight"] == 1


@st.composite
def tiny_population(draw):
    n = draw(st.integers(min_value=2, max_value=8))
    communities = ["alpha", "beta"]
    personas = [
        make_persona(
            f"h_{i:02d}",
            draw(st.sampled_from(communities)),
            narratives=(draw(st.sampled_from(["Line A", "Line B"])),),
        )
        for i in range(n)
    ]
    return Population(personas=personas)


class TestProperties:
    @given(pop=tiny_population(), seed=st.integers(0, 2**31 - 1))
    @settings(max_examples=60, deadline=None)
    def test_partner_is_valid_and_never_self(self, pop, seed):
        rng = np.random.default_rng(seed)
        agent = pop.personas[0]
        pid, mode = select_partner(
            agent, pop, MixingPolicy.pa_leader_random(), DegreeState(pop), rng
        )
        assert pid in pop
        assert pid != agent.id
        assert mode in {"pa", "leader", "random"}

    @given(seed=st.integers(0, 2**31 - 1))
    @settings(max_examples=60, deadline=None)
    def test_pa_select_respects_candidate_set(self, seed):
        pop = Population(personas=[make_persona(f"c_{i}", "c") for i in range(6)])
        d = DegreeState(pop)
        d.commit("c_0", "c_1")
        cands = ["c_2", "c_3", "c_4"]
        assert pa_select(cands, d, np.random.default_rng(seed)) in cands

    @given(st.floats(0, 1), st.floats(0, 1))
    @settings(max_examples=60, deadline=None)
    def test_policy_validation_total(self, a, b):
        s = a + b
        if s > 1:
            return
        c = 1.0 - s
        p = MixingPolicy(a, b, c)
        assert math.isclose(p.p_pa + p.p_leader + p.p_random, 1.0, abs_tol=1e-9)
