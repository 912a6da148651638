"""Partner selection, the all-communication graph, and network metrics.

Partner selection mixes three modes: weighted preferential attachment over
an agent's eligible candidates, the agent's community leader, and a uniform
random agent. Every committed interaction (retweet, quote, reply) updates a
degree state incrementally, so attachment weights see the edges formed
earlier in the same run. After a run, the interactions collapse into a
directed weighted graph over all agents, from which density and degree
centralities are computed.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .persona import Persona, Population

PARTNER_MODES = ("pa", "leader", "random")
EDGE_KINDS = ("retweet", "quote", "reply")


@dataclass(frozen=True)
class MixingPolicy:
    """Probability split across partner-selection modes."""

    p_pa: float = 1.0
    p_leader: float = 0.0
    p_random: float = 0.0

    def __post_init__(self):
        for name in ("p_pa", "p_leader", "p_random"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValidationError(f"MixingPolicy.{name} must be in [0, 1] (got {v})")
        total = self.p_pa + self.p_leader + self.p_random
        if abs(total - 1.0) > 1e-9:
            raise ValidationError(f"MixingPolicy probabilities must sum to 1 (got {total})")

    @classmethod
    def pa_only(cls) -> MixingPolicy:
        return cls(1.0, 0.0, 0.0)

    @classmethod
    def pa_leader(cls) -> MixingPolicy:
        return cls(0.7, 0.3, 0.0)

    @classmethod
    def pa_leader_random(cls) -> MixingPolicy:
        return cls(0.6, 0.3, 0.1)


# Named presets accepted wherever a policy can be configured.
POLICY_PRESETS = {
    "pa": MixingPolicy.pa_only,
    "pa+leader": MixingPolicy.pa_leader,
    "pa+leader+random": MixingPolicy.pa_leader_random,
}


class DegreeState:
    """Incremental per-agent degree counters, indexed by population order.

    Single-writer during a run: commit order is part of the deterministic
    selection contract.
    """

    def __init__(self, pop: Population):
        self._pop = pop
        n = len(pop)
        self.in_deg = np.zeros(n, dtype=np.int64)
        self.out_deg = np.zeros(n, dtype=np.int64)
        self.n_interactions = 0

    def commit(self, source_id: str, target_id: str) -> None:
        """Record one committed interaction edge source → target."""
        self.out_deg[self._pop.index_of(source_id)] += 1
        self.in_deg[self._pop.index_of(target_id)] += 1
        self.n_interactions += 1

    def total_deg(self) -> np.ndarray:
        return self.in_deg + self.out_deg

    def total_of(self, agent_id: str) -> int:
        i = self._pop.index_of(agent_id)
        return int(self.in_deg[i] + self.out_deg[i])

    def violations(self) -> list[str]:
        out = []
        if (self.in_deg < 0).any() or (self.out_deg < 0).any():
            out.append("degree counters must be non-negative")
        if int(self.in_deg.sum()) != self.n_interactions:
            out.append(
                f"in-degree sum {int(self.in_deg.sum())} != interactions {self.n_interactions}"
            )
        if int(self.out_deg.sum()) != self.n_interactions:
            out.append(
                f"out-degree sum {int(self.out_deg.sum())} != interactions {self.n_interactions}"
            )
        return out


def eligible_candidates(
    agent: Persona, pop: Population, *, require_both: bool = False
) -> set[str]:
    """Agent ids sharing the agent's community or a narrative string (never self).

    require_both=True switches the clause join from OR to AND.
    """
    if agent.id not in pop:
        raise ValidationError(f"agent {agent.id!r} not in population")
    own_narratives = set(agent.narratives)
    out = set()
    for p in pop.personas:
        if p.id == agent.id:
            continue
        same_comm = p.community == agent.community
        shared_narr = bool(own_narratives.intersection(p.narratives))
        ok = (same_comm and shared_narr) if require_both else (same_comm or shared_narr)
        if ok:
            out.add(p.id)
    return out


class CandidateCache:
    """Per-population candidate index arrays, computed lazily per agent.

    Eligibility depends only on the (immutable) population, so the arrays are
    reusable across runs and selections. Arrays are sorted by population index,
    which fixes the sampling order independent of set iteration order.
    """

    def __init__(self, pop: Population, *, require_both: bool = False):
        self._pop = pop
        self._require_both = require_both
        self._cache: dict[str, np.ndarray] = {}
        # narrative string -> population indexes of agents carrying it
        self._by_narrative: dict[str, list[int]] = {}
        self._by_community: dict[str, list[int]] = {}
        for i, p in enumerate(pop.personas):
            self._by_community.setdefault(p.community, []).append(i)
            for n in p.narratives:
                self._by_narrative.setdefault(n, []).append(i)

    def indexes(self, agent_id: str) -> np.ndarray:
        got = self._cache.get(agent_id)
        if got is None:
            agent = self._pop.get(agent_id)
            comm = np.asarray(self._by_community[agent.community], dtype=np.int64)
            narr_lists = [self._by_narrative[n] for n in agent.narratives]
            narr = (
                np.unique(np.concatenate([np.asarray(ix, dtype=np.int64) for ix in narr_lists]))
                if narr_lists
                else np.empty(0, dtype=np.int64)
            )
            if self._require_both:
                got = np.intersect1d(comm, narr)
            else:
                got = np.union1d(comm, narr)
            got = got[got != self._pop.index_of(agent_id)]
            self._cache[agent_id] = got
        return got


def _pa_select_idx(cand_idx: np.ndarray, degrees: DegreeState, rng: np.random.Generator) -> int:
    """One candidate index sampled proportional to total degree + 1."""
    weights = (degrees.in_deg[cand_idx] + degrees.out_deg[cand_idx] + 1).astype(np.float64)
    cum = np.cumsum(weights)
    u = rng.random() * cum[-1]
    return int(cand_idx[np.searchsorted(cum, u, side="right")])


def pa_select(candidates, degrees: DegreeState, rng: np.random.Generator) -> str:
    """Sample one candidate id with probability proportional to total degree + 1.

    The +1 smoothing keeps zero-degree agents selectable. Candidates are
    ordered by population index before sampling so the draw is reproducible
    regardless of how the candidate collection iterates.
    """
    if not len(candidates):
        raise ValidationError("pa_select requires a non-empty candidate set")
    pop = degrees._pop
    cand_idx = np.sort(np.asarray([pop.index_of(c) for c in candidates], dtype=np.int64))
    return pop.personas[_pa_select_idx(cand_idx, degrees, rng)].id


@dataclass(frozen=True)
class PartnerChoice:
    partner_id: str
    mode: str  # mode actually used, after any fallback
    requested_mode: str
    fallbacks: tuple[str, ...] = ()  # e.g. ("leader->pa",)


def _random_other_idx(n: int, self_idx: int, rng: np.random.Generator) -> int:
    j = int(rng.integers(n - 1))
    return j + 1 if j >= self_idx else j


def select_partner_detail(
    agent: Persona,
    pop: Population,
    policy: MixingPolicy,
    degrees: DegreeState,
    rng: np.random.Generator,
    *,
    cache: CandidateCache | None = None,
) -> PartnerChoice:
    """Partner selection with full fallback provenance.

    Mode is drawn from the policy; fallbacks keep the operation total for any
    population of at least 2 agents: a missing/self leader degrades to pa, an
    empty pa candidate set degrades to random.
    """
    n = len(pop)
    if n < 2:
        raise ValidationError("partner selection requires a population of at least 2 agents")
    if cache is None:
        cache = CandidateCache(pop)

    u = rng.random()
    if u < policy.p_pa:
        requested = "pa"
    elif u < policy.p_pa + policy.p_leader:
        requested = "leader"
    else:
        requested = "random"

    mode = requested
    fallbacks: list[str] = []

    if mode == "leader":
        leader_id = pop.leader_of(agent.community)
        if leader_id is None or leader_id == agent.id:
            fallbacks.append("leader->pa")
            mode = "pa"
        else:
            return PartnerChoice(leader_id, "leader", requested)

    if mode == "pa":
        cand_idx = cache.indexes(agent.id)
        if len(cand_idx) == 0:
            fallbacks.append("pa->random")
            mode = "random"
        else:
            pid = pop.personas[_pa_select_idx(cand_idx, degrees, rng)].id
            return PartnerChoice(pid, "pa", requested, tuple(fallbacks))

    self_idx = pop.index_of(agent.id)
    pid = pop.personas[_random_other_idx(n, self_idx, rng)].id
    return PartnerChoice(pid, "random", requested, tuple(fallbacks))


def select_partner(
    agent: Persona,
    pop: Population,
    policy: MixingPolicy,
    degrees: DegreeState,
    rng: np.random.Generator,
    *,
    cache: CandidateCache | None = None,
) -> tuple[str, str]:
    """(partner id, mode actually used). See select_partner_detail."""
    choice = select_partner_detail(agent, pop, policy, degrees, rng, cache=cache)
    return choice.partner_id, choice.mode


def draw_interaction_counts(p: Persona, rng: np.random.Generator) -> dict[str, int]:
    """Uniform-integer draws over the persona's per-run activity ranges.

    Draw order (posts, retweets, replies, quotes) is fixed: it is part of the
    deterministic stream contract.
    """
    out = {}
    for key, (lo, hi) in (
        ("posts", p.posts_per_run),
        ("retweets", p.retweets_per_run),
        ("replies", p.replies_per_run),
        ("quotes", p.quotes_per_run),
    ):
        out[key] = int(rng.integers(lo, hi + 1))
    return out


@dataclass
class EdgeStats:
    weight: int = 0
    retweets: int = 0
    quotes: int = 0
    replies: int = 0


@dataclass
class CommGraph:
    """Directed all-communication graph: one edge per interacting agent pair."""

    nodes: list[str]
    edges: dict[tuple[str, str], EdgeStats]

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def total_weight(self) -> int:
        return sum(e.weight for e in self.edges.values())

    def degree_arrays(self, pop: Population) -> tuple[np.ndarray, np.ndarray]:
        """(in_degree, out_degree) over distinct collapsed edges, population order."""
        in_deg = np.zeros(len(pop), dtype=np.int64)
        out_deg = np.zeros(len(pop), dtype=np.int64)
        for (src, dst) in self.edges:
            out_deg[pop.index_of(src)] += 1
            in_deg[pop.index_of(dst)] += 1
        return in_deg, out_deg


@dataclass(frozen=True)
class GraphMetrics:
    density: float
    avg_total_degree_centrality: float
    avg_in_degree_centrality: float
    avg_out_degree_centrality: float

    def to_dict(self) -> dict[str, float]:
        return {
            "density": self.density,
            "avg_total_degree_centrality": self.avg_total_degree_centrality,
            "avg_in_degree_centrality": self.avg_in_degree_centrality,
            "avg_out_degree_centrality": self.avg_out_degree_centrality,
        }


def build_comm_graph(tweets, pop: Population) -> CommGraph:
    """Collapse retweets/quotes/replies into directed author → target edges.

    Original posts contribute no edges; agents without interactions remain as
    isolate nodes. Any tweet referencing an agent outside the population, or
    targeting its own author, is a contract violation.
    """
    edges: dict[tuple[str, str], EdgeStats] = {}
    for t in tweets:
        if t.author_id not in pop:
            raise ValidationError(f"tweet {t.id}: unknown author {t.author_id!r}")
        if t.kind == "original" or t.target_agent_id is None:
            continue
        if t.target_agent_id not in pop:
            raise ValidationError(f"tweet {t.id}: unknown target {t.target_agent_id!r}")
        if t.target_agent_id == t.author_id:
            raise ValidationError(f"tweet {t.id}: self-interaction is not representable")
        stats = edges.setdefault((t.author_id, t.target_agent_id), EdgeStats())
        stats.weight += 1
        if t.kind == "retweet":
            stats.retweets += 1
        elif t.kind == "quote":
            stats.quotes += 1
        elif t.kind == "reply":
            stats.replies += 1
        else:
            raise ValidationError(f"tweet {t.id}: unknown kind {t.kind!r}")
    return CommGraph(nodes=pop.ids(), edges=edges)


def per_agent_centralities(g: CommGraph, pop: Population) -> dict[str, np.ndarray]:
    """Per-agent centralities in population order, (n-1)-normalized.

    total uses 2(n-1) so a node adjacent to everyone in both directions scores 1.
    """
    n = g.n_nodes
    if n < 2:
        raise ValidationError("graph metrics require at least 2 nodes")
    in_deg, out_deg = g.degree_arrays(pop)
    return {
        "in": in_deg / (n - 1),
        "out": out_deg / (n - 1),
        "total": (in_deg + out_deg) / (2 * (n - 1)),
    }


def graph_metrics(g: CommGraph, pop: Population) -> GraphMetrics:
    """Density over distinct directed edges plus mean degree centralities."""
    n = g.n_nodes
    if n < 2:
        raise ValidationError("graph metrics require at least 2 nodes")
    cents = per_agent_centralities(g, pop)
    return GraphMetrics(
        density=g.n_edges / (n * (n - 1)),
        avg_total_degree_centrality=float(cents["total"].mean()),
        avg_in_degree_centrality=float(cents["in"].mean()),
        avg_out_degree_centrality=float(cents["out"].mean()),
    )


def weighted_density(g: CommGraph) -> float:
    """Interaction count over possible directed pairs; not bounded by 1."""
    n = g.n_nodes
    if n < 2:
        raise ValidationError("weighted density requires at least 2 nodes")
    return g.total_weight() / (n * (n - 1))


def export_edges_csv(g: CommGraph, path: str | Path) -> None:
    """Edge list CSV `source,target,weight,retweets,quotes,replies`, sorted."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source", "target", "weight", "retweets", "quotes", "replies"])
        for (src, dst) in sorted(g.edges):
            e = g.edges[(src, dst)]
            writer.writerow([src, dst, e.weight, e.retweets, e.quotes, e.replies])


def export_graphml(g: CommGraph, pop: Population, path: str | Path) -> None:
    """GraphML export with node attribute `community` and edge attribute `weight`."""
    import networkx as nx

    dg = nx.DiGraph()
    for pid in g.nodes:
        dg.add_node(pid, community=pop.get(pid).community)
    for (src, dst) in sorted(g.edges):
        dg.add_edge(src, dst, weight=g.edges[(src, dst)].weight)
    nx.write_graphml(dg, str(path))
