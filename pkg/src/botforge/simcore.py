"""Simulation orchestration: agents act, tweets commit, the graph grows.

A run iterates agents in id order. Each agent draws its activity counts,
emits its original posts, then works through its retweet/reply/quote slots:
pick a partner, target the partner's most recent tweet, generate content,
commit. Commit order is strictly (run, agent, slot), tweet ids are assigned
in that order, and every random draw comes from a labeled stream of the one
root seed, so a config fully determines the outputs. Runs can later be
extended: the degree state is rebuilt from the stored graph and new runs
append to the corpus.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .content import (
    DEFAULT_MODEL_NAME,
    EMPTY_POOLS,
    GenerationTask,
    PromptScheme,
    generate_post,
    load_pools,
    make_backend,
    parse_scheme,
    select_narrative,
)
from .errors import BackendError, BotforgeError, ManifestError, SchemaError, ValidationError
from .netgraph import (
    CandidateCache,
    CommGraph,
    DegreeState,
    GraphMetrics,
    MixingPolicy,
    POLICY_PRESETS,
    build_comm_graph,
    draw_interaction_counts,
    export_edges_csv,
    export_graphml,
    graph_metrics,
    select_partner_detail,
    weighted_density,
)
from .persona import Population, load_seed_personas, save_personas, validate_population
from .rng import stream

TWEET_KINDS = ("original", "retweet", "quote", "reply")
# Slot kinds are processed in this order within an agent's turn.
SLOT_ORDER = (("retweet", "retweets"), ("reply", "replies"), ("quote", "quotes"))

MANIFEST_FORMAT = "botforge-run-v1"

_TWEET_KEYS = (
    "id",
    "author_id",
    "kind",
    "slot_kind",
    "text",
    "target_tweet_id",
    "target_agent_id",
    "run_index",
    "slot_index",
    "mentions",
    "hashtags",
    "urls",
)


@dataclass(frozen=True)
class Tweet:
    """One committed post with its interaction targets and extracted artifacts.

    slot_kind is the drawn slot (retweet/reply/quote) that produced an
    interaction tweet; it differs from kind only when a missing target tweet
    degraded the slot to a mention reply.
    """

    id: int
    author_id: str
    kind: str
    text: str
    target_tweet_id: int | None
    target_agent_id: str | None
    run_index: int
    slot_index: int
    slot_kind: str = "original"
    mentions: tuple[str, ...] = ()
    hashtags: tuple[str, ...] = ()
    urls: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "mentions", tuple(self.mentions))
        object.__setattr__(self, "hashtags", tuple(self.hashtags))
        object.__setattr__(self, "urls", tuple(self.urls))

    def violations(self) -> list[str]:
        out = []
        if self.kind not in TWEET_KINDS:
            out.append(f"tweet {self.id}: unknown kind {self.kind!r}")
        if self.slot_kind not in TWEET_KINDS:
            out.append(f"tweet {self.id}: unknown slot_kind {self.slot_kind!r}")
        if len(self.text) > 280:
            out.append(f"tweet {self.id}: text exceeds 280 characters")
        if self.kind == "original":
            if self.target_tweet_id is not None or self.target_agent_id is not None:
                out.append(f"tweet {self.id}: original tweets carry no target")
        else:
            if self.target_agent_id is None:
                out.append(f"tweet {self.id}: {self.kind} requires a target agent")
            if self.kind in ("retweet", "quote") and self.target_tweet_id is None:
                out.append(f"tweet {self.id}: {self.kind} requires a target tweet")
        return out

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "author_id": self.author_id,
            "kind": self.kind,
            "slot_kind": self.slot_kind,
            "text": self.text,
            "target_tweet_id": self.target_tweet_id,
            "target_agent_id": self.target_agent_id,
            "run_index": self.run_index,
            "slot_index": self.slot_index,
            "mentions": list(self.mentions),
            "hashtags": list(self.hashtags),
            "urls": list(self.urls),
        }


def tweet_from_dict(obj, path: str = "tweet") -> Tweet:
    if not isinstance(obj, dict):
        raise SchemaError(path, "must be an object", obj)
    unknown = set(obj) - set(_TWEET_KEYS)
    if unknown:
        raise SchemaError(path, f"unknown keys {sorted(unknown)}")
    missing = [k for k in _TWEET_KEYS if k not in obj]
    if missing:
        raise SchemaError(path, f"missing keys {missing}")
    t = Tweet(
        id=obj["id"],
        author_id=obj["author_id"],
        kind=obj["kind"],
        text=obj["text"],
        target_tweet_id=obj["target_tweet_id"],
        target_agent_id=obj["target_agent_id"],
        run_index=obj["run_index"],
        slot_index=obj["slot_index"],
        slot_kind=obj["slot_kind"],
        mentions=obj["mentions"],
        hashtags=obj["hashtags"],
        urls=obj["urls"],
    )
    problems = t.violations()
    if problems:
        raise SchemaError(path, "; ".join(problems))
    return t


def write_tweets_jsonl(tweets, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in tweets:
            fh.write(json.dumps(t.to_dict(), ensure_ascii=False) + "\n")


def read_tweets_jsonl(path: str | Path) -> list[Tweet]:
    tweets = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{lineno}", f"not valid JSON: {exc}") from exc
            tweets.append(tweet_from_dict(obj, path=f"{path}:{lineno}"))
    return tweets


@dataclass
class ScenarioConfig:
    """Everything a simulation run depends on, echoed into the manifest."""

    seed: int = 0
    mixing: MixingPolicy = field(default_factory=MixingPolicy.pa_only)
    scheme: PromptScheme = field(default_factory=PromptScheme)
    backend: str = "template"
    model_name: str = DEFAULT_MODEL_NAME
    temperature: float = 0.0
    max_tokens: int | None = None
    base_url: str | None = None
    runs: int = 1
    population_path: str | None = None
    pools_path: str | None = None
    out_dir: str | None = None
    require_both_eligibility: bool = False
    max_in_flight: int = 1
    max_retries: int = 3
    backoff_s: float = 0.5

    def validate(self) -> None:
        if not 0 <= self.seed < 2**64:
            raise ValidationError(f"seed must be a 64-bit unsigned integer (got {self.seed})")
        if self.temperature < 0:
            raise ValidationError(f"temperature must be >= 0 (got {self.temperature})")
        if self.runs < 1:
            raise ValidationError(f"runs must be >= 1 (got {self.runs})")
        if self.max_in_flight < 1:
            raise ValidationError(f"max_in_flight must be >= 1 (got {self.max_in_flight})")
        if self.max_retries < 0:
            raise ValidationError(f"max_retries must be >= 0 (got {self.max_retries})")

    def backend_params(self) -> dict:
        return {
            "model_name": self.model_name,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }

    def to_manifest_dict(self) -> dict:
        # Full config echo; credentials live only in the environment.
        return {
            "seed": self.seed,
            "mixing": [self.mixing.p_pa, self.mixing.p_leader, self.mixing.p_random],
            "scheme": {"level": self.scheme.level, "targeted_cues": list(self.scheme.targeted_cues)},
            "backend": self.backend,
            "model_name": self.model_name,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
            "base_url": self.base_url,
            "runs": self.runs,
            "population_path": self.population_path,
            "pools_path": self.pools_path,
            "out_dir": self.out_dir,
            "require_both_eligibility": self.require_both_eligibility,
            "max_in_flight": self.max_in_flight,
            "max_retries": self.max_retries,
            "backoff_s": self.backoff_s,
        }


_CONFIG_KEYS = set(ScenarioConfig().to_manifest_dict())


def _parse_mixing(value) -> MixingPolicy:
    if isinstance(value, MixingPolicy):
        return value
    if isinstance(value, str):
        if value in POLICY_PRESETS:
            return POLICY_PRESETS[value]()
        parts = [s.strip() for s in value.split(",")]
        if len(parts) != 3:
            raise ValidationError(
                f"mixing {value!r} must be 'p_pa,p_leader,p_random' or one of {sorted(POLICY_PRESETS)}"
            )
        try:
            nums = [float(s) for s in parts]
        except ValueError:
            raise ValidationError(f"mixing {value!r} has non-numeric components") from None
        return MixingPolicy(*nums)
    if isinstance(value, (list, tuple)) and len(value) == 3:
        return MixingPolicy(*(float(v) for v in value))
    raise ValidationError(f"cannot interpret mixing policy {value!r}")


def _parse_scheme_value(value) -> PromptScheme:
    if isinstance(value, PromptScheme):
        return value
    if isinstance(value, str):
        return parse_scheme(value)
    if isinstance(value, dict):
        return PromptScheme(
            level=value.get("level", "naive"),
            targeted_cues=tuple(value.get("targeted_cues", ())),
        )
    raise ValidationError(f"cannot interpret scheme {value!r}")


def config_from_dict(doc: dict, path: str = "config") -> ScenarioConfig:
    """Build a ScenarioConfig from a JSON-shaped dict (config file / manifest echo)."""
    if not isinstance(doc, dict):
        raise SchemaError(path, "must be an object", doc)
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise SchemaError(path, f"unknown config keys {sorted(unknown)}")
    kwargs = dict(doc)
    if "mixing" in kwargs:
        kwargs["mixing"] = _parse_mixing(kwargs["mixing"])
    if "scheme" in kwargs:
        kwargs["scheme"] = _parse_scheme_value(kwargs["scheme"])
    cfg = ScenarioConfig(**kwargs)
    cfg.validate()
    return cfg


class SimulationAborted(BotforgeError):
    """A run stopped early; partial results are attached for salvage output."""

    def __init__(self, message: str, result: "SimResult"):
        super().__init__(message)
        self.result = result


@dataclass
class SimResult:
    tweets: list[Tweet]
    graph: CommGraph
    metrics: GraphMetrics | None
    log: list[str]
    start_run_index: int
    runs_completed: int  # total runs reflected in tweets (prior + new)
    status: str = "ok"
    error: str | None = None


def run_simulation(
    cfg: ScenarioConfig,
    pop: Population,
    backend,
    *,
    pools: dict[str, list[str]] | None = None,
    start_run_index: int = 0,
    initial_tweets: list[Tweet] | None = None,
    initial_degrees: DegreeState | None = None,
) -> SimResult:
    """Execute cfg.runs simulation runs and return the full committed corpus.

    Backend failure aborts with partial results attached (SimulationAborted);
    everything committed up to that point stays valid.
    """
    cfg.validate()
    violations = validate_population(pop)
    if violations:
        raise ValidationError("; ".join(violations))
    if pools is None:
        pools = load_pools(cfg.pools_path) if cfg.pools_path else EMPTY_POOLS

    degrees = initial_degrees if initial_degrees is not None else DegreeState(pop)
    cache = CandidateCache(pop, require_both=cfg.require_both_eligibility)
    tweets: list[Tweet] = list(initial_tweets or ())
    last_by_agent: dict[str, Tweet] = {}
    for t in tweets:
        last_by_agent[t.author_id] = t
    next_id = tweets[-1].id + 1 if tweets else 1
    params = cfg.backend_params()
    agent_order = sorted(pop.ids())

    log = [
        f"simulation: seed={cfg.seed} runs={cfg.runs} start_run={start_run_index} "
        f"agents={len(pop)} backend={cfg.backend} scheme={cfg.scheme.level} "
        f"mixing=({cfg.mixing.p_pa},{cfg.mixing.p_leader},{cfg.mixing.p_random})"
    ]
    status, error = "ok", None
    runs_done = start_run_index

    try:
        for run_index in range(start_run_index, start_run_index + cfg.runs):
            for pid in agent_order:
                p = pop.get(pid)
                counts = draw_interaction_counts(p, stream(cfg.seed, "counts", str(run_index), pid))
                log.append(
                    f"[run {run_index}] agent {pid}: "
                    + " ".join(f"{k}={v}" for k, v in counts.items())
                )
                rng_narrative = stream(cfg.seed, "narrative", str(run_index), pid)
                rng_partner = stream(cfg.seed, "partner", str(run_index), pid)
                rng_prompt = stream(cfg.seed, "prompt", str(run_index), pid)
                slot = 0

                def _commit(task: GenerationTask) -> None:
                    nonlocal next_id
                    here = f"[run {run_index}] agent {pid} slot {task.slot_index}"
                    tw = generate_post(
                        p,
                        task,
                        cfg.scheme,
                        pools,
                        backend,
                        rng_prompt,
                        params=params,
                        on_event=lambda msg: log.append(f"{here}: {msg}"),
                    )
                    tweets.append(tw)
                    last_by_agent[pid] = tw
                    next_id += 1

                for _ in range(counts["posts"]):
                    narrative = select_narrative(p, rng_narrative)
                    _commit(
                        GenerationTask(
                            kind="original",
                            tweet_id=next_id,
                            run_index=run_index,
                            slot_index=slot,
                            narrative=narrative,
                        )
                    )
                    slot += 1

                for slot_kind, count_key in SLOT_ORDER:
                    for _ in range(counts[count_key]):
                        if len(pop) < 2:
                            log.append(
                                f"[run {run_index}] agent {pid} slot {slot}: "
                                f"no other agents; {slot_kind} slot skipped"
                            )
                            slot += 1
                            continue
                        choice = select_partner_detail(
                            p, pop, cfg.mixing, degrees, rng_partner, cache=cache
                        )
                        for fb in choice.fallbacks:
                            log.append(
                                f"[run {run_index}] agent {pid} slot {slot}: fallback {fb}"
                            )
                        partner = choice.partner_id
                        display = pop.get(partner).display_name
                        target = last_by_agent.get(partner)
                        if target is None:
                            log.append(
                                f"[run {run_index}] agent {pid} slot {slot}: partner {partner} "
                                f"has no tweets; {slot_kind} degraded to mention reply"
                            )
                            task = GenerationTask(
                                kind="reply",
                                tweet_id=next_id,
                                run_index=run_index,
                                slot_index=slot,
                                target_agent_id=partner,
                                target_display=display,
                                slot_kind=slot_kind,
                            )
                        else:
                            task = GenerationTask(
                                kind=slot_kind,
                                tweet_id=next_id,
                                run_index=run_index,
                                slot_index=slot,
                                target_tweet_id=target.id,
                                target_text=target.text,
                                target_agent_id=partner,
                                target_display=display,
                                slot_kind=slot_kind,
                            )
                        _commit(task)
                        degrees.commit(pid, partner)
                        slot += 1
            runs_done = run_index + 1
    except BackendError as exc:
        status, error = "aborted", str(exc)
        log.append(f"ABORTED: {error}")

    log.append(f"committed {len(tweets)} tweets, {degrees.n_interactions} interactions")
    graph = build_comm_graph(tweets, pop)
    metrics = graph_metrics(graph, pop) if len(pop) >= 2 else None
    result = SimResult(
        tweets=tweets,
        graph=graph,
        metrics=metrics,
        log=log,
        start_run_index=start_run_index,
        runs_completed=runs_done,
        status=status,
        error=error,
    )
    if status != "ok":
        raise SimulationAborted(error, result)
    return result


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_outputs(
    result: SimResult,
    cfg: ScenarioConfig,
    pop: Population,
    pools: dict[str, list[str]],
    out_dir: str | Path,
) -> Path:
    """Write the full output directory layout; the manifest is written last."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    write_tweets_jsonl(result.tweets, out / "tweets.jsonl")
    export_edges_csv(result.graph, out / "graph.csv")
    export_graphml(result.graph, pop, out / "graph.graphml")

    if result.metrics is not None:
        metrics_doc = dict(result.metrics.to_dict())
        metrics_doc["weighted_density"] = weighted_density(result.graph)
        metrics_doc["defined"] = True
    else:
        metrics_doc = {"defined": False, "reason": "fewer than 2 agents"}
    metrics_doc["n_nodes"] = result.graph.n_nodes
    metrics_doc["n_edges"] = result.graph.n_edges
    metrics_doc["n_interactions"] = result.graph.total_weight()
    (out / "metrics.json").write_text(
        json.dumps(metrics_doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    (out / "run.log").write_text("\n".join(result.log) + "\n", encoding="utf-8")
    save_personas(pop, out / "population.json")
    (out / "pools.json").write_text(
        json.dumps(pools, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    files = {}
    for name in ("tweets.jsonl", "graph.csv", "graph.graphml", "metrics.json",
                 "run.log", "population.json", "pools.json"):
        files[name] = _sha256_file(out / name)
    manifest = {
        "format": MANIFEST_FORMAT,
        "status": result.status,
        "error": result.error,
        "config": cfg.to_manifest_dict(),
        "runs_completed": result.runs_completed,
        "tweet_count": len(result.tweets),
        "files": files,
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return out


def simulate_to_dir(
    cfg: ScenarioConfig,
    *,
    pop: Population | None = None,
    pools: dict[str, list[str]] | None = None,
    backend=None,
) -> SimResult:
    """Load inputs, run the simulation, and write the output directory.

    On a mid-run backend failure the partial outputs (with an aborted
    manifest) are still written before the error propagates.
    """
    if not cfg.out_dir:
        raise ValidationError("config has no out_dir")
    if pop is None:
        if not cfg.population_path:
            raise ValidationError("config has no population_path")
        pop = load_seed_personas(cfg.population_path)
    if pools is None:
        pools = load_pools(cfg.pools_path) if cfg.pools_path else EMPTY_POOLS
    if backend is None:
        backend = make_backend(
            cfg.backend,
            seed=cfg.seed,
            base_url=cfg.base_url,
            max_retries=cfg.max_retries,
            backoff_s=cfg.backoff_s,
        )
    try:
        result = run_simulation(cfg, pop, backend, pools=pools)
    except SimulationAborted as exc:
        write_outputs(exc.result, cfg, pop, pools, cfg.out_dir)
        raise
    write_outputs(result, cfg, pop, pools, cfg.out_dir)
    return result


def read_manifest(run_dir: str | Path) -> dict:
    path = Path(run_dir) / "manifest.json"
    if not path.is_file():
        raise ManifestError(f"no manifest.json in {run_dir}")
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest.json in {run_dir} is not valid JSON: {exc}") from exc
    if not isinstance(manifest, dict) or manifest.get("format") != MANIFEST_FORMAT:
        raise ManifestError(f"manifest.json in {run_dir} is not a {MANIFEST_FORMAT} manifest")
    return manifest


def verify_manifest_files(run_dir: str | Path, manifest: dict, names) -> None:
    """Check stored hashes for the named files; any mismatch is a refusal."""
    run_dir = Path(run_dir)
    for name in names:
        recorded = manifest.get("files", {}).get(name)
        if recorded is None:
            raise ManifestError(f"manifest records no hash for {name}")
        actual = _sha256_file(run_dir / name)
        if actual != recorded:
            raise ManifestError(
                f"hash mismatch for {name}: manifest records {recorded}, file is {actual}"
            )


def _degrees_from_graph_csv(path: Path, pop: Population) -> DegreeState:
    import csv as _csv

    degrees = DegreeState(pop)
    with open(path, newline="", encoding="utf-8") as fh:
        for row in _csv.DictReader(fh):
            weight = int(row["weight"])
            src, dst = row["source"], row["target"]
            degrees.out_deg[pop.index_of(src)] += weight
            degrees.in_deg[pop.index_of(dst)] += weight
            degrees.n_interactions += weight
    return degrees


def resume_or_extend(prev_dir: str | Path, cfg: ScenarioConfig) -> SimResult:
    """Append cfg.runs further runs on top of a finished run directory.

    The prior corpus is loaded from the directory's own snapshots, its
    integrity is verified against the manifest hashes, and the degree state
    is rebuilt from the stored graph so attachment continues from the prior
    structure. Output goes to cfg.out_dir (defaulting to prev_dir).
    """
    prev_dir = Path(prev_dir)
    manifest = read_manifest(prev_dir)
    if manifest.get("status") != "ok":
        raise ManifestError(f"cannot extend a run with status {manifest.get('status')!r}")
    verify_manifest_files(
        prev_dir, manifest, ("tweets.jsonl", "graph.csv", "population.json", "pools.json")
    )

    pop = load_seed_personas(prev_dir / "population.json")
    pools = load_pools(prev_dir / "pools.json")
    prior = read_tweets_jsonl(prev_dir / "tweets.jsonl")
    degrees = _degrees_from_graph_csv(prev_dir / "graph.csv", pop)
    start = int(manifest["runs_completed"])

    out_dir = cfg.out_dir or str(prev_dir)
    cfg = replace(cfg, out_dir=out_dir, population_path=str(prev_dir / "population.json"),
                  pools_path=str(prev_dir / "pools.json"))
    backend = make_backend(
        cfg.backend,
        seed=cfg.seed,
        base_url=cfg.base_url,
        max_retries=cfg.max_retries,
        backoff_s=cfg.backoff_s,
    )
    try:
        result = run_simulation(
            cfg,
            pop,
            backend,
            pools=pools,
            start_run_index=start,
            initial_tweets=prior,
            initial_degrees=degrees,
        )
    except SimulationAborted as exc:
        write_outputs(exc.result, cfg, pop, pools, out_dir)
        raise
    write_outputs(result, cfg, pop, pools, out_dir)
    return result


def load_corpus(run_dir: str | Path) -> tuple[Population, list[Tweet]]:
    """The population snapshot and tweet corpus of a run directory."""
    run_dir = Path(run_dir)
    tweets_path = run_dir / "tweets.jsonl"
    pop_path = run_dir / "population.json"
    if not tweets_path.is_file():
        raise FileNotFoundError(f"no tweets.jsonl in {run_dir}")
    if not pop_path.is_file():
        raise FileNotFoundError(f"no population.json in {run_dir}")
    return load_seed_personas(pop_path), read_tweets_jsonl(tweets_path)
