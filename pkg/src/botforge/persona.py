"""Agent personas: loading, validation, and generative expansion.

A persona bundles the identity that conditions everything downstream:
its community, the narratives it posts about, its stance toward the focal
subject, and per-run activity bounds. Seed personas come from a JSON
document; a population can then be expanded to a target size by asking a
content backend for additional persona records, using seed personas as
few-shot context.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import BackendError, SchemaError, ValidationError
from .rng import stream

STANCES = ("support", "oppose", "neutral")
ORIGINS = ("manual", "generated")

# Keys of the persona JSON document, in canonical write order.
_DOC_KEYS = (
    "id",
    "display_name",
    "community",
    "narratives",
    "stance",
    "posts_per_run",
    "retweets_per_run",
    "replies_per_run",
    "quotes_per_run",
    "is_leader",
)
_OPTIONAL_KEYS = frozenset({"quotes_per_run", "is_leader"})

# quotes_per_run default when the document omits it.
DEFAULT_QUOTES_PER_RUN = (0, 2)

EXPANSION_BATCH_SIZE = 10

EXPANSION_SYSTEM_PROMPT = (
    "You construct agent personas for a social media simulation. "
    "You respond with JSON only."
)
EXPANSION_USER_PROMPT = (
    "Generate exactly {count} new agent personas for a social media simulation. "
    "Return a JSON array of {count} objects with exactly these keys: "
    "id, display_name, community, narratives, stance, posts_per_run, "
    "retweets_per_run, replies_per_run, quotes_per_run, is_leader. "
    'stance is one of "support", "oppose", "neutral"; narratives is a non-empty '
    "array of strings; each *_per_run value is a [lo, hi] pair of non-negative "
    "integers with lo <= hi; is_leader must be false. Use fresh ids that do not "
    "appear in the examples. Example personas: {examples}"
)


@dataclass(frozen=True)
class Persona:
    """One agent's identity. Immutable once constructed."""

    id: str
    display_name: str
    community: str
    narratives: tuple[str, ...]
    stance: str
    posts_per_run: tuple[int, int]
    retweets_per_run: tuple[int, int]
    replies_per_run: tuple[int, int]
    quotes_per_run: tuple[int, int] = DEFAULT_QUOTES_PER_RUN
    is_leader: bool = False
    origin: str = "manual"

    def violations(self, path: str = "persona") -> list[str]:
        """Field-level invariant violations, empty when the persona is valid."""
        out = []
        if not self.id:
            out.append(f"{path}.id: must be non-empty")
        if not self.community:
            out.append(f"{path}.community: must be non-empty")
        if not self.narratives:
            out.append(f"{path}.narratives: must be non-empty")
        if self.stance not in STANCES:
            out.append(f"{path}.stance: must be one of {STANCES} (got {self.stance!r})")
        if self.origin not in ORIGINS:
            out.append(f"{path}.origin: must be one of {ORIGINS} (got {self.origin!r})")
        for name in ("posts_per_run", "retweets_per_run", "replies_per_run", "quotes_per_run"):
            lo, hi = getattr(self, name)
            if not (0 <= lo <= hi):
                out.append(f"{path}.{name}: requires 0 <= lo <= hi (got [{lo}, {hi}])")
        return out

    def to_doc(self) -> dict:
        """Persona document object (the JSON wire form; origin is not part of it)."""
        return {
            "id": self.id,
            "display_name": self.display_name,
            "community": self.community,
            "narratives": list(self.narratives),
            "stance": self.stance,
            "posts_per_run": list(self.posts_per_run),
            "retweets_per_run": list(self.retweets_per_run),
            "replies_per_run": list(self.replies_per_run),
            "quotes_per_run": list(self.quotes_per_run),
            "is_leader": self.is_leader,
        }


@dataclass
class Population:
    """A validated persona list plus derived community/leader indexes.

    Read-only after construction; safe to share across threads.
    """

    personas: list[Persona]
    communities: dict[str, list[str]] = field(default_factory=dict)
    leaders: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self._by_id = {p.id: p for p in self.personas}
        self._index = {p.id: i for i, p in enumerate(self.personas)}
        if not self.communities:
            for p in self.personas:
                self.communities.setdefault(p.community, []).append(p.id)
            for p in self.personas:
                if p.is_leader:
                    self.leaders[p.community] = p.id

    def __len__(self) -> int:
        return len(self.personas)

    def __contains__(self, agent_id: str) -> bool:
        return agent_id in self._by_id

    def get(self, agent_id: str) -> Persona:
        return self._by_id[agent_id]

    def index_of(self, agent_id: str) -> int:
        """Dense index of an agent, stable for the population's lifetime."""
        return self._index[agent_id]

    def ids(self) -> list[str]:
        return [p.id for p in self.personas]

    def leader_of(self, community: str) -> str | None:
        return self.leaders.get(community)


def validate_population(pop: Population) -> list[str]:
    """All invariant violations in a population; empty list means valid.

    Never mutates; violations are data, not errors.
    """
    violations = []
    if not pop.personas:
        violations.append("population: population must be non-empty")
    seen_ids: set[str] = set()
    leaders_seen: dict[str, str] = {}
    for i, p in enumerate(pop.personas):
        path = f"personas[{i}]"
        violations.extend(p.violations(path))
        if p.id in seen_ids:
            violations.append(f"{path}.id: duplicate id {p.id!r}")
        seen_ids.add(p.id)
        if p.is_leader:
            if p.community in leaders_seen:
                violations.append(
                    f"{path}.is_leader: duplicate leader for community {p.community!r} "
                    f"({leaders_seen[p.community]!r} already is one)"
                )
            else:
                leaders_seen[p.community] = p.id
    return violations


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise SchemaError(f"{path}.{key}", "missing required key")
    return obj[key]


def _as_range(value, path: str) -> tuple[int, int]:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(v, int) and not isinstance(v, bool) for v in value)
    ):
        raise SchemaError(path, "must be a [lo, hi] pair of integers", value)
    lo, hi = int(value[0]), int(value[1])
    if not (0 <= lo <= hi):
        raise SchemaError(path, "requires 0 <= lo <= hi", [lo, hi])
    return lo, hi


def persona_from_doc(obj, path: str = "persona", origin: str = "manual") -> Persona:
    """Build a Persona from one document object, raising SchemaError on any defect."""
    if not isinstance(obj, dict):
        raise SchemaError(path, "must be an object", obj)
    unknown = set(obj) - set(_DOC_KEYS)
    if unknown:
        raise SchemaError(path, f"unknown keys {sorted(unknown)}")
    for key in _DOC_KEYS:
        if key not in _OPTIONAL_KEYS:
            _require(obj, key, path)

    pid = obj["id"]
    if not isinstance(pid, str) or not pid:
        raise SchemaError(f"{path}.id", "must be a non-empty string", pid)
    display = obj["display_name"]
    if not isinstance(display, str) or not display:
        raise SchemaError(f"{path}.display_name", "must be a non-empty string", display)
    community = obj["community"]
    if not isinstance(community, str) or not community:
        raise SchemaError(f"{path}.community", "must be a non-empty string", community)
    narratives = obj["narratives"]
    if (
        not isinstance(narratives, list)
        or not narratives
        or not all(isinstance(n, str) and n for n in narratives)
    ):
        raise SchemaError(f"{path}.narratives", "must be a non-empty array of strings", narratives)
    stance = obj["stance"]
    if stance not in STANCES:
        raise SchemaError(f"{path}.stance", f"must be one of {STANCES}", stance)
    is_leader = obj.get("is_leader", False)
    if not isinstance(is_leader, bool):
        raise SchemaError(f"{path}.is_leader", "must be a boolean", is_leader)

    quotes = obj.get("quotes_per_run")
    return Persona(
        id=pid,
        display_name=display,
        community=community,
        narratives=tuple(narratives),
        stance=stance,
        posts_per_run=_as_range(obj["posts_per_run"], f"{path}.posts_per_run"),
        retweets_per_run=_as_range(obj["retweets_per_run"], f"{path}.retweets_per_run"),
        replies_per_run=_as_range(obj["replies_per_run"], f"{path}.replies_per_run"),
        quotes_per_run=(
            DEFAULT_QUOTES_PER_RUN if quotes is None else _as_range(quotes, f"{path}.quotes_per_run")
        ),
        is_leader=is_leader,
        origin=origin,
    )


def _build_population(personas: list[Persona]) -> Population:
    pop = Population(personas)
    violations = validate_population(pop)
    if violations:
        raise ValidationError("; ".join(violations))
    return pop


def default_population_path() -> Path:
    """The shipped 169-persona seed population."""
    return Path(__file__).parent / "data" / "personas" / "aurasight_169.json"


def load_seed_personas(path: str | Path) -> Population:
    """Load and validate a persona document; all personas get origin=manual."""
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read persona file {path}: {exc}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SchemaError(str(path), f"not valid JSON: {exc}") from exc
    if not isinstance(doc, list):
        raise SchemaError(str(path), "top level must be an array of persona objects")
    personas = [
        persona_from_doc(obj, path=f"personas[{i}]", origin="manual") for i, obj in enumerate(doc)
    ]
    return _build_population(personas)


def save_personas(pop: Population, path: str | Path) -> None:
    """Write the persona document for a population (round-trips with load)."""
    doc = [p.to_doc() for p in pop.personas]
    Path(path).write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def _extract_json_array(text: str):
    """Parse a JSON array out of backend text, tolerating code fences and prose margins."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    match = re.search(r"\[.*\]", text, flags=re.DOTALL)
    if match:
        try:
            return json.loads(match.group(0))
        except json.JSONDecodeError:
            pass
    raise BackendError(
        "backend did not return a parseable JSON array of personas", raw_text=text
    )


def expand_personas(
    seed: Population,
    target_count: int,
    backend,
    *,
    run_seed: int = 0,
    params: dict | None = None,
    batch_size: int = EXPANSION_BATCH_SIZE,
    retry_cap: int = 5,
) -> Population:
    """Grow a population to target_count by requesting persona batches from a backend.

    Seed personas are returned verbatim; generated ones carry origin=generated and
    ids that never collide with seed ids. Each batch prompt embeds a few-shot
    sample of seed personas and demands a structured JSON array. Records that fail
    validation are dropped and regenerated; after retry_cap fruitless batches the
    expansion fails with a summary of what was dropped.
    """
    if target_count < len(seed):
        raise ValidationError(
            f"target below seed size: target_count={target_count} < {len(seed)} seeds"
        )
    if target_count == len(seed):
        return seed

    params = dict(params or {})
    rng = stream(run_seed, "persona-expand")
    committed: list[Persona] = list(seed.personas)
    taken_ids = {p.id for p in committed}
    leaders_taken = set(seed.leaders)
    drop_log: list[str] = []
    fruitless = 0
    batch_index = 0

    while len(committed) < target_count:
        want = min(batch_size, target_count - len(committed))
        sample_size = min(3, len(seed.personas))
        sample_idx = rng.choice(len(seed.personas), size=sample_size, replace=False)
        examples = json.dumps([seed.personas[i].to_doc() for i in sorted(sample_idx)])
        user_text = EXPANSION_USER_PROMPT.format(count=want, examples=examples)
        raw = backend.complete(EXPANSION_SYSTEM_PROMPT, user_text, params)
        try:
            records = _extract_json_array(raw)
        except BackendError as exc:
            drop_log.append(f"batch[{batch_index}]: {exc}")
            records = []
        if not isinstance(records, list):
            drop_log.append(f"batch[{batch_index}]: top-level JSON was not an array")
            records = []

        progressed = False
        for j, obj in enumerate(records):
            if len(committed) >= target_count:
                break
            path = f"batch[{batch_index}][{j}]"
            try:
                p = persona_from_doc(obj, path=path, origin="generated")
            except SchemaError as exc:
                drop_log.append(str(exc))
                continue
            if p.id in taken_ids:
                drop_log.append(f"{path}.id: collides with existing id {p.id!r}")
                continue
            if p.is_leader and p.community in leaders_taken:
                drop_log.append(f"{path}.is_leader: community {p.community!r} already has a leader")
                continue
            committed.append(p)
            taken_ids.add(p.id)
            if p.is_leader:
                leaders_taken.add(p.community)
            progressed = True

        if progressed:
            fruitless = 0
        else:
            fruitless += 1
            if fruitless > retry_cap:
                summary = "; ".join(drop_log[-10:]) or "backend produced no usable records"
                raise BackendError(
                    f"persona expansion stalled after {retry_cap} fruitless batches: {summary}",
                    raw_text=raw,
                )
        batch_index += 1

    return _build_population(committed)
