"""Shared fixtures: small hand-built populations, shipped data, template backend."""

from __future__ import annotations

import pytest

from botforge.content import TemplateBackend, default_pools_path, load_pools
from botforge.cues import default_lexicon_dir, load_lexicons
from botforge.persona import Persona, Population, default_population_path, load_seed_personas


def make_persona(
    pid: str,
    community: str = "alpha",
    *,
    display: str | None = None,
    narratives=("Rollout of the new stage format #StageWatch",),
    stance: str = "neutral",
    posts=(3, 10),
    retweets=(2, 5),
    replies=(1, 5),
    quotes=(0, 2),
    leader: bool = False,
    origin: str = "manual",
) -> Persona:
    return Persona(
        id=pid,
        display_name=display or pid.replace("_", ""),
        community=community,
        narratives=tuple(narratives),
        stance=stance,
        posts_per_run=posts,
        retweets_per_run=retweets,
        replies_per_run=replies,
        quotes_per_run=quotes,
        is_leader=leader,
        origin=origin,
    )


@pytest.fixture(scope="session")
def lexicons():
    return load_lexicons(default_lexicon_dir())


@pytest.fixture(scope="session")
def seed_pop():
    return load_seed_personas(default_population_path())


@pytest.fixture(scope="session")
def pools():
    return load_pools(default_pools_path())


@pytest.fixture()
def micro_pop():
    """Two communities, four agents, one leader each."""
    return Population(
        personas=[
            make_persona("a_01", "alpha", leader=True, stance="support"),
            make_persona("a_02", "alpha", stance="oppose"),
            make_persona("b_01", "beta", leader=True,
                         narratives=("Venue logistics for the semifinal #VenueNotes",)),
            make_persona("b_02", "beta",
                         narratives=("Venue logistics for the semifinal #VenueNotes",)),
        ]
    )


@pytest.fixture()
def pair_pop():
    """Minimal two-agent population sharing one community."""
    return Population(
        personas=[
            make_persona("p_01", "gamma", leader=True),
            make_persona("p_02", "gamma"),
        ]
    )


@pytest.fixture()
def backend():
    return TemplateBackend(seed=7)
