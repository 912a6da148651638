"""Tokenization, lexicon matching, readability, and cue aggregation."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from botforge.cues import (
    CUE_NAMES,
    LEXICON_CATEGORIES,
    CueVector,
    Lexicon,
    aggregate_cues,
    count_lexicon_terms,
    is_artifact_token,
    load_lexicon,
    metadata_cues,
    read_cue_report,
    reading_difficulty,
    text_cues,
    tokenize,
    write_cue_report,
)
from botforge.errors import SchemaError, ValidationError
from botforge.netgraph import GraphMetrics, build_comm_graph, graph_metrics
from botforge.persona import Population
from botforge.simcore import Tweet

from conftest import make_persona

FLAT_METRICS = GraphMetrics(0.0, 0.0, 0.0, 0.0)


def post(tid, author, text, run=0, slot=0):
    from botforge.content import _extract_artifacts

    mentions, hashtags, urls = _extract_artifacts(text)
    return Tweet(id=tid, author_id=author, kind="original", text=text,
                 target_tweet_id=None, target_agent_id=None, run_index=run,
                 slot_index=slot, mentions=mentions, hashtags=hashtags, urls=urls)


class TestTokenize:
    def test_mixed_artifacts(self):
        assert tokenize("Go @bob! #win #win http://t.co/x") == [
            "Go", "@bob", "#win", "#win", "http://t.co/x",
        ]

    def test_empty(self):
        assert tokenize("") == []

    def test_inner_punctuation_kept_edges_stripped(self):
        assert tokenize("I love it, I do.") == ["I", "love", "it", "I", "do"]

    def test_url_kept_whole(self):
        assert tokenize("see https://a.example/x?y=1.") == ["see", "https://a.example/x?y=1."]

    def test_pure_punctuation_dropped(self):
        assert tokenize("!!! ... ???") == []

    def test_leading_marker_kept_trailing_stripped(self):
        assert tokenize("@bob, #tag!") == ["@bob", "#tag"]

    def test_artifact_classifier(self):
        assert is_artifact_token("@bob")
        assert is_artifact_token("#win")
        assert is_artifact_token("http://t.co/x")
        assert not is_artifact_token("plain")
        assert not is_artifact_token("@")  # needs at least one word char


class TestLexicon:
    def test_from_terms_normalizes_case(self):
        lex = Lexicon.from_terms("positive", ["Great", "WELL done"])
        assert count_lexicon_terms("great great well done", lex) == 3

    def test_term_length_cap(self):
        with pytest.raises(SchemaError):
            Lexicon.from_terms("positive", ["one two three four"])

    def test_empty_term_rejected(self):
        with pytest.raises(SchemaError):
            Lexicon.from_terms("positive", ["  "])

    def test_spec_first_person_example(self):
        lex = Lexicon.from_terms("first_person", ["i", "me", "my", "mine", "we", "us", "our"])
        assert count_lexicon_terms("I love it, I do.", lex) == 2

    def test_spec_second_person_example(self):
        lex = Lexicon.from_terms("second_person", ["you", "your"])
        assert count_lexicon_terms("You and you and YOU", lex) == 3

    def test_empty_text(self, lexicons):
        assert all(count_lexicon_terms("", lex) == 0 for lex in lexicons.values())

    def test_longest_match_first(self):
        lex = Lexicon.from_terms("negative", ["lack", "lack of variety"])
        assert count_lexicon_terms("such a lack of variety", lex) == 1
        assert count_lexicon_terms("a lack of effort", lex) == 1  # falls back to unigram

    def test_matches_do_not_overlap(self):
        lex = Lexicon.from_terms("negative", ["a b", "b c"])
        assert count_lexicon_terms("a b c", lex) == 1

    def test_artifact_tokens_never_match(self):
        lex = Lexicon.from_terms("positive", ["love", "win"])
        assert count_lexicon_terms("#love @love http://love.example love", lex) == 1

    def test_union(self):
        a = Lexicon.from_terms("positive", ["good"])
        b = Lexicon.from_terms("positive", ["great good"])
        u = a.union(b)
        assert count_lexicon_terms("great good and good", u) == 2

    def test_shipped_categories_complete(self, lexicons):
        assert set(lexicons) == set(LEXICON_CATEGORIES)
        assert all(lex.terms for lex in lexicons.values())

    def test_missing_file_names_category(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="abusive"):
            load_lexicon(tmp_path / "abusive.txt", "abusive")

    def test_comments_and_blanks_ignored(self, tmp_path):
        path = tmp_path / "positive.txt"
        path.write_text("# comment line\n\ngood\nwell done\n")
        lex = load_lexicon(path, "positive")
        assert count_lexicon_terms("good, well done", lex) == 2


class TestReadingDifficulty:
    def test_spec_example_clamps_to_zero(self):
        assert reading_difficulty("The cat sat.") == 0.0

    def test_spec_example_watermelon(self):
        assert round(reading_difficulty("I like watermelon."), 4) == 0.0918

    def test_empty_text(self):
        assert reading_difficulty("") == 0.0

    def test_artifacts_excluded(self):
        base = reading_difficulty("I like watermelon.")
        assert reading_difficulty("@bob #snack http://x.example I like watermelon.") == base

    def test_multi_sentence_splits(self):
        # 6 words / 2 sentences = 3 words per sentence, same syllable ratio
        one = reading_difficulty("I like watermelon. I like watermelon.")
        assert one == pytest.approx(reading_difficulty("I like watermelon."))

    def test_score_bounded(self):
        hard = "Incomprehensibility " * 40
        assert 0.0 <= reading_difficulty(hard) <= 1.0


class TestMetadataCues:
    def test_spec_example(self):
        assert metadata_cues("Go @bob! #win #win http://t.co/x") == {
            "mentions": 1, "urls": 1, "hashtags": 2,
        }

    def test_plain(self):
        assert metadata_cues("plain text") == {"mentions": 0, "urls": 0, "hashtags": 0}

    def test_mentions_only(self):
        assert metadata_cues("@a @b @c") == {"mentions": 3, "urls": 0, "hashtags": 0}

    def test_accepts_tweet(self):
        t = post(1, "a_01", "Go @bob! #win #win http://t.co/x")
        assert metadata_cues(t) == {"mentions": 1, "urls": 1, "hashtags": 2}


class TestTextCues:
    def test_hand_counted_vector(self, lexicons):
        vals = text_cues("I hate that you love my work.", lexicons)
        assert vals["first_person_pronouns"] == 2  # I, my
        assert vals["second_person_pronouns"] == 1  # you
        assert vals["negative_sentiment"] == 1  # hate
        assert vals["positive_sentiment"] == 1  # love
        assert vals["abusive_terms"] == 0
        assert vals["expletives"] == 0


class TestCueVector:
    def test_canonical_order(self):
        assert len(CUE_NAMES) == 14
        assert CUE_NAMES[0] == "first_person_pronouns"
        assert CUE_NAMES[-3:] == ("total_degree", "in_degree", "out_degree")

    def test_violations(self):
        vec = CueVector(**{name: 0.0 for name in CUE_NAMES})
        assert vec.violations() == []
        bad = CueVector(**{**{n: 0.0 for n in CUE_NAMES}, "mentions": -1.0,
                           "reading_difficulty": 2.0})
        msgs = bad.violations()
        assert any("mentions" in m for m in msgs)
        assert any("reading_difficulty" in m for m in msgs)

    def test_as_dict_order(self):
        vec = CueVector(**{name: float(i) for i, name in enumerate(CUE_NAMES)})
        assert tuple(vec.as_dict()) == CUE_NAMES


class TestAggregate:
    @pytest.fixture()
    def tiny(self):
        pop = Population(personas=[
            make_persona("a_01", "alpha"),
            make_persona("a_02", "alpha"),
            make_persona("a_03", "alpha"),
        ])
        tweets = [
            post(1, "a_01", "I win #go"),
            post(2, "a_01", "I am sure I do"),
            post(3, "a_02", "plain words here"),
        ]
        return pop, tweets

    def test_two_level_mean(self, tiny, lexicons):
        pop, tweets = tiny
        agg = aggregate_cues(tweets, FLAT_METRICS, pop, lexicons)
        # a_01 first person: (1 + 2) / 2 = 1.5 ; a_02: 0.0 ; corpus mean 0.75
        assert agg.per_agent["a_01"].first_person_pronouns == pytest.approx(1.5)
        assert agg.per_agent["a_02"].first_person_pronouns == 0.0
        assert agg.corpus.first_person_pronouns == pytest.approx(0.75)
        # hashtags: a_01 mean 0.5, a_02 mean 0 -> corpus 0.25
        assert agg.corpus.hashtags == pytest.approx(0.25)

    def test_zero_post_agents_excluded(self, tiny, lexicons):
        pop, tweets = tiny
        agg = aggregate_cues(tweets, FLAT_METRICS, pop, lexicons)
        assert set(agg.per_agent) == {"a_01", "a_02"}
        assert len(agg.samples["first_person_pronouns"]) == 2

    def test_per_post_pools_posts(self, tiny, lexicons):
        pop, tweets = tiny
        agg = aggregate_cues(tweets, FLAT_METRICS, pop, lexicons, per_post=True)
        assert agg.per_post
        np.testing.assert_allclose(
            sorted(agg.samples["first_person_pronouns"]), [0.0, 1.0, 2.0]
        )
        # corpus statistics follow the pooled sample unit
        assert agg.corpus.first_person_pronouns == pytest.approx(1.0)

    def test_network_cues_copied_from_metrics(self, tiny, lexicons):
        pop, tweets = tiny
        metrics = GraphMetrics(0.125, 0.25, 0.5, 0.75)
        agg = aggregate_cues(tweets, metrics, pop, lexicons)
        for vec in [*agg.per_agent.values(), agg.corpus]:
            assert vec.total_degree == 0.25
            assert vec.in_degree == 0.5
            assert vec.out_degree == 0.75

    def test_empty_corpus_rejected(self, tiny, lexicons):
        pop, _ = tiny
        with pytest.raises(ValidationError, match="empty"):
            aggregate_cues([], FLAT_METRICS, pop, lexicons)

    def test_unknown_author_rejected(self, tiny, lexicons):
        pop, _ = tiny
        with pytest.raises(ValidationError):
            aggregate_cues([post(1, "ghost", "hi")], FLAT_METRICS, pop, lexicons)

    def test_corpus_mean_within_agent_range(self, tiny, lexicons):
        pop, tweets = tiny
        agg = aggregate_cues(tweets, FLAT_METRICS, pop, lexicons)
        for cue in CUE_NAMES:
            vals = [v.as_dict()[cue] for v in agg.per_agent.values()]
            assert min(vals) - 1e-12 <= agg.corpus.as_dict()[cue] <= max(vals) + 1e-12


class TestReportIO:
    def test_round_trip(self, tiny_report):
        path, agg = tiny_report
        back = read_cue_report(path)
        assert set(back) == set(CUE_NAMES)
        for cue in CUE_NAMES:
            assert back[cue]["mean"] == pytest.approx(float(agg.samples[cue].mean()))
            assert back[cue]["n"] == len(agg.samples[cue])

    @pytest.fixture()
    def tiny_report(self, tmp_path, lexicons):
        pop = Population(personas=[make_persona("a_01"), make_persona("a_02")])
        tweets = [post(1, "a_01", "I win"), post(2, "a_02", "you there")]
        agg = aggregate_cues(tweets, FLAT_METRICS, pop, lexicons)
        path = tmp_path / "cues.csv"
        write_cue_report(agg, path)
        return path, agg

    def test_header_order_canonical(self, tiny_report):
        path, _ = tiny_report
        lines = path.read_text().splitlines()
        assert lines[0] == "cue,per_agent_mean,per_agent_std,n_agents"
        assert [ln.split(",")[0] for ln in lines[1:]] == list(CUE_NAMES)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "cues.csv"
        path.write_text("cue,mean,std,n\nfirst_person_pronouns,0,0,1\n")
        with pytest.raises(SchemaError):
            read_cue_report(path)

    def test_unknown_cue_rejected(self, tiny_report, tmp_path):
        path, _ = tiny_report
        text = path.read_text().replace("first_person_pronouns", "zeroth_person")
        bad = tmp_path / "bad.csv"
        bad.write_text(text)
        with pytest.raises(SchemaError, match="zeroth_person"):
            read_cue_report(bad)

    def test_missing_cue_rejected(self, tiny_report, tmp_path):
        path, _ = tiny_report
        lines = path.read_text().splitlines()
        bad = tmp_path / "bad.csv"
        bad.write_text("\n".join(lines[:-1]) + "\n")  # drop the last cue row
        with pytest.raises(SchemaError, match="missing"):
            read_cue_report(bad)


SAFE_TEXT = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",)), max_size=200
)


class TestProperties:
    @given(SAFE_TEXT)
    @settings(max_examples=200, deadline=None)
    def test_tokens_are_nonempty_and_unspaced(self, text):
        for tok in tokenize(text):
            assert tok
            assert not any(ch.isspace() for ch in tok)

    @given(SAFE_TEXT)
    @settings(max_examples=200, deadline=None)
    def test_reading_difficulty_in_unit_interval(self, text):
        assert 0.0 <= reading_difficulty(text) <= 1.0

    @given(SAFE_TEXT)
    @settings(max_examples=200, deadline=None)
    def test_counts_bounded_by_tokens(self, text):
        lex = Lexicon.from_terms("positive", ["good", "great", "well done"])
        assert 0 <= count_lexicon_terms(text, lex) <= len(tokenize(text))

    @given(SAFE_TEXT)
    @settings(max_examples=200, deadline=None)
    def test_case_insensitive(self, text):
        lex = Lexicon.from_terms("positive", ["good", "well done"])
        assert count_lexicon_terms(text, lex) == count_lexicon_terms(text.upper(), lex)

    @given(SAFE_TEXT)
    @settings(max_examples=100, deadline=None)
    def test_metadata_counts_match_tokenizer(self, text):
        counts = metadata_cues(text)
        toks = tokenize(text)
        assert counts["mentions"] <= len(toks)
        assert counts["hashtags"] <= len(toks)
        assert counts["urls"] == sum(t.startswith(("http://", "https://")) for t in toks)
