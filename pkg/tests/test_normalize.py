import itertools
import math
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from offlang.errors import ConfigError
from offlang.normalize import (
    NormalizerConfig,
    collapse_user_runs,
    expand_contractions,
    fold_accents,
    normalize,
    normalize_text,
    replace_emojis,
    split_hashtag,
    strip_html,
    _split_hashtags_in_text,
)

# alphabet chosen to exercise every pipeline stage without exotic Unicode
TWEET_ALPHABET = "abcdin ertu2 #@<>&';:()-.!\n\téüA’"


def tweet_text():
    return st.text(alphabet=TWEET_ALPHABET, max_size=60)


class TestStripHtml:
    def test_tag_removal(self):
        assert strip_html("<b>you</b> suck") == "you suck"

    def test_empty(self):
        assert strip_html("") == ""

    def test_entities_and_unmatched_lt(self):
        assert strip_html("a &amp; b < c") == "a & b < c"

    def test_unmatched_gt_kept(self):
        assert strip_html("a > b") == "a > b"

    def test_encoded_tags_do_not_survive(self):
        out = strip_html("&lt;b&gt;hi&lt;/b&gt;")
        assert "<" not in out and ">" not in out

    @given(tweet_text())
    def test_idempotent(self, text):
        once = strip_html(text)
        assert strip_html(once) == once


class TestContractions:
    def test_isnt(self, toy_config):
        assert expand_contractions("isn't", toy_config.contraction_table) == "is not"

    def test_no_contraction(self, toy_config):
        assert expand_contractions("banana", toy_config.contraction_table) == "banana"

    def test_casing_and_multiword(self, toy_config):
        out = expand_contractions("You're sure they'd've left", toy_config.contraction_table)
        assert out == "You are sure they would have left"

    def test_curly_apostrophe(self, toy_config):
        assert expand_contractions("isn’t", toy_config.contraction_table) == "is not"

    def test_whitespace_preserved(self, toy_config):
        assert expand_contractions("a  isn't\tb", toy_config.contraction_table) == "a  is not\tb"


def _all_segmentations(body, lexicon):
    """Exhaustive enumeration oracle for the DP word break."""
    if not body:
        yield []
        return
    for end in range(1, len(body) + 1):
        head = body[:end]
        if head in lexicon:
            for rest in _all_segmentations(body[end:], lexicon):
                yield [head] + rest


def _best_by_enumeration(body, lexicon):
    best, best_score = None, -math.inf
    for seg in _all_segmentations(body, lexicon):
        score = sum(math.log(lexicon[w]) for w in seg)
        if score > best_score:
            best, best_score = seg, score
    return best


class TestSplitHashtag:
    def test_dinnertime(self, toy_config):
        assert split_hashtag("dinnertime", toy_config.hashtag_lexicon) == ["dinner", "time"]

    def test_single_word(self, toy_config):
        assert split_hashtag("dinner", toy_config.hashtag_lexicon) == ["dinner"]

    def test_greedy_fallback_residue(self, toy_config):
        assert split_hashtag("maga2020xyzq", toy_config.hashtag_lexicon) == ["maga", "2020", "xyzq"]

    def test_matches_exhaustive_enumeration(self, toy_config):
        lex = toy_config.hashtag_lexicon
        for body in ["dinnertime", "fakenews", "winnow", "timetime", "a2020i"]:
            expected = _best_by_enumeration(body, lex)
            assert expected is not None, body
            got = split_hashtag(body, lex)
            assert sum(math.log(lex[w]) for w in got) == pytest.approx(
                sum(math.log(lex[w]) for w in expected)
            )

    def test_lowercases(self, toy_config):
        assert split_hashtag("DinnerTime", toy_config.hashtag_lexicon) == ["dinner", "time"]

    @given(st.text(alphabet="adinertgmu20xq-", min_size=1, max_size=14))
    def test_concatenation_preserved(self, body, toy_config):
        tokens = split_hashtag(body, toy_config.hashtag_lexicon)
        assert tokens
        assert "".join(tokens) == body.lower()


class TestReplaceEmojis:
    def test_smile(self, toy_config):
        assert replace_emojis("great :)", toy_config.emoji_table) == "great smile"

    def test_no_emoji(self, toy_config):
        assert replace_emojis("no emoji here", toy_config.emoji_table) == "no emoji here"

    def test_leftmost_longest(self):
        table = {":))": "smile smile", ":(": "frown"}
        assert replace_emojis("ok :)):(", table) == "ok smile smile frown"

    def test_spacing_inserted_between_words(self, toy_config):
        assert replace_emojis("x:)y", toy_config.emoji_table) == "x smile y"


class TestFoldAccents:
    def test_cafe(self):
        assert fold_accents("café") == "cafe"

    def test_ascii_fixed_point(self):
        assert fold_accents("cafe") == "cafe"

    def test_multiple(self):
        assert fold_accents("naïve Zoë") == "naive Zoe"

    def test_non_decomposable_preserved(self):
        assert fold_accents("\U0001f600 ok") == "\U0001f600 ok"

    @given(tweet_text())
    def test_idempotent(self, text):
        once = fold_accents(text)
        assert fold_accents(once) == once


class TestCollapseUserRuns:
    def test_truncates_long_run(self):
        assert collapse_user_runs("@user @user @user @user hi", 3) == "@user @user @user hi"

    def test_run_within_limit(self):
        assert collapse_user_runs("@user hi", 3) == "@user hi"

    def test_two_runs(self):
        out = collapse_user_runs("@user @user x @user @user @user @user", 2)
        assert out == "@user @user x @user @user"

    def test_case_insensitive(self):
        assert collapse_user_runs("@USER @user @User @user", 3) == "@USER @user @User"

    def test_rejects_bad_max(self):
        with pytest.raises(ConfigError):
            collapse_user_runs("x", 0)


class TestPipeline:
    def test_composite_paper_example(self, default_config):
        text = "<i>WOW</i>  #dinnertime :) @user @user @user @user"
        assert normalize_text(text, default_config) == "WOW dinner time smile @user @user @user"

    def test_plain_text_fixed_point(self, default_config):
        assert normalize_text("plain text", default_config) == "plain text"

    def test_contraction_and_accent(self, default_config):
        assert normalize_text("I can't wait for café", default_config) == "I can not wait for cafe"

    def test_normalized_tweet_carries_id(self, default_config):
        tweet = normalize(42, " hello  there ", default_config)
        assert tweet.id == 42
        assert tweet.text == "hello there"

    @given(tweet_text())
    @settings(max_examples=200)
    def test_idempotent(self, text, toy_config):
        once = normalize_text(text, toy_config)
        assert normalize_text(once, toy_config) == once

    @given(tweet_text())
    @settings(max_examples=200)
    def test_matches_sequential_stages(self, text, toy_config):
        staged = strip_html(text)
        staged = collapse_user_runs(staged, toy_config.max_user_run)
        staged = expand_contractions(staged, toy_config.contraction_table)
        staged = _split_hashtags_in_text(staged, toy_config.hashtag_lexicon)
        staged = replace_emojis(staged, toy_config.emoji_table)
        staged = fold_accents(staged)
        staged = re.sub(r"\s+", " ", staged).strip()
        assert normalize_text(text, toy_config) == staged

    @given(tweet_text())
    @settings(max_examples=200)
    def test_output_invariants(self, text, toy_config):
        out = normalize_text(text, toy_config)
        assert "#" not in out
        assert not re.search(r"<[^>]*>", out)
        assert "  " not in out
        assert out == out.strip()


class TestConfigValidation:
    def test_rejects_key_without_apostrophe(self):
        with pytest.raises(ConfigError):
            NormalizerConfig({"xyzzy": "x y"}, {}, {"a": 1})

    def test_allows_known_apostropheless(self):
        NormalizerConfig({"cant": "can not"}, {}, {"a": 1})

    def test_rejects_single_word_expansion(self):
        with pytest.raises(ConfigError):
            NormalizerConfig({"can't": "cannot"}, {}, {"a": 1})

    def test_rejects_nonpositive_count(self):
        with pytest.raises(ConfigError):
            NormalizerConfig({}, {}, {"a": 0})

    def test_rejects_bad_user_run(self):
        with pytest.raises(ConfigError):
            NormalizerConfig({}, {}, {"a": 1}, max_user_run=0)

    def test_default_tables_load(self, default_config):
        assert default_config.contraction_table["isn't"] == "is not"
        assert default_config.emoji_table[":)"] == "smile"
        assert default_config.hashtag_lexicon["dinner"] > 0
        assert default_config.max_user_run == 3
