"""Synthetic pointing-task examples and template fixture books."""

from collections import Counter

import pytest

from clozereader.clozegen import GAP_TOKEN, N_CANDIDATES
from clozereader.synthdata import (
    MARKERS,
    NAMES,
    OBJECTS,
    PLACES,
    VALUES,
    associative_recall_examples,
    write_fixture_library,
)
from clozereader.tagger import default_config


# ------------------------------------------------------------ pointing task


def test_recall_examples_are_well_formed(recall_examples):
    assert len(recall_examples) == 30
    for example in recall_examples:
        assert len(example.context) == N_CANDIDATES
        context_tokens = [t for s in example.context for t in s]
        assert example.answer in context_tokens
        assert len(example.candidates) == N_CANDIDATES
        assert len(set(example.candidates)) == N_CANDIDATES
        assert example.answer in example.candidates
        assert example.question.count(GAP_TOKEN) == 1
        assert GAP_TOKEN not in context_tokens


def test_recall_candidates_each_occur_once(recall_examples):
    for example in recall_examples:
        counts = Counter(t for s in example.context for t in s)
        for candidate in example.candidates:
            assert counts[candidate] == 1


def test_recall_answer_sits_next_to_probed_marker(recall_examples):
    for example in recall_examples:
        marker = example.question[example.question.index(GAP_TOKEN) - 1]
        bound = next(s for s in example.context if s[1] == marker)
        assert bound[2] == example.answer


def test_recall_is_deterministic():
    first = associative_recall_examples(5, rng_seed=9)
    second = associative_recall_examples(5, rng_seed=9)
    assert first == second
    assert first != associative_recall_examples(5, rng_seed=10)


def test_recall_answers_spread_over_values():
    examples = associative_recall_examples(200, rng_seed=3)
    answers = {e.answer for e in examples}
    assert len(answers) > len(VALUES) // 2


def test_recall_rejects_bad_pair_count():
    with pytest.raises(ValueError, match="n_pairs"):
        associative_recall_examples(1, n_pairs=1)
    with pytest.raises(ValueError, match="n_pairs"):
        associative_recall_examples(1, n_pairs=len(MARKERS) + 1)


def test_recall_vocabulary_is_tagger_friendly():
    # Values must read as common nouns so generated and synthetic data
    # can share a candidate type.
    config = default_config()
    for value in VALUES:
        assert value in config.noun_lexicon
    for marker in MARKERS:
        assert marker not in config.stopwords


# ----------------------------------------------------------- fixture books


def test_fixture_vocab_matches_lexicon():
    config = default_config()
    for word in OBJECTS + PLACES:
        assert word in config.noun_lexicon
        assert word == word.lower()
    for name in NAMES:
        assert name[0].isupper()
        assert name not in config.honorifics
        assert name.lower() not in config.noun_lexicon


def test_fixture_library_layout(fixture_library):
    paths = sorted(fixture_library.glob("*.txt"))
    assert len(paths) == 5
    for path in paths:
        text = path.read_text(encoding="utf-8")
        assert "Title: The " in text
        assert "*** START OF THE BOOK ***" in text
        assert "*** END OF THE BOOK ***" in text
        start = text.index("START OF")
        end = text.index("END OF")
        assert end - start > 200


def test_fixture_library_is_deterministic(tmp_path):
    a = write_fixture_library(tmp_path / "a", n_books=2, rng_seed=4,
                              n_paragraphs=6)
    b = write_fixture_library(tmp_path / "b", n_books=2, rng_seed=4,
                              n_paragraphs=6)
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes()


def test_duplicate_edition_repeats_body_not_title(tmp_path):
    paths = write_fixture_library(tmp_path, n_books=2, rng_seed=1,
                                  n_paragraphs=5, duplicate_edition=True)
    assert len(paths) == 3
    original = paths[0].read_text(encoding="utf-8")
    duplicate = paths[-1].read_text(encoding="utf-8")
    assert original != duplicate
    marker = "*** START OF THE BOOK ***"
    assert original.split(marker)[1] == duplicate.split(marker)[1]
    title = original.split("Title: ")[1].splitlines()[0]
    assert title.startswith("The ")
    assert duplicate.split("Title: ")[1].splitlines()[0] == "A" + title[3:]


def test_fixture_library_rejects_bad_counts(tmp_path):
    with pytest.raises(ValueError):
        write_fixture_library(tmp_path, n_books=0)
    with pytest.raises(ValueError, match="title pool"):
        write_fixture_library(tmp_path, n_books=10_000)
