import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from courtside.errors import EmptyTextWarning, MissingMetric, ParseError
from courtside.metrics import (ALL_METRICS, GT_METRICS, RICHNESS_METRICS, MetricReport,
                               action_complexity, aggregate, bert_f1, bleu, combine,
                               composite_scores, content_f1, evaluate_corpus,
                               information_density, lcs_length, measurement_precision,
                               rouge_l_f1, semantic_similarity, sequence_length,
                               technical_coverage, vocabulary_richness)
from courtside.text import (STOPWORDS_SHA256, HashEmbedding, PrecomputedEmbedding,
                            SportsLexicon, TokenizedText, build_lexicon, default_action_seeds,
                            default_stopwords, stopwords_checksum, tokenize)

words = st.sampled_from(["layup", "dunk", "the", "miss", "rebound", "jump", "shot", "a", "16'"])
texts = st.lists(words, min_size=1, max_size=10).map(" ".join)


# ---------------------------------------------------------------- tokenization


def test_tokenize_keeps_foot_marks_and_compounds():
    assert tokenize("MISS 16' Pullup Jump-Shot, 3-point!") == [
        "miss", "16'", "pullup", "jump-shot", "3-point"]
    assert tokenize("Jones’ 25’ step-back") == ["jones", "25'", "step-back"]


def test_tokenized_text_content_subsequence():
    t = TokenizedText.of("The player misses the layup")
    assert t.tokens == ("the", "player", "misses", "the", "layup")
    assert t.content_tokens == ("player", "misses", "layup")


def test_stopword_resource_checksum():
    assert stopwords_checksum() == STOPWORDS_SHA256
    sw = default_stopwords()
    assert {"the", "a", "then", "after"} <= sw and "layup" not in sw


# ---------------------------------------------------------------- ground truth


def test_lcs():
    assert lcs_length("abcbdab", "bdcaba") == 4
    assert lcs_length([], ["a"]) == 0


def test_rouge_examples():
    assert rouge_l_f1("a b c d", "a c d") == pytest.approx(6 / 7, abs=1e-15)
    assert rouge_l_f1("a b", "a b") == 1.0
    assert rouge_l_f1("a b", "c d") == 0.0


def test_rouge_empty_warns():
    with pytest.warns(EmptyTextWarning):
        assert rouge_l_f1("", "a") == 0.0


def test_bleu_examples():
    assert bleu("a b c", "a b d", max_n=1) == pytest.approx(2 / 3, abs=1e-15)
    assert bleu("a b", "a b c", max_n=2) == pytest.approx(math.exp(-0.5), abs=1e-15)
    assert bleu("the ball goes in", "the ball goes in") == 1.0


def test_bleu_zero_precision_smoothed():
    # unigram 1/4, higher orders zero -> eps-smoothed, tiny but positive
    v = bleu("a x y z", "a b c d")
    expected = (0.25 * 1e-9 ** 3) ** 0.25
    assert v == pytest.approx(expected, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(texts, texts)
def test_bleu_bounded_and_brevity(c, r):
    v = bleu(c, r)
    assert 0.0 <= v <= 1.0 + 1e-12
    nc, nr = len(tokenize(c)), len(tokenize(r))
    if nc < nr:
        assert math.exp(1 - nr / nc) < 1.0


@settings(max_examples=50, deadline=None)
@given(texts, texts)
def test_f1_metrics_symmetric(c, r):
    assert rouge_l_f1(c, r) == pytest.approx(rouge_l_f1(r, c), abs=1e-15)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert content_f1(c, r) == pytest.approx(content_f1(r, c), abs=1e-15)


@settings(max_examples=30, deadline=None)
@given(texts)
def test_identity_maximizes_gt_metrics(t):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert rouge_l_f1(t, t) == 1.0
        assert bert_f1(t, t) == 1.0
        assert semantic_similarity(t, t) == 1.0
        if TokenizedText.of(t).content_tokens:
            assert content_f1(t, t) == 1.0
        if len(tokenize(t)) >= 4:
            assert bleu(t, t) == pytest.approx(1.0, abs=1e-15)


def test_content_f1_examples():
    assert content_f1("the player misses the layup", "player misses layup") == 1.0
    assert content_f1("dunk", "layup") == 0.0
    assert content_f1("alpha bravo", "alpha charlie") == 0.5


def test_content_f1_both_empty_warns():
    with pytest.warns(EmptyTextWarning):
        assert content_f1("the a", "of the") == 0.0


def _orthogonal_provider():
    eye = np.eye(4)
    return PrecomputedEmbedding({"a": eye[0], "b": eye[1], "c": eye[2], "d": eye[3]}, 4)


def test_bert_f1_orthogonal_tokens_zero():
    assert bert_f1("a b", "c d", _orthogonal_provider()) == 0.0


def test_bert_f1_hash_disjoint_tokens_near_zero():
    v = bert_f1("alpha", "omega", HashEmbedding(64, 0))
    assert abs(v) < 0.5


def test_bert_f1_subset():
    prov = HashEmbedding(64, 0)
    r_terms = ["layup", "dunk", "rebound"]
    cvec = [prov.token_vector(t) for t in r_terms]
    # recall: layup, dunk match themselves; rebound matches its best candidate
    best = max(float(cvec[2] @ cvec[0]), float(cvec[2] @ cvec[1]))
    R = (1 + 1 + best) / 3
    assert bert_f1("layup dunk", "layup dunk rebound", prov) == pytest.approx(2 * R / (1 + R), abs=1e-12)


def test_semantic_similarity_examples():
    assert semantic_similarity("drives then shoots", "shoots then drives") == 1.0
    assert semantic_similarity("a", "b", _orthogonal_provider()) == 0.0


def test_semantic_zero_norm_warns():
    with pytest.warns(EmptyTextWarning):
        assert semantic_similarity("zzz", "a", _orthogonal_provider()) == 0.0


def test_hash_embedding_properties():
    e = HashEmbedding(64, 0)
    v = e.token_vector("layup")
    assert v.shape == (64,) and np.linalg.norm(v) == pytest.approx(1.0, abs=1e-15)
    assert np.array_equal(v, HashEmbedding(64, 0).token_vector("layup"))
    assert not np.array_equal(v, HashEmbedding(64, 1).token_vector("layup"))


def test_precomputed_embedding_file(tmp_path):
    p = tmp_path / "emb.txt"
    p.write_text("2 3\nlayup 1 0 0\nDunk 0 1 0\n")
    e = PrecomputedEmbedding.from_file(p)
    assert np.array_equal(e.token_vector("dunk"), [0, 1, 0])
    assert np.array_equal(e.token_vector("nope"), [0, 0, 0])
    p.write_text("2 3\nlayup 1 0\n")
    with pytest.raises(ParseError):
        PrecomputedEmbedding.from_file(p)


# ---------------------------------------------------------------- richness


@pytest.fixture
def lex():
    return SportsLexicon({"miss": 4, "layup": 2, "rebound": 1, "offensive rebound": 1, "jump shot": 1},
                         {"layup", "rebound", "offensive rebound", "jump shot"}, 8)


def test_information_density(lex):
    assert information_density("MISS 3' Layup", lex) == pytest.approx(2 / 3, abs=1e-15)
    assert information_density("nothing here", lex) == 0.0
    assert information_density("layup miss", lex) == 1.0


def test_longest_match_multiword(lex):
    assert lex.match(["offensive", "rebound", "layup"]) == [("offensive rebound", 2), ("layup", 1)]
    assert information_density("offensive rebound", lex) == 1.0


def test_action_complexity():
    lex = SportsLexicon({"layup": 3, "rebound": 2, "offensive": 1}, {"layup", "rebound"}, 6)
    assert action_complexity("layup then offensive rebound then layup", lex) == 2
    assert action_complexity("offensive", lex) == 0
    assert action_complexity("layup layup", lex) == 1


@pytest.mark.parametrize("text, n", [
    ("MISS 16' Pullup Jump Shot", 1),
    ("no numbers here", 0),
    ("scores 30 points in 12:45 from 25' out", 3),
    ("hits a 3-point shot, 3-pointers now 4, lead 102-99", 3),
])
def test_measurement_precision(text, n):
    assert measurement_precision(text) == n


@pytest.mark.parametrize("text, n", [
    ("Layup. Offensive rebound. Putback.", 3),
    ("misses the layup", 1),
    ("drives then shoots", 2),
    ("rebound; outlet pass followed by a dunk", 3),
    ("", 0),
])
def test_sequence_length(text, n):
    assert sequence_length(text) == n


def test_vocabulary_richness():
    lex = SportsLexicon({"layup": 8, "dunk": 4, "steal": 2}, set(), 8)
    assert vocabulary_richness("nothing", lex) == 0.0
    assert vocabulary_richness("layup layup", lex) == 1.0
    assert vocabulary_richness("dunk then steal", lex) == 2 + 4


def test_technical_coverage():
    freqs = {f"term{i}": 1 for i in range(100)}
    lex = SportsLexicon(freqs, set(), 100)
    assert technical_coverage("term1 term2 term1", lex) == 0.02
    assert technical_coverage("none", lex) == 0.0
    assert technical_coverage(" ".join(freqs), lex) == 1.0


def test_lexicon_validation():
    with pytest.raises(ValueError):
        SportsLexicon({"a": 1}, {"b"}, 1)
    with pytest.raises(ValueError):
        SportsLexicon({"a": 0}, set(), 1)


def test_build_lexicon_and_json(tmp_path):
    refs = ["MISS 16' Pullup Jump Shot", "Offensive Rebound then Layup", "Layup"]
    lex = build_lexicon(refs)
    assert lex.freqs["layup"] == 2
    assert "16'" not in lex.freqs
    assert {"layup", "pullup", "jump shot"} <= lex.actions
    assert lex.total_corpus_terms == 8
    p = tmp_path / "lex.json"
    lex.to_json(p)
    back = SportsLexicon.from_json(p)
    assert back.freqs == lex.freqs and back.actions == lex.actions
    doc = json.loads(p.read_text())
    assert set(doc) == {"terms", "total_corpus_terms"}
    assert set(doc["terms"][0]) == {"term", "freq", "is_action"}


def test_action_seed_resource():
    assert len(default_action_seeds()) == 14
    assert "free throw" in default_action_seeds()


def test_bad_lexicon_file(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"terms": [{"term": "x"}]}')
    with pytest.raises(ParseError):
        SportsLexicon.from_json(p)


@settings(max_examples=40, deadline=None)
@given(texts)
def test_ratio_metrics_bounded(t):
    lex = build_lexicon(["layup dunk rebound jump shot miss"])
    assert 0.0 <= information_density(t, lex) <= 1.0
    assert 0.0 <= technical_coverage(t, lex) <= 1.0


# ---------------------------------------------------------------- composites and reports


def test_composites():
    means = dict.fromkeys(ALL_METRICS, 1.0)
    assert composite_scores(means) == {"gt_validation": 5.0, "info_richness": 6.0, "combined": 11.0}
    del means["bleu"]
    with pytest.raises(MissingMetric):
        composite_scores(means)
    assert combine(2.1239, 160.6970)["combined"] == 162.8209


def test_identical_pair_corpus():
    lex = build_lexicon(["miss jump shot"])
    rep = evaluate_corpus([("c1", "Miss jump shot now", "Miss jump shot now")], lex)
    assert [rep.per_sample[0][m] for m in GT_METRICS] == [1.0] * 5
    assert rep.composites["gt_validation"] == 5.0


def test_aggregate_means_and_report_invariants():
    a = dict.fromkeys(ALL_METRICS, 1.0)
    b = dict.fromkeys(ALL_METRICS, 3.0)
    rep = aggregate([a, b], ["x", "y"])
    for m in ALL_METRICS:
        assert rep.aggregates[m]["mean"] == 2.0
        assert rep.aggregates[m]["sd"] == pytest.approx(math.sqrt(2), abs=1e-15)
    gt = sum(rep.aggregates[m]["mean"] for m in GT_METRICS)
    rich = sum(rep.aggregates[m]["mean"] for m in RICHNESS_METRICS)
    assert rep.composites == {"gt_validation": gt, "info_richness": rich, "combined": gt + rich}
    assert rep.gt_scores() == [5.0, 15.0]
    back = MetricReport.from_dict(json.loads(rep.to_json()))
    assert back.to_json() == rep.to_json()
    lines = rep.to_csv().splitlines()
    assert lines[0].split(",")[0] == "clip_id" and len(lines) == 3


def test_warnings_counted_not_raised():
    lex = build_lexicon(["layup"])
    rep = evaluate_corpus([("", "layup"), ("layup", "layup")], lex)
    assert rep.warnings > 0
    assert len(rep.per_sample) == 2
