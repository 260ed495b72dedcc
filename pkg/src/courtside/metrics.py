"""Caption metrics: reference-based accuracy, sports richness, and composites.

Ground-truth metrics (compared against a reference caption):
``rouge_l_f1``, ``bleu``, ``bert_f1``, ``content_f1``, ``semantic_sim``.

Richness metrics (candidate only, against a :class:`SportsLexicon`):
``info_density``, ``action_complexity``, ``measurement_precision``,
``sequence_length``, ``vocab_richness``, ``technical_coverage``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
import warnings
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np

from .errors import EmptyTextWarning, MissingMetric
from .text import (EmbeddingProvider, HashEmbedding, SportsLexicon, TokenizedText,
                   as_tokens, default_stopwords)

GT_METRICS = ("rouge_l_f1", "bleu", "bert_f1", "content_f1", "semantic_sim")
RICHNESS_METRICS = ("info_density", "action_complexity", "measurement_precision",
                    "sequence_length", "vocab_richness", "technical_coverage")
ALL_METRICS = GT_METRICS + RICHNESS_METRICS

BLEU_EPS = 1e-9


def _warn_empty(what):
    warnings.warn(f"{what}: empty text", EmptyTextWarning, stacklevel=3)


def _f1(p, r):
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


# ---------------------------------------------------------------- ground truth


def lcs_length(a, b) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l_f1(cand, ref) -> float:
    c, r = as_tokens(cand).tokens, as_tokens(ref).tokens
    if not c or not r:
        _warn_empty("rouge_l_f1")
        return 0.0
    L = lcs_length(c, r)
    return _f1(L / len(c), L / len(r))


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(cand, ref, max_n: int = 4) -> float:
    """Single-reference sentence BLEU.

    Orders with no candidate n-grams (candidate shorter than n) are left out of
    the geometric mean; zero precisions get ``BLEU_EPS`` added.
    """
    c, r = as_tokens(cand).tokens, as_tokens(ref).tokens
    if not c or not r:
        _warn_empty("bleu")
        return 0.0
    logs = []
    for n in range(1, max_n + 1):
        cn = _ngrams(c, n)
        total = sum(cn.values())
        if total == 0:
            break
        rn = _ngrams(r, n)
        clipped = sum(min(cnt, rn[g]) for g, cnt in cn.items())
        p = clipped / total
        logs.append(math.log(p if p > 0 else BLEU_EPS))
    bp = min(1.0, math.exp(1 - len(r) / len(c)))
    return bp * math.exp(sum(logs) / len(logs))


def _cosine_matrix(A, B):
    na = np.linalg.norm(A, axis=1, keepdims=True)
    nb = np.linalg.norm(B, axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        S = (A @ B.T) / (na * nb.T)
    return np.nan_to_num(S, nan=0.0, posinf=0.0, neginf=0.0)


def bert_f1(cand, ref, provider: EmbeddingProvider | None = None) -> float:
    """Greedy-matching F1 over token embeddings (BERTScore-style)."""
    provider = provider or default_provider()
    c, r = as_tokens(cand).tokens, as_tokens(ref).tokens
    if not c or not r:
        _warn_empty("bert_f1")
        return 0.0
    S = _cosine_matrix(provider.token_matrix(c), provider.token_matrix(r))
    # a token matched against itself has cosine exactly 1
    for i, a in enumerate(c):
        for j, b in enumerate(r):
            if a == b and np.any(provider.token_vector(a)):
                S[i, j] = 1.0
    S = np.clip(S, -1.0, 1.0)
    p = float(S.max(axis=1).mean())
    rc = float(S.max(axis=0).mean())
    return _f1(p, rc)


def content_f1(cand, ref, stopwords=None) -> float:
    sw = default_stopwords() if stopwords is None else stopwords
    c, r = as_tokens(cand, sw).content_tokens, as_tokens(ref, sw).content_tokens
    if not c and not r:
        _warn_empty("content_f1")
        return 0.0
    if not c or not r:
        return 0.0
    overlap = sum((Counter(c) & Counter(r)).values())
    return _f1(overlap / len(c), overlap / len(r))


def semantic_similarity(cand, ref, provider: EmbeddingProvider | None = None) -> float:
    provider = provider or default_provider()
    c, r = as_tokens(cand).tokens, as_tokens(ref).tokens
    if not c or not r:
        _warn_empty("semantic_similarity")
        return 0.0
    u, v = provider.sentence_vector(c), provider.sentence_vector(r)
    nu, nv = float(np.linalg.norm(u)), float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        warnings.warn("zero-norm sentence embedding", EmptyTextWarning, stacklevel=2)
        return 0.0
    if np.array_equal(u, v):
        return 1.0
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


# ---------------------------------------------------------------- richness


def information_density(text, lexicon: SportsLexicon) -> float:
    toks = as_tokens(text).tokens
    if not toks:
        return 0.0
    covered = sum(n for _, n in lexicon.match(toks))
    return covered / len(toks)


def _distinct_terms(text, lexicon):
    return {term for term, _ in lexicon.match(as_tokens(text).tokens)}


def action_complexity(text, lexicon: SportsLexicon) -> int:
    return len(_distinct_terms(text, lexicon) & lexicon.actions)


@lru_cache(maxsize=None)
def measurement_regex() -> re.Pattern:
    doc = json.loads(resources.files("courtside").joinpath(
        "resources", "measurement_patterns.json").read_text("utf-8"))
    alternation = "|".join(f"(?:{p['regex']})" for p in doc["patterns"])
    return re.compile(alternation, re.IGNORECASE)


def measurement_precision(text) -> int:
    raw = text.raw if isinstance(text, TokenizedText) else text
    return sum(1 for _ in measurement_regex().finditer(raw))


_SEGMENT_RE = re.compile(
    r"[.!?]+(?=\s|$)|;|\bthen\b|\bafter\b|\bbefore\b|\bfollowed\s+by\b",
    re.IGNORECASE,
)


def sequence_length(text) -> int:
    """Count of non-empty spans between sentence ends, semicolons and temporal connectives."""
    raw = text.raw if isinstance(text, TokenizedText) else text
    spans = _SEGMENT_RE.split(raw)
    return sum(1 for s in spans if re.search(r"\w", s))


def vocabulary_richness(text, lexicon: SportsLexicon) -> float:
    """Sum of total_corpus_terms / freq(term) over distinct terms used."""
    total = 0.0
    for term in sorted(_distinct_terms(text, lexicon)):
        total += lexicon.total_corpus_terms / lexicon.freqs[term]
    return total


def technical_coverage(text, lexicon: SportsLexicon) -> float:
    if len(lexicon) == 0:
        return 0.0
    return len(_distinct_terms(text, lexicon)) / len(lexicon)


# ---------------------------------------------------------------- composites


def composite_scores(means) -> dict:
    missing = [m for m in ALL_METRICS if m not in means]
    if missing:
        raise MissingMetric(f"missing metric means: {', '.join(missing)}")
    gt = 0.0
    for m in GT_METRICS:
        gt += float(means[m])
    rich = 0.0
    for m in RICHNESS_METRICS:
        rich += float(means[m])
    return combine(gt, rich)


def combine(gt_validation: float, info_richness: float) -> dict:
    return {"gt_validation": gt_validation, "info_richness": info_richness,
            "combined": gt_validation + info_richness}


@dataclass
class MetricReport:
    per_sample: list
    aggregates: dict
    composites: dict
    clip_ids: list = field(default_factory=list)
    warnings: int = 0
    model: str = ""

    def gt_scores(self) -> list:
        """Per-sample sum of the five ground-truth metrics."""
        out = []
        for s in self.per_sample:
            v = 0.0
            for m in GT_METRICS:
                v += s[m]
            out.append(v)
        return out

    def to_dict(self):
        return {
            "model": self.model,
            "n": len(self.per_sample),
            "clip_ids": self.clip_ids,
            "per_sample": self.per_sample,
            "aggregates": self.aggregates,
            "composites": self.composites,
            "warnings": self.warnings,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d):
        return cls(d["per_sample"], d["aggregates"], d["composites"],
                   d.get("clip_ids", []), d.get("warnings", 0), d.get("model", ""))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("clip_id",) + ALL_METRICS)
        ids = self.clip_ids or [str(i) for i in range(len(self.per_sample))]
        for cid, s in zip(ids, self.per_sample):
            w.writerow([cid] + [repr(float(s[m])) for m in ALL_METRICS])
        return buf.getvalue()


def aggregate(per_sample, clip_ids=None, warnings_count=0, model="") -> MetricReport:
    """Means and sample sds (ddof=1, 0 for one sample) in input order, plus composites."""
    if not per_sample:
        raise ValueError("no samples to aggregate")
    n = len(per_sample)
    aggs = {}
    for m in ALL_METRICS:
        vals = [float(s[m]) for s in per_sample]
        mean = 0.0
        for v in vals:
            mean += v
        mean /= n
        ss = 0.0
        for v in vals:
            ss += (v - mean) ** 2
        sd = math.sqrt(ss / (n - 1)) if n > 1 else 0.0
        aggs[m] = {"mean": mean, "sd": sd}
    comps = composite_scores({m: aggs[m]["mean"] for m in ALL_METRICS})
    return MetricReport([dict(s) for s in per_sample], aggs, comps,
                        list(clip_ids or []), warnings_count, model)


def score_pair(cand, ref, lexicon, provider=None, stopwords=None) -> dict:
    provider = provider or default_provider()
    sw = default_stopwords() if stopwords is None else stopwords
    c, r = TokenizedText.of(cand, sw), TokenizedText.of(ref, sw)
    return {
        "rouge_l_f1": rouge_l_f1(c, r),
        "bleu": bleu(c, r),
        "bert_f1": bert_f1(c, r, provider),
        "content_f1": content_f1(c, r, sw),
        "semantic_sim": semantic_similarity(c, r, provider),
        "info_density": information_density(c, lexicon),
        "action_complexity": action_complexity(c, lexicon),
        "measurement_precision": measurement_precision(c),
        "sequence_length": sequence_length(c),
        "vocab_richness": vocabulary_richness(c, lexicon),
        "technical_coverage": technical_coverage(c, lexicon),
    }


def evaluate_corpus(pairs, lexicon, provider=None, stopwords=None, model="") -> MetricReport:
    """Score (candidate, reference) or (clip_id, candidate, reference) tuples.

    Per-sample warnings are counted, never raised.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("no pairs to evaluate")
    provider = provider or default_provider()
    per, ids = [], []
    n_warn = 0
    for i, p in enumerate(pairs):
        if len(p) == 3:
            cid, cand, ref = p
        else:
            cid, (cand, ref) = str(i), p
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            per.append(score_pair(cand, ref, lexicon, provider, stopwords))
        n_warn += len(caught)
        ids.append(str(cid))
    return aggregate(per, ids, n_warn, model)


@lru_cache(maxsize=None)
def default_provider() -> HashEmbedding:
    return HashEmbedding(64, seed=0)
