"""Tokenization, stopwords, sports lexicon and token embedding providers."""

from __future__ import annotations

import hashlib
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .errors import ParseError
from .rng import PortableRNG, fnv1a64

# A foot mark stays attached to its number ("16'") and hyphenated compounds
# ("3-point", "step-back") stay whole; all other punctuation separates tokens.
TOKEN_RE = re.compile(r"\d+['’]|[a-z0-9]+(?:-[a-z0-9]+)*")

STOPWORDS_SHA256 = "b3f772a000465cb76e23adb03b47073c591c156fad8f7af09c8b8e80d6bd8eac"


def tokenize(text: str) -> list[str]:
    return [t.replace("’", "'") for t in TOKEN_RE.findall(text.lower())]


def _resource_text(name: str) -> str:
    return resources.files("courtside").joinpath("resources", name).read_text("utf-8")


@lru_cache(maxsize=None)
def default_stopwords() -> frozenset:
    return frozenset(w for w in _resource_text("stopwords.txt").split() if w)


def stopwords_checksum() -> str:
    data = resources.files("courtside").joinpath("resources", "stopwords.txt").read_bytes()
    return hashlib.sha256(data).hexdigest()


def load_stopwords(path) -> frozenset:
    return frozenset(w.strip().lower() for w in Path(path).read_text("utf-8").split() if w.strip())


def default_action_seeds() -> list[str]:
    return [ln.strip() for ln in _resource_text("action_terms.txt").splitlines() if ln.strip()]


@dataclass(frozen=True)
class TokenizedText:
    raw: str
    tokens: tuple
    content_tokens: tuple

    @classmethod
    def of(cls, raw: str, stopwords: Optional[Iterable[str]] = None) -> "TokenizedText":
        sw = default_stopwords() if stopwords is None else stopwords
        toks = tuple(tokenize(raw))
        return cls(raw, toks, tuple(t for t in toks if t not in sw))


def as_tokens(text, stopwords=None) -> TokenizedText:
    if isinstance(text, TokenizedText):
        return text
    return TokenizedText.of(text, stopwords)


# ---------------------------------------------------------------- lexicon


@dataclass
class SportsLexicon:
    """Technical terms with corpus frequencies; ``actions`` is a subset."""

    freqs: dict
    actions: set = field(default_factory=set)
    total_corpus_terms: int = 0

    def __post_init__(self):
        self._by_tokens = {}
        for term in self.freqs:
            key = tuple(tokenize(term))
            if key:
                self._by_tokens[key] = term
        self.max_len = max((len(k) for k in self._by_tokens), default=0)
        bad = [a for a in self.actions if a not in self.freqs]
        if bad:
            raise ValueError(f"action terms missing from the lexicon: {sorted(bad)}")
        if any(f < 1 for f in self.freqs.values()):
            raise ValueError("lexicon frequencies must be >= 1")

    @property
    def technical_terms(self):
        return set(self.freqs)

    def __len__(self):
        return len(self.freqs)

    def match(self, tokens) -> list[tuple[str, int]]:
        """Longest-match-first scan (n <= 3); returns (term, tokens covered) pairs."""
        tokens = list(tokens)
        out = []
        i = 0
        longest = min(3, self.max_len)
        while i < len(tokens):
            for n in range(min(longest, len(tokens) - i), 0, -1):
                term = self._by_tokens.get(tuple(tokens[i:i + n]))
                if term is not None:
                    out.append((term, n))
                    i += n
                    break
            else:
                i += 1
        return out

    @classmethod
    def from_json(cls, path) -> "SportsLexicon":
        try:
            doc = json.loads(Path(path).read_text("utf-8"))
            freqs = {t["term"].lower(): int(t["freq"]) for t in doc["terms"]}
            actions = {t["term"].lower() for t in doc["terms"] if t.get("is_action")}
            return cls(freqs, actions, int(doc["total_corpus_terms"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{path}: bad lexicon file ({exc})") from exc

    def to_dict(self):
        return {
            "terms": [
                {"term": t, "freq": self.freqs[t], "is_action": t in self.actions}
                for t in sorted(self.freqs)
            ],
            "total_corpus_terms": self.total_corpus_terms,
        }

    def to_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")


def build_lexicon(references: Iterable[str], stopwords=None, action_seeds=None) -> SportsLexicon:
    """Starter lexicon derived from reference captions.

    Terms are the non-stopword tokens without digits, plus any multi-word
    action seed that occurs in the corpus; frequencies are corpus counts.
    Quantities such as ``16'`` are left to the measurement patterns.
    """
    sw = default_stopwords() if stopwords is None else stopwords
    seeds = default_action_seeds() if action_seeds is None else list(action_seeds)
    seed_keys = {tuple(tokenize(s)): s for s in seeds}
    counts = Counter()
    total = 0
    for ref in references:
        toks = tokenize(ref)
        for t in toks:
            if t in sw or any(ch.isdigit() for ch in t):
                continue
            counts[t] += 1
            total += 1
        for key, seed in seed_keys.items():
            if len(key) < 2:
                continue
            for i in range(len(toks) - len(key) + 1):
                if tuple(toks[i:i + len(key)]) == key:
                    counts[seed] += 1
    actions = {s for s in seeds if counts.get(s, 0) > 0}
    return SportsLexicon(dict(counts), actions, total)


# ---------------------------------------------------------------- embeddings


class EmbeddingProvider:
    name = "provider"
    kind = "deterministic-hash"
    token_dim = 0

    def token_vector(self, token: str) -> np.ndarray:
        raise NotImplementedError

    def token_matrix(self, tokens) -> np.ndarray:
        if not tokens:
            return np.zeros((0, self.token_dim))
        return np.vstack([self.token_vector(t) for t in tokens])

    def sentence_vector(self, tokens) -> np.ndarray:
        """Mean of token vectors, summed in sorted token order (order-invariant)."""
        acc = np.zeros(self.token_dim)
        toks = sorted(tokens)
        for t in toks:
            acc = acc + self.token_vector(t)
        return acc / len(toks) if toks else acc


class HashEmbedding(EmbeddingProvider):
    """token -> dim values U[-1, 1) from PortableRNG(seed ^ fnv1a64(token)), L2-normalized."""

    kind = "deterministic-hash"

    def __init__(self, dim: int = 64, seed: int = 0):
        self.token_dim = dim
        self.seed = seed
        self.name = f"hash{dim}"
        self._cache = {}

    def token_vector(self, token):
        v = self._cache.get(token)
        if v is None:
            rng = PortableRNG(self.seed ^ fnv1a64(token))
            v = np.array([rng.uniform(-1.0, 1.0) for _ in range(self.token_dim)])
            v = v / np.linalg.norm(v)
            self._cache[token] = v
        return v


class PrecomputedEmbedding(EmbeddingProvider):
    """Token table; unknown tokens map to the zero vector."""

    kind = "precomputed-file"

    def __init__(self, table: dict, dim: int, name="precomputed"):
        self.table = {k: np.asarray(v, dtype=np.float64) for k, v in table.items()}
        self.token_dim = dim
        self.name = name
        self.misses = 0

    @classmethod
    def from_file(cls, path):
        lines = Path(path).read_text("utf-8").splitlines()
        if not lines:
            raise ParseError(f"{path}: empty embedding file", line=1)
        try:
            v, d = (int(x) for x in lines[0].split())
        except ValueError as exc:
            raise ParseError(f"{path}: header must be 'v d'", line=1) from exc
        table = {}
        for no, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != d + 1:
                raise ParseError(f"{path}: expected token + {d} values", line=no)
            try:
                table[parts[0].lower()] = [float(x) for x in parts[1:]]
            except ValueError as exc:
                raise ParseError(f"{path}: non-numeric value", line=no) from exc
        if len(table) != v:
            raise ParseError(f"{path}: header says {v} tokens, found {len(table)}")
        return cls(table, d, name=f"precomputed:{Path(path).name}")

    def token_vector(self, token):
        v = self.table.get(token)
        if v is None:
            self.misses += 1
            return np.zeros(self.token_dim)
        return v
