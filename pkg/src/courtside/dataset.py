"""Clip annotation files: loading, player-name stripping, seeded splits."""

from __future__ import annotations

import json
import re
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import DuplicateClip, EmptyAfterStripWarning, ParseError, TooFewClips
from .rng import PortableRNG


@dataclass(frozen=True)
class AnnotatedClip:
    clip_id: str
    caption: str
    split: str = "unassigned"
    strip_failed: bool = False

    def to_dict(self):
        return {"clip_id": self.clip_id, "caption": self.caption}


def load_annotations(path) -> list[AnnotatedClip]:
    clips, seen = [], set()
    with open(path, encoding="utf-8") as fh:
        for no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                cid, caption = str(obj["clip_id"]), str(obj["caption"])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError(f"malformed annotation ({exc})", line=no) from exc
            if cid in seen:
                raise DuplicateClip(f"clip_id {cid!r} repeated on line {no}")
            seen.add(cid)
            clips.append(AnnotatedClip(cid, caption))
    return clips


def write_annotations(path, clips) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c in clips:
            fh.write(json.dumps(c.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")


def load_names(path) -> list[str]:
    return [ln.strip() for ln in Path(path).read_text("utf-8").splitlines() if ln.strip()]


def _name_pattern(names):
    parts = sorted({n.strip() for n in names if n.strip()}, key=lambda n: (-len(n), n))
    if not parts:
        return None
    alts = "|".join(r"\s+".join(map(re.escape, p.split())) for p in parts)
    # optional possessive, names never glued to word characters
    return re.compile(rf"(?<![\w'])(?:{alts})(?:'s)?(?![\w'])", re.IGNORECASE)


def strip_player_names(caption: str, names) -> str:
    """Remove player names (longest first, case-insensitive) and collapse whitespace.

    If nothing would remain, the caption is returned unchanged and an
    :class:`EmptyAfterStripWarning` is issued.
    """
    pat = names if isinstance(names, re.Pattern) else _name_pattern(names)
    if pat is None:
        return caption
    stripped = " ".join(pat.sub(" ", caption).split())
    if not stripped:
        warnings.warn(f"caption {caption!r} is empty after removing names",
                      EmptyAfterStripWarning, stacklevel=2)
        return caption
    return stripped


def strip_clips(clips, names) -> list[AnnotatedClip]:
    pat = _name_pattern(names)
    out = []
    for c in clips:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            cap = strip_player_names(c.caption, pat)
        failed = any(issubclass(w.category, EmptyAfterStripWarning) for w in caught)
        out.append(replace(c, caption=cap, strip_failed=failed))
    return out


def split(clips, train_fraction: float, seed: int = 0):
    """Seeded Fisher-Yates shuffle, then a prefix of round(n * fraction) for training."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    clips = list(clips)
    n = len(clips)
    if n < 2:
        raise TooFewClips("need at least two clips to split")
    order = list(range(n))
    PortableRNG(seed).shuffle(order)
    n_train = min(max(int(round(n * train_fraction)), 1), n - 1)
    train = [replace(clips[i], split="train") for i in order[:n_train]]
    val = [replace(clips[i], split="val") for i in order[n_train:]]
    return train, val
