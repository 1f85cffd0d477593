"""Vocabulary construction and id encoding for word and POS streams.

Two specials: a single shared sentence-boundary token (the same id opens
and closes a caption) and an unknown-word token.  Ids are dense from 0,
assigned by descending training frequency with lexicographic tie-breaks,
so a vocabulary is a pure function of the token counts.
"""

from __future__ import annotations

from collections import Counter
from typing import Iterable, Sequence

BOUNDARY = "<s/e>"
UNK = "<unk>"
SPECIALS = (BOUNDARY, UNK)


class VocabError(ValueError):
    pass


class Vocabulary:
    """Immutable token<->id map with boundary/UNK specials."""

    def __init__(self, tokens: Sequence[str], counts: dict[str, int], min_count: int):
        self._id_to_token = tuple(tokens)
        self._token_to_id = {t: i for i, t in enumerate(self._id_to_token)}
        self._counts = dict(counts)
        self.min_count = min_count
        if len(self._token_to_id) != len(self._id_to_token):
            raise VocabError("duplicate tokens in vocabulary")
        for special in SPECIALS:
            if special not in self._token_to_id:
                raise VocabError(f"missing special token {special!r}")

    def __len__(self) -> int:
        return len(self._id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self._token_to_id

    @property
    def boundary_id(self) -> int:
        return self._token_to_id[BOUNDARY]

    @property
    def unk_id(self) -> int:
        return self._token_to_id[UNK]

    def token(self, idx: int) -> str:
        if not 0 <= idx < len(self._id_to_token):
            raise VocabError(f"id {idx} outside vocabulary of size {len(self)}")
        return self._id_to_token[idx]

    def id(self, token: str) -> int:
        return self._token_to_id.get(token, self.unk_id)

    def encode(self, tokens: Iterable[str]) -> list[int]:
        """Map tokens to ids; unknown tokens become the UNK id."""
        unk = self.unk_id
        return [self._token_to_id.get(t, unk) for t in tokens]

    def decode(self, ids: Iterable[int]) -> list[str]:
        """Map ids back to surface tokens; out-of-range ids raise."""
        return [self.token(i) for i in ids]

    # -- persistence --------------------------------------------------------

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for idx, token in enumerate(self._id_to_token):
                fh.write(f"{idx}\t{token}\t{self._counts.get(token, 0)}\n")

    @classmethod
    def load(cls, path, min_count: int = 1) -> "Vocabulary":
        tokens, counts = [], {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh):
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 3:
                    raise VocabError(f"line {lineno + 1}: expected id\\ttoken\\tcount")
                idx, token, count = int(parts[0]), parts[1], int(parts[2])
                if idx != lineno:
                    raise VocabError(f"line {lineno + 1}: non-dense id {idx}")
                tokens.append(token)
                counts[token] = count
        return cls(tokens, counts, min_count)


def build_vocab(sentences: Sequence[Sequence[str]], min_count: int) -> Vocabulary:
    """Count tokens over ``sentences`` and keep those with count >= min_count.

    Specials come first (ids 0 and 1); the rest are ordered by descending
    frequency, ties broken lexicographically, so the result is independent
    of sentence order.
    """
    if min_count < 1:
        raise VocabError(f"min_count must be >= 1, got {min_count}")
    if not sentences:
        raise VocabError("empty corpus")
    counts: Counter[str] = Counter()
    for sentence in sentences:
        counts.update(sentence)
    for special in SPECIALS:
        if special in counts:
            raise VocabError(f"corpus contains reserved token {special!r}")
    kept = sorted(
        (t for t, c in counts.items() if c >= min_count),
        key=lambda t: (-counts[t], t),
    )
    return Vocabulary(list(SPECIALS) + kept, dict(counts), min_count)
