"""Dataset records and their on-disk formats.

Three file kinds, all plain text:

* caption files — one JSON object per line with keys ``image_id``,
  ``sentence_id``, ``language`` ("source" | "target"), ``tokens`` (array of
  pre-segmented strings), optional ``pos`` (array, same length as tokens)
  and optional ``fluency`` (number in [0, 1]);
* feature files — first line ``dim=<d>``, then ``<image_id> <v1> ... <vd>``;
  vectors are l2-normalized on ingestion;
* split files — handled through :class:`DatasetSplit`, persisted inside run
  manifests.

Loaded objects are immutable in practice (nothing mutates them after
construction) and safe to share across threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

SOURCE = "source"
TARGET = "target"
LANGUAGES = (SOURCE, TARGET)

FLUENT = "fluent"
NOT_FLUENT = "not_fluent"


class CorpusError(ValueError):
    """Malformed or inconsistent dataset input."""


@dataclass(frozen=True)
class CaptionRecord:
    """One sentence attached to one image, in one language."""

    image_id: str
    sentence_id: str
    language: str
    tokens: tuple[str, ...]
    pos_tags: tuple[str, ...] | None = None
    fluency_score: float | None = None

    def __post_init__(self):
        if self.language not in LANGUAGES:
            raise CorpusError(f"unknown language {self.language!r}")
        if not self.tokens:
            raise CorpusError(f"{self.sentence_id}: empty token sequence")
        if self.pos_tags is not None and len(self.pos_tags) != len(self.tokens):
            raise CorpusError(
                f"{self.sentence_id}: {len(self.pos_tags)} POS tags for "
                f"{len(self.tokens)} tokens"
            )
        if self.fluency_score is not None and not 0.0 <= self.fluency_score <= 1.0:
            raise CorpusError(
                f"{self.sentence_id}: fluency {self.fluency_score} outside [0, 1]"
            )

    def with_score(self, score: float) -> "CaptionRecord":
        return replace(self, fluency_score=score)

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


@dataclass(frozen=True)
class BilingualExample:
    """A source sentence paired with its machine-translated target sentence."""

    source: CaptionRecord
    target: CaptionRecord

    def __post_init__(self):
        if self.source.language != SOURCE or self.target.language != TARGET:
            raise CorpusError(
                f"pair {self.target.sentence_id}: languages must be source/target"
            )

    @property
    def sentence_id(self) -> str:
        return self.target.sentence_id


@dataclass(frozen=True)
class FluencyExample:
    """A bilingual pair carrying a consensus fluency label."""

    pair: BilingualExample
    label: str

    def __post_init__(self):
        if self.label not in (FLUENT, NOT_FLUENT):
            raise CorpusError(f"unknown label {self.label!r}")

    @property
    def is_fluent(self) -> bool:
        return self.label == FLUENT


@dataclass(frozen=True)
class ImageFeature:
    """A unit-norm visual feature vector for one image."""

    image_id: str
    vector: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=np.float64)
        norm = float(np.linalg.norm(v))
        if norm == 0.0:
            raise CorpusError(f"{self.image_id}: zero feature vector")
        object.__setattr__(self, "vector", v / norm)

    @property
    def dim(self) -> int:
        return self.vector.shape[0]


@dataclass(frozen=True)
class DatasetSplit:
    name: str
    items: tuple[str, ...] = field(default_factory=tuple)


SPLIT_NAMES = ("train", "val", "test")


# ---------------------------------------------------------------------------
# caption files
# ---------------------------------------------------------------------------

def parse_caption_line(line: str, lineno: int) -> CaptionRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"line {lineno}: not valid JSON ({exc.msg})") from exc
    if not isinstance(obj, dict):
        raise CorpusError(f"line {lineno}: expected an object")
    try:
        tokens = obj["tokens"]
        record = CaptionRecord(
            image_id=str(obj["image_id"]),
            sentence_id=str(obj["sentence_id"]),
            language=str(obj["language"]),
            tokens=tuple(str(t) for t in tokens),
            pos_tags=tuple(str(t) for t in obj["pos"]) if obj.get("pos") is not None else None,
            fluency_score=float(obj["fluency"]) if obj.get("fluency") is not None else None,
        )
    except KeyError as exc:
        raise CorpusError(f"line {lineno}: missing key {exc.args[0]!r}") from exc
    except CorpusError as exc:
        raise CorpusError(f"line {lineno}: {exc}") from exc
    return record


def load_captions(path) -> list[CaptionRecord]:
    """Load a line-delimited caption file, preserving order."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            records.append(parse_caption_line(line, lineno))
    return records


def caption_to_json(record: CaptionRecord) -> str:
    obj = {
        "image_id": record.image_id,
        "sentence_id": record.sentence_id,
        "language": record.language,
        "tokens": list(record.tokens),
    }
    if record.pos_tags is not None:
        obj["pos"] = list(record.pos_tags)
    if record.fluency_score is not None:
        obj["fluency"] = record.fluency_score
    return json.dumps(obj, ensure_ascii=False)


def save_captions(records: Iterable[CaptionRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(caption_to_json(record) + "\n")


def pair_records(
    source_records: Sequence[CaptionRecord],
    target_records: Sequence[CaptionRecord],
) -> list[BilingualExample]:
    """Match source and target records by sentence_id, in target order."""
    by_id = {r.sentence_id: r for r in source_records}
    pairs = []
    for target in target_records:
        source = by_id.get(target.sentence_id)
        if source is None:
            raise CorpusError(f"no source sentence for {target.sentence_id}")
        pairs.append(BilingualExample(source=source, target=target))
    return pairs


# ---------------------------------------------------------------------------
# feature files
# ---------------------------------------------------------------------------

def load_features(path) -> dict[str, ImageFeature]:
    """Load and unit-normalize an image feature file."""
    features: dict[str, ImageFeature] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("dim="):
            raise CorpusError("feature file must start with a 'dim=<d>' header")
        try:
            dim = int(header[len("dim="):])
        except ValueError as exc:
            raise CorpusError(f"bad dimension header {header!r}") from exc
        if dim < 1:
            raise CorpusError(f"bad dimension {dim}")
        for lineno, line in enumerate(fh, start=2):
            parts = line.split()
            if not parts:
                continue
            image_id, values = parts[0], parts[1:]
            if len(values) != dim:
                raise CorpusError(
                    f"line {lineno}: {len(values)} values for declared dim {dim}"
                )
            try:
                vector = np.array([float(v) for v in values], dtype=np.float64)
            except ValueError as exc:
                raise CorpusError(f"line {lineno}: non-numeric value") from exc
            if not np.all(np.isfinite(vector)):
                raise CorpusError(f"line {lineno}: non-finite value")
            try:
                features[image_id] = ImageFeature(image_id=image_id, vector=vector)
            except CorpusError as exc:
                raise CorpusError(f"line {lineno}: {exc}") from exc
    return features


def save_features(features: dict[str, ImageFeature], path) -> None:
    dims = {f.dim for f in features.values()}
    if len(dims) > 1:
        raise CorpusError(f"inconsistent feature dimensions {sorted(dims)}")
    dim = dims.pop() if dims else 0
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"dim={dim}\n")
        for image_id in features:
            values = " ".join("%.17g" % v for v in features[image_id].vector)
            fh.write(f"{image_id} {values}\n")


# ---------------------------------------------------------------------------
# splits
# ---------------------------------------------------------------------------

def make_splits(
    ids: Sequence[str],
    ratios: Sequence[float] | None = None,
    explicit: dict[str, Sequence[str]] | None = None,
    seed: int = 0,
) -> dict[str, DatasetSplit]:
    """Partition record ids into train/val/test.

    Either ``ratios`` (three numbers summing to 1; largest-remainder
    apportionment of a seeded permutation) or ``explicit`` id lists (which
    must partition ``ids`` exactly) select the members.
    """
    ids = list(ids)
    if len(set(ids)) != len(ids):
        raise CorpusError("duplicate record ids")
    if (ratios is None) == (explicit is None):
        raise CorpusError("provide exactly one of ratios or explicit lists")

    if explicit is not None:
        if set(explicit) != set(SPLIT_NAMES):
            raise CorpusError(f"explicit lists must name {SPLIT_NAMES}")
        seen: set[str] = set()
        universe = set(ids)
        for name in SPLIT_NAMES:
            members = list(explicit[name])
            overlap = seen.intersection(members)
            if overlap:
                raise CorpusError(f"ids in more than one split: {sorted(overlap)[:5]}")
            unknown = set(members) - universe
            if unknown:
                raise CorpusError(f"unknown ids in {name}: {sorted(unknown)[:5]}")
            seen.update(members)
        if seen != universe:
            missing = sorted(universe - seen)
            raise CorpusError(f"ids in no split: {missing[:5]}")
        return {
            name: DatasetSplit(name=name, items=tuple(explicit[name]))
            for name in SPLIT_NAMES
        }

    if len(ratios) != len(SPLIT_NAMES):
        raise CorpusError("need one ratio per split")
    if any(r < 0 for r in ratios) or not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        raise CorpusError(f"ratios {ratios} must be non-negative and sum to 1")

    rng = np.random.default_rng(seed)
    order = [ids[i] for i in rng.permutation(len(ids))]
    n = len(ids)
    sizes = [int(math.floor(r * n)) for r in ratios]
    remainders = [r * n - s for r, s in zip(ratios, sizes)]
    for _ in range(n - sum(sizes)):
        k = max(range(len(sizes)), key=lambda i: (remainders[i], -i))
        sizes[k] += 1
        remainders[k] = -1.0
    splits = {}
    start = 0
    for name, size in zip(SPLIT_NAMES, sizes):
        splits[name] = DatasetSplit(name=name, items=tuple(order[start:start + size]))
        start += size
    return splits
