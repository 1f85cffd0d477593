"""Deterministic toy bilingual caption corpus with controllable disfluency.

Each image is a (color, object, action) triple.  Its feature vector is
one-hot blocks for the three attributes plus a little seeded noise,
l2-normalized, so the attributes stay recoverable by nearest-block
lookup.  Source captions come from fixed templates; target captions are
a token-for-token mapping of the source (uppercased words), which stands
in for machine translation.  A corrupted target caption gets marker
tokens spliced in and a local word-order scramble, and is labeled
not_fluent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import (
    FLUENT,
    NOT_FLUENT,
    SOURCE,
    TARGET,
    CaptionRecord,
    CorpusError,
    ImageFeature,
    make_splits,
    save_captions,
    save_features,
)

MARKER = "garble"
MARKER_POS = "X"
NOISE_SCALE = 0.05

_POS_BY_SLOT = {"det": "DET", "color": "ADJ", "object": "NOUN",
                "action": "VERB", "extra": "ADV"}

# (slot sequence, trailing word or None)
_TEMPLATES = (
    (("det", "color", "object", "action"), None),
    (("det", "color", "object", "action", "extra"), "today"),
)


@dataclass(frozen=True)
class SynthConfig:
    n_images: int = 100
    captions_per_image: int = 1
    colors: tuple[str, ...] = ("red", "blue", "green")
    objects: tuple[str, ...] = ("dog", "cat", "bird")
    actions: tuple[str, ...] = ("runs", "sleeps")
    feat_dim: int = 8
    corrupt_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_images < 1 or self.captions_per_image < 1:
            raise CorpusError("need at least one image and one caption per image")
        if not (self.colors and self.objects and self.actions):
            raise CorpusError("attribute inventories must be non-empty")
        if not 0.0 <= self.corrupt_prob <= 1.0:
            raise CorpusError(f"corrupt_prob {self.corrupt_prob} outside [0, 1]")
        blocks = len(self.colors) + len(self.objects) + len(self.actions)
        if self.feat_dim < blocks:
            raise CorpusError(
                f"feat_dim {self.feat_dim} too small for {blocks} attribute slots")


@dataclass
class SynthCorpus:
    features: dict[str, ImageFeature]
    source: list[CaptionRecord]
    target: list[CaptionRecord]          # what "translation" produced, possibly corrupted
    references: list[CaptionRecord]      # clean target rendering of every sentence
    labels: dict[str, str]               # sentence_id -> fluent / not_fluent

    def labeled_targets(self) -> list[CaptionRecord]:
        """Target records with the label written into the fluency field."""
        return [
            r.with_score(1.0 if self.labels[r.sentence_id] == FLUENT else 0.0)
            for r in self.target
        ]


def map_token(word: str) -> str:
    """Source-to-target word mapping: a deterministic bijection."""
    return word.upper()


def toy_pos_tags(tokens, config: SynthConfig | None = None) -> tuple[str, ...]:
    """Tag target-language tokens by inventory lookup.

    Good enough for generated captions, which reuse the corpus inventory;
    anything unrecognized (markers included) gets the catch-all tag.
    """
    cfg = config or SynthConfig()
    table = {map_token("the"): "DET", map_token("today"): "ADV"}
    for w in cfg.colors:
        table[map_token(w)] = _POS_BY_SLOT["color"]
    for w in cfg.objects:
        table[map_token(w)] = _POS_BY_SLOT["object"]
    for w in cfg.actions:
        table[map_token(w)] = _POS_BY_SLOT["action"]
    return tuple(table.get(t, MARKER_POS) for t in tokens)


def _make_feature(image_id, color_i, object_i, action_i, cfg, rng) -> ImageFeature:
    vec = rng.uniform(0.0, NOISE_SCALE, size=cfg.feat_dim)
    vec[color_i] = 1.0
    vec[len(cfg.colors) + object_i] = 1.0
    vec[len(cfg.colors) + len(cfg.objects) + action_i] = 1.0
    return ImageFeature(image_id=image_id, vector=vec)


def _corrupt(tokens, pos, rng):
    """Markers into the second slot and the tail, plus one interior swap.

    The marker slots are fixed so corruption is a stable sequential
    pattern, not background noise: a generator trained on corrupted text
    reproduces it, which is exactly the failure mode fluency guidance is
    supposed to remove.  The swap stays inside the content span, so every
    content word survives.
    """
    toks = [tokens[0], MARKER, *tokens[1:], MARKER]
    tags = [pos[0], MARKER_POS, *pos[1:], MARKER_POS]
    at = int(rng.integers(2, len(toks) - 2))
    toks[at], toks[at + 1] = toks[at + 1], toks[at]
    tags[at], tags[at + 1] = tags[at + 1], tags[at]
    return tuple(toks), tuple(tags)


def generate(cfg: SynthConfig) -> SynthCorpus:
    rng = np.random.default_rng(cfg.seed)
    features = {}
    source, target, references = [], [], []
    labels = {}
    for i in range(cfg.n_images):
        image_id = f"img{i:05d}"
        color_i = int(rng.integers(len(cfg.colors)))
        object_i = int(rng.integers(len(cfg.objects)))
        action_i = int(rng.integers(len(cfg.actions)))
        features[image_id] = _make_feature(image_id, color_i, object_i, action_i, cfg, rng)
        for j in range(cfg.captions_per_image):
            sid = f"{image_id}s{j}"
            slots, trailing = _TEMPLATES[int(rng.integers(len(_TEMPLATES)))]
            words = {"det": "the", "color": cfg.colors[color_i],
                     "object": cfg.objects[object_i],
                     "action": cfg.actions[action_i], "extra": trailing}
            src_tokens = tuple(words[s] for s in slots)
            pos = tuple(_POS_BY_SLOT[s] for s in slots)
            source.append(CaptionRecord(
                image_id=image_id, sentence_id=sid, language=SOURCE,
                tokens=src_tokens, pos_tags=pos))
            tgt_tokens = tuple(map_token(w) for w in src_tokens)
            references.append(CaptionRecord(
                image_id=image_id, sentence_id=sid, language=TARGET,
                tokens=tgt_tokens, pos_tags=pos))
            if rng.random() < cfg.corrupt_prob:
                bad_tokens, bad_pos = _corrupt(tgt_tokens, pos, rng)
                target.append(CaptionRecord(
                    image_id=image_id, sentence_id=sid, language=TARGET,
                    tokens=bad_tokens, pos_tags=bad_pos))
                labels[sid] = NOT_FLUENT
            else:
                target.append(CaptionRecord(
                    image_id=image_id, sentence_id=sid, language=TARGET,
                    tokens=tgt_tokens, pos_tags=pos))
                labels[sid] = FLUENT
    return SynthCorpus(features=features, source=source, target=target,
                       references=references, labels=labels)


def write_corpus(corpus: SynthCorpus, out_dir, cfg: SynthConfig,
                 split_ratios=(0.8, 0.1, 0.1), split_seed: int = 0) -> dict:
    """Write features, per-split caption files and a manifest; returns the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    image_ids = list(corpus.features)
    splits = make_splits(image_ids, ratios=split_ratios, seed=split_seed)
    save_features(corpus.features, out / "features.txt")
    by_split_counts = {}
    labeled = {r.sentence_id: r for r in corpus.labeled_targets()}
    for split in splits.values():
        members = set(split.items)

        def pick(records):
            return [r for r in records if r.image_id in members]

        save_features({i: corpus.features[i] for i in corpus.features
                       if i in members}, out / f"{split.name}_features.txt")
        save_captions(pick(corpus.source), out / f"{split.name}_source.jsonl")
        save_captions(pick(corpus.target), out / f"{split.name}_target.jsonl")
        save_captions([labeled[r.sentence_id] for r in pick(corpus.target)],
                      out / f"{split.name}_labels.jsonl")
        save_captions(pick(corpus.references), out / f"{split.name}_references.jsonl")
        by_split_counts[split.name] = {
            "images": len(split.items),
            "sentences": len(pick(corpus.target)),
        }
    n_bad = sum(1 for v in corpus.labels.values() if v == NOT_FLUENT)
    manifest = {
        "config": {
            "n_images": cfg.n_images,
            "captions_per_image": cfg.captions_per_image,
            "colors": list(cfg.colors),
            "objects": list(cfg.objects),
            "actions": list(cfg.actions),
            "feat_dim": cfg.feat_dim,
            "corrupt_prob": cfg.corrupt_prob,
            "seed": cfg.seed,
        },
        "split_seed": split_seed,
        "split_ratios": list(split_ratios),
        "splits": by_split_counts,
        "not_fluent_fraction": n_bad / len(corpus.labels),
        "marker_token": MARKER,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest


def marker_fraction(records) -> float:
    """Fraction of captions containing at least one marker token."""
    records = list(records)
    if not records:
        raise CorpusError("no captions")
    return sum(1 for r in records if MARKER in r.tokens) / len(records)
