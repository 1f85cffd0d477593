"""Fluency-guided training strategies and the rerank baseline.

Three ways of exposing a noisily-translated corpus to the captioner:
keep only sentences scored fluent; resample low-fluency sentences each
epoch with probability proportional to their score; or down-weight their
loss.  ``without_fluency`` is the unguided control.  ``rerank_by_fluency``
instead reorders an already-decoded candidate list.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .captioner import batch_loss

WITHOUT_FLUENCY = "without_fluency"
FLUENCY_ONLY = "fluency_only"
REJECTION_SAMPLING = "rejection_sampling"
WEIGHTED_LOSS = "weighted_loss"
STRATEGIES = (WITHOUT_FLUENCY, FLUENCY_ONLY, REJECTION_SAMPLING, WEIGHTED_LOSS)


class GuidanceError(ValueError):
    pass


def _scores(records) -> list[float]:
    scores = []
    for rec in records:
        f = rec.fluency_score
        if f is None:
            raise GuidanceError(
                f"record {rec.sentence_id} has no fluency score")
        scores.append(float(f))
    return scores


def filter_fluent(records) -> list:
    """Exactly the records with f > 0.5 (strict)."""
    records = list(records)
    return [rec for rec, f in zip(records, _scores(records)) if f > 0.5]


def rejection_sample_epoch(records, seed: int, epoch: int) -> list:
    """One epoch's sample: f > 0.5 always kept; f <= 0.5 kept iff f > u
    with a fresh u ~ U(0, 0.5) per record per epoch."""
    records = list(records)
    scores = np.asarray(_scores(records))
    rng = np.random.default_rng(np.random.SeedSequence((seed, epoch)))
    u = rng.uniform(0.0, 0.5, size=len(records))
    keep = (scores > 0.5) | (scores > u)
    return [rec for rec, k in zip(records, keep) if k]


def mu_weight(f: float) -> float:
    """Loss multiplier: 1 above the fluency threshold, else the score itself."""
    if not 0.0 <= f <= 1.0:
        raise GuidanceError(f"fluency score {f} outside [0, 1]")
    return 1.0 if f > 0.5 else f


def weighted_batch_loss(model, batch, scores) -> float:
    if len(batch) != len(scores):
        raise GuidanceError(f"{len(scores)} scores for batch of {len(batch)}")
    return batch_loss(model, batch, weights=[mu_weight(f) for f in scores])


# ---------------------------------------------------------------------------
# strategy objects for the trainer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Strategy:
    kind: str
    seed: int = 0

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise GuidanceError(
                f"unknown strategy {self.kind!r}; expected one of {STRATEGIES}")

    @property
    def requires_scores(self) -> bool:
        return self.kind != WITHOUT_FLUENCY

    def epoch_items(self, items, epoch: int):
        """(selected items, per-item loss weights or None) for one epoch."""
        items = list(items)
        if self.kind == WITHOUT_FLUENCY:
            return items, None
        if self.kind == FLUENCY_ONLY:
            kept = filter_fluent(items)
            if not kept:
                raise GuidanceError("no sentences classified fluent")
            return kept, None
        if self.kind == REJECTION_SAMPLING:
            return rejection_sample_epoch(items, self.seed, epoch), None
        return items, [mu_weight(f) for f in _scores(items)]


# ---------------------------------------------------------------------------
# late-translation rerank
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RerankedCaption:
    candidate: object          # the caption record that was rescored
    fluency: float
    degraded: bool             # scored with fewer than the four views


def rerank_by_fluency(candidates, fluency_of) -> list[RerankedCaption]:
    """Stable sort, highest estimated fluency first.

    ``fluency_of(candidate)`` must return ``(score, degraded_flag)``;
    original order breaks ties (sort stability).
    """
    candidates = list(candidates)
    if not candidates:
        raise GuidanceError("no candidates to rerank")
    scored = []
    for cand in candidates:
        f, degraded = fluency_of(cand)
        if not 0.0 <= f <= 1.0:
            raise GuidanceError(f"fluency score {f} outside [0, 1]")
        scored.append(RerankedCaption(cand, float(f), bool(degraded)))
    return sorted(scored, key=lambda r: -r.fluency)
