"""Corpus-level BLEU-4, ROUGE-L and CIDEr with multi-reference support.

Conventions: BLEU and ROUGE are reported x100, CIDEr x10.  BLEU uses no
smoothing (any zero n-gram precision gives 0).  ROUGE-L takes the best
per-reference F(beta=1.2).  CIDEr defaults to the plain cosine form; a
"d" variant (count clipping plus length-gaussian penalty) is selectable.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

NGRAM_MAX = 4
ROUGE_BETA = 1.2
CIDER_SIGMA = 6.0


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class EvalInstance:
    image_id: str
    candidate: tuple[str, ...]
    references: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        if not self.references:
            raise MetricError(f"{self.image_id}: no references")


@dataclass
class MetricReport:
    bleu4: float
    rouge_l: float
    cider: float
    cider_variant: str = "plain"
    per_image_rouge: dict[str, float] = field(default_factory=dict)
    per_image_cider: dict[str, float] = field(default_factory=dict)


def ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


# ---------------------------------------------------------------------------
# BLEU-4
# ---------------------------------------------------------------------------

def bleu4(instances: Sequence[EvalInstance]) -> float:
    """Corpus BLEU: pooled clipped precisions, closest-reference brevity."""
    if not instances:
        raise MetricError("no instances")
    matched = [0] * NGRAM_MAX
    guessed = [0] * NGRAM_MAX
    cand_len = 0
    ref_len = 0
    for inst in instances:
        c = len(inst.candidate)
        cand_len += c
        # closest reference length; ties go to the shorter reference
        ref_len += min((abs(len(r) - c), len(r)) for r in inst.references)[1]
        for n in range(1, NGRAM_MAX + 1):
            counts = ngram_counts(inst.candidate, n)
            max_ref: Counter = Counter()
            for ref in inst.references:
                for gram, cnt in ngram_counts(ref, n).items():
                    if cnt > max_ref[gram]:
                        max_ref[gram] = cnt
            guessed[n - 1] += max(0, c - n + 1)
            matched[n - 1] += sum(min(cnt, max_ref[gram]) for gram, cnt in counts.items())
    if any(m == 0 for m in matched) or any(g == 0 for g in guessed):
        return 0.0
    log_precision = sum(math.log(m / g) for m, g in zip(matched, guessed)) / NGRAM_MAX
    brevity = min(1.0, math.exp(1.0 - ref_len / cand_len)) if cand_len > 0 else 0.0
    return 100.0 * brevity * math.exp(log_precision)


# ---------------------------------------------------------------------------
# ROUGE-L
# ---------------------------------------------------------------------------

def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            cur[j] = prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def rouge_l_instance(candidate, references, beta=ROUGE_BETA) -> float:
    """Best F(beta) over references, in [0, 1]."""
    if not candidate:
        return 0.0
    best = 0.0
    for ref in references:
        if not ref:
            continue
        lcs = lcs_length(candidate, ref)
        if lcs == 0:
            continue
        prec = lcs / len(candidate)
        rec = lcs / len(ref)
        f = (1 + beta ** 2) * prec * rec / (rec + beta ** 2 * prec)
        best = max(best, f)
    return best


def rouge_l(instances: Sequence[EvalInstance]) -> float:
    if not instances:
        raise MetricError("no instances")
    return 100.0 * sum(
        rouge_l_instance(i.candidate, i.references) for i in instances
    ) / len(instances)


# ---------------------------------------------------------------------------
# CIDEr
# ---------------------------------------------------------------------------

def _document_frequency(instances) -> dict[tuple, int]:
    """Number of images whose reference set contains each n-gram."""
    df: dict[tuple, int] = defaultdict(int)
    for inst in instances:
        seen: set[tuple] = set()
        for ref in inst.references:
            for n in range(1, NGRAM_MAX + 1):
                seen.update(ngram_counts(ref, n))
        for gram in seen:
            df[gram] += 1
    return df


def _tfidf(counts: Counter, df, n_images: int) -> tuple[dict, float]:
    vec = {}
    norm_sq = 0.0
    for gram, cnt in counts.items():
        idf = math.log(n_images / max(1, df[gram]))
        w = cnt * idf
        vec[gram] = w
        norm_sq += w * w
    return vec, math.sqrt(norm_sq)


def cider(instances: Sequence[EvalInstance], variant: str = "plain") -> tuple[float, dict[str, float]]:
    """Corpus CIDEr (x10) and per-image scores."""
    if not instances:
        raise MetricError("no instances")
    if variant not in ("plain", "d"):
        raise MetricError(f"unknown CIDEr variant {variant!r}")
    df = _document_frequency(instances)
    n_images = len(instances)
    per_image: dict[str, float] = {}
    for inst in instances:
        score_n = [0.0] * NGRAM_MAX
        for n in range(1, NGRAM_MAX + 1):
            cand_counts = ngram_counts(inst.candidate, n)
            cand_vec, cand_norm = _tfidf(cand_counts, df, n_images)
            for ref in inst.references:
                ref_vec, ref_norm = _tfidf(ngram_counts(ref, n), df, n_images)
                if cand_norm == 0.0 or ref_norm == 0.0:
                    continue
                if variant == "plain":
                    dot = sum(w * ref_vec.get(g, 0.0) for g, w in cand_vec.items())
                    sim = dot / (cand_norm * ref_norm)
                else:
                    dot = sum(min(w, ref_vec.get(g, 0.0)) * ref_vec.get(g, 0.0)
                              for g, w in cand_vec.items())
                    sim = dot / (cand_norm * ref_norm)
                    delta = len(inst.candidate) - len(ref)
                    sim *= math.exp(-delta * delta / (2.0 * CIDER_SIGMA ** 2))
                score_n[n - 1] += sim
        per_ref = [s / len(inst.references) for s in score_n]
        per_image[inst.image_id] = 10.0 * sum(per_ref) / NGRAM_MAX
    corpus = sum(per_image.values()) / len(per_image)
    return corpus, per_image


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def compute_report(instances: Sequence[EvalInstance], cider_variant="plain") -> MetricReport:
    if not instances:
        raise MetricError("no instances")
    cider_corpus, cider_per_image = cider(instances, cider_variant)
    per_rouge = {
        i.image_id: 100.0 * rouge_l_instance(i.candidate, i.references)
        for i in instances
    }
    return MetricReport(
        bleu4=bleu4(instances),
        rouge_l=sum(per_rouge.values()) / len(per_rouge),
        cider=cider_corpus,
        cider_variant=cider_variant,
        per_image_rouge=per_rouge,
        per_image_cider=cider_per_image,
    )


def build_instances(
    candidates: dict[str, Sequence[str]],
    references: dict[str, Iterable[Sequence[str]]],
) -> list[EvalInstance]:
    """Join candidate and reference token maps on image id."""
    instances = []
    for image_id, cand in candidates.items():
        if image_id not in references:
            raise MetricError(f"no references for image {image_id}")
        instances.append(EvalInstance(
            image_id=image_id,
            candidate=tuple(cand),
            references=tuple(tuple(r) for r in references[image_id]),
        ))
    return instances
