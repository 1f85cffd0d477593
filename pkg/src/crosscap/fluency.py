"""Four-view sentence fluency classifier.

Each view is an LSTM classifier over one stream of a bilingual example:
target words, target POS tags, source words, or source POS tags.  The
ensemble score is the arithmetic mean of the four per-view fluent
probabilities, and a sentence counts as fluent iff that score exceeds
0.5 (strictly).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import FLUENT, NOT_FLUENT, BilingualExample, FluencyExample
from .nn import Adam, SequenceClassifier, load_params, save_params
from .text import Vocabulary, build_vocab

TARGET_WORDS = "target_words"
TARGET_POS = "target_pos"
SOURCE_WORDS = "source_words"
SOURCE_POS = "source_pos"
VIEWS = (TARGET_WORDS, TARGET_POS, SOURCE_WORDS, SOURCE_POS)

# class indices for the two-way softmax
NOT_FLUENT_CLASS = 0
FLUENT_CLASS = 1


class FluencyError(ValueError):
    pass


def view_stream(view: str, example: BilingualExample) -> tuple[str, ...]:
    """The token stream a view consumes; loud failure when it is missing."""
    if view == TARGET_WORDS:
        return example.target.tokens
    if view == SOURCE_WORDS:
        return example.source.tokens
    if view == TARGET_POS:
        stream = example.target.pos_tags
    elif view == SOURCE_POS:
        stream = example.source.pos_tags
    else:
        raise FluencyError(f"unknown view {view!r}")
    if stream is None:
        raise FluencyError(
            f"view {view} needs POS tags, sentence {example.sentence_id} has none")
    return stream


@dataclass
class FluencyScore:
    fluent: float
    not_fluent: float


@dataclass
class FluencyView:
    view: str
    model: SequenceClassifier
    vocab: Vocabulary


@dataclass(frozen=True)
class TrainConfig:
    embed_dim: int = 32
    hidden_dim: int = 32
    epochs: int = 30
    batch_size: int = 64
    patience: int = 5
    dropout: float = 0.5
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.9
    eps: float = 1e-6
    min_count: int = 1


@dataclass
class TrainHistory:
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    best_epoch: int = -1


def _encode_set(view, vocab, examples):
    batch = []
    for ex in examples:
        ids = vocab.encode(view_stream(view, ex.pair))
        batch.append((ids, FLUENT_CLASS if ex.is_fluent else NOT_FLUENT_CLASS))
    return batch


def _mean_loss(model, batch):
    return float(np.mean([model.loss(ids, label) for ids, label in batch]))


def train_view(view: str,
               train_examples: list[FluencyExample],
               val_examples: list[FluencyExample] | None,
               config: TrainConfig = TrainConfig(),
               seed: int = 0) -> tuple[FluencyView, TrainHistory]:
    """Adam-train one view; returns the best-validation-loss checkpoint.

    Without a validation set the checkpoint is picked by training loss
    instead (kept mostly for tiny smoke runs).
    """
    if not train_examples:
        raise FluencyError("empty training set")
    n_fluent = sum(1 for ex in train_examples if ex.is_fluent)
    if n_fluent == 0 or n_fluent == len(train_examples):
        raise FluencyError("training data must contain both classes")
    streams = [view_stream(view, ex.pair) for ex in train_examples]
    vocab = build_vocab(streams, min_count=config.min_count)
    model = SequenceClassifier(len(vocab), config.embed_dim, config.hidden_dim,
                               n_classes=2, seed=seed)
    train_batchable = _encode_set(view, vocab, train_examples)
    val_batchable = _encode_set(view, vocab, val_examples) if val_examples else None

    opt = Adam(model.params, lr=config.lr, beta1=config.beta1,
               beta2=config.beta2, eps=config.eps)
    rng = np.random.default_rng(seed)
    history = TrainHistory()
    best_loss = np.inf
    best_params = None
    stale = 0
    for epoch in range(config.epochs):
        order = rng.permutation(len(train_batchable))
        epoch_losses = []
        for start in range(0, len(order), config.batch_size):
            batch = [train_batchable[i] for i in order[start:start + config.batch_size]]
            emb_masks = out_masks = None
            if config.dropout > 0.0:
                masks = [model.make_masks(rng, len(ids), config.dropout)
                         for ids, _ in batch]
                emb_masks = [m[0] for m in masks]
                out_masks = [m[1] for m in masks]
            loss, grads = model.loss_and_grads(batch, emb_masks, out_masks)
            opt.step(model.params, grads)
            epoch_losses.append(loss)
        history.train_losses.append(float(np.mean(epoch_losses)))
        monitored = (_mean_loss(model, val_batchable) if val_batchable
                     else history.train_losses[-1])
        if val_batchable:
            history.val_losses.append(monitored)
        if monitored < best_loss:
            best_loss = monitored
            best_params = {k: v.copy() for k, v in model.params.items()}
            history.best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    if best_params is not None:
        model.params = best_params
    return FluencyView(view=view, model=model, vocab=vocab), history


def score_stream(fview: FluencyView, tokens) -> FluencyScore:
    """Score a raw token stream with one view (OOV tokens become UNK)."""
    ids = fview.vocab.encode(tokens)
    probs, _ = fview.model.forward(ids)
    return FluencyScore(fluent=float(probs[-1, FLUENT_CLASS]),
                        not_fluent=float(probs[-1, NOT_FLUENT_CLASS]))


def score_view(fview: FluencyView, example: BilingualExample) -> FluencyScore:
    return score_stream(fview, view_stream(fview.view, example))


def score_ensemble(views, example: BilingualExample) -> float:
    """Mean fluent-probability over exactly the four views."""
    names = sorted(v.view for v in views)
    if names != sorted(VIEWS):
        raise FluencyError(f"need the four views {VIEWS}, got {names}")
    return float(np.mean([score_view(v, example).fluent for v in views]))


def score_pairs(views, examples, threads: int = 1) -> list[float]:
    """Ensemble-score many examples, optionally across a thread pool."""
    if threads <= 1:
        return [score_ensemble(views, ex) for ex in examples]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda ex: score_ensemble(views, ex), examples))


def classify(f: float) -> str:
    if not 0.0 <= f <= 1.0:
        raise FluencyError(f"score {f} outside [0, 1]")
    return FLUENT if f > 0.5 else NOT_FLUENT


def rerank_scorer(views, pos_tagger=None, source_lookup=None):
    """Build a candidate-scoring callable for reranking decoded captions.

    Generated captions always provide target words; target POS comes from
    ``pos_tagger(tokens)`` when given, and the two source streams from
    ``source_lookup(image_id)`` (a source CaptionRecord or None).  Views
    whose stream is unavailable are skipped and the mean runs over the
    rest — the returned flag marks such degraded scores.  An empty
    candidate cannot be fed to the models and scores 0.0 outright.
    """
    by_name = {v.view: v for v in views}
    if TARGET_WORDS not in by_name:
        raise FluencyError("rerank scoring needs at least the target_words view")

    def fluency_of(candidate):
        if not candidate.tokens:
            return 0.0, True
        streams = {TARGET_WORDS: tuple(candidate.tokens)}
        if pos_tagger is not None:
            streams[TARGET_POS] = pos_tagger(candidate.tokens)
        source = source_lookup(candidate.image_id) if source_lookup else None
        if source is not None:
            streams[SOURCE_WORDS] = source.tokens
            if source.pos_tags is not None:
                streams[SOURCE_POS] = source.pos_tags
        used = [name for name in VIEWS if name in streams and name in by_name]
        fs = [score_stream(by_name[name], streams[name]).fluent for name in used]
        return float(np.mean(fs)), len(used) < len(VIEWS)

    return fluency_of


# ---------------------------------------------------------------------------
# evaluation and baselines
# ---------------------------------------------------------------------------

@dataclass
class PrecisionRecall:
    precision: float          # percent
    recall: float             # percent
    tp: int
    fp: int
    fn: int
    precision_defined: bool = True


def evaluate_pr(predictions, labels) -> PrecisionRecall:
    """Precision/recall in percent, with fluent as the positive class."""
    predictions = list(predictions)
    labels = list(labels)
    if len(predictions) != len(labels):
        raise FluencyError(
            f"{len(predictions)} predictions vs {len(labels)} labels")
    if not predictions:
        raise FluencyError("nothing to evaluate")
    tp = sum(1 for p, y in zip(predictions, labels) if p == FLUENT and y == FLUENT)
    fp = sum(1 for p, y in zip(predictions, labels) if p == FLUENT and y != FLUENT)
    fn = sum(1 for p, y in zip(predictions, labels) if p != FLUENT and y == FLUENT)
    recall = 100.0 * tp / (tp + fn) if tp + fn else 0.0
    if tp + fp == 0:
        return PrecisionRecall(0.0, recall, tp, fp, fn, precision_defined=False)
    return PrecisionRecall(100.0 * tp / (tp + fp), recall, tp, fp, fn)


def length_baseline(sentences, fluent_training_lengths) -> list[str]:
    """Fluent iff strictly shorter than the mean fluent training length."""
    lengths = list(fluent_training_lengths)
    if not lengths:
        raise FluencyError("no fluent training lengths for the baseline")
    threshold = sum(lengths) / len(lengths)
    return [FLUENT if len(s) < threshold else NOT_FLUENT for s in sentences]


def random_baseline(n: int, seed: int = 0) -> list[str]:
    rng = np.random.default_rng(seed)
    return [FLUENT if rng.random() < 0.5 else NOT_FLUENT for _ in range(n)]


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def save_view_set(out_dir, views: list[FluencyView]) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for fv in views:
        m = fv.model
        save_params(out / f"view_{fv.view}", m.params, meta={
            "view": fv.view,
            "vocab_size": len(fv.vocab),
            "embed_dim": m.embed_dim,
            "hidden_dim": m.hidden_dim,
            "n_classes": m.n_classes,
        })
        fv.vocab.save(out / f"vocab_{fv.view}.txt")


def load_view(model_dir, view: str) -> FluencyView:
    model_dir = Path(model_dir)
    params, meta = load_params(model_dir / f"view_{view}")
    vocab = Vocabulary.load(model_dir / f"vocab_{view}.txt")
    model = SequenceClassifier(meta["vocab_size"], meta["embed_dim"],
                               meta["hidden_dim"], n_classes=meta["n_classes"])
    model.params = params
    return FluencyView(view=view, model=model, vocab=vocab)


def load_view_set(model_dir) -> list[FluencyView]:
    return [load_view(model_dir, v) for v in VIEWS]
