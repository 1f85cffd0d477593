"""Feature-conditioned caption generator: loss, greedy and beam decoding.

The decoder interface is two methods — ``begin(feature)`` and
``step(state, token)`` — each returning ``(state, next-token probability
row)``; ``beam_search`` and ``greedy_decode`` run against anything
implementing it, which is how the toy transition-table models in the
tests plug in.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .corpus import CorpusError
from .nn import CaptionModel, Sgd, load_params, save_params
from .nn.models import probs_floor_log
from .text import Vocabulary, build_vocab

DEFAULT_BEAM = 5
DEFAULT_MAX_LEN = 30


class CaptionerError(ValueError):
    pass


@dataclass(frozen=True)
class Hypothesis:
    """A (partial) decode: emitted ids, their exact summed log probability."""
    tokens: tuple[int, ...]
    logprob: float
    state: object = None
    finished: bool = False

    def content_tokens(self, end_id) -> tuple[int, ...]:
        return self.tokens[:-1] if self.finished and self.tokens[-1] == end_id \
            else self.tokens


def caption_logprob(model, feature, ids) -> float:
    """Sum over positions 1..n+1 of log p(w_t); the image step is unscored."""
    return model.logprob(feature, ids)


def batch_loss(model, batch, weights=None) -> float:
    """Mean (optionally weighted) negative caption log-likelihood."""
    if not batch:
        raise CaptionerError("empty batch")
    m = len(batch)
    if weights is None:
        weights = [1.0] * m
    if len(weights) != m:
        raise CaptionerError(f"{len(weights)} weights for batch of {m}")
    total = 0.0
    for w, (feature, ids) in zip(weights, batch):
        total += float(w) * -model.logprob(feature, ids)
    return total / m


# ---------------------------------------------------------------------------
# decoding
# ---------------------------------------------------------------------------

def greedy_decode(model, feature, max_len: int = DEFAULT_MAX_LEN) -> Hypothesis:
    """Argmax at every step; ties go to the lowest token id."""
    if max_len < 1:
        raise CaptionerError("max_len must be >= 1")
    state, probs = model.begin(feature)
    tokens: tuple[int, ...] = ()
    logprob = 0.0
    while True:
        tok = int(np.argmax(probs))
        logprob += float(probs_floor_log(probs)[tok])
        tokens += (tok,)
        if tok == model.end_id:
            return Hypothesis(tokens, logprob, finished=True)
        if len(tokens) >= max_len:
            return Hypothesis(tokens, logprob, finished=False)
        state, probs = model.step(state, tok)


def beam_search(model, feature, beam_size: int = DEFAULT_BEAM,
                max_len: int = DEFAULT_MAX_LEN) -> list[Hypothesis]:
    """Keep the beam_size best extensions per step.

    A hypothesis finishes when it emits the boundary token or reaches
    max_len content tokens.  The returned list is sorted by log
    probability descending, ties broken shorter-first then by token ids.
    """
    if beam_size < 1 or max_len < 1:
        raise CaptionerError("beam_size and max_len must be >= 1")
    state, probs = model.begin(feature)
    live = [(Hypothesis((), 0.0, state=state), probs)]
    done: list[Hypothesis] = []
    while live:
        candidates = []
        for hyp, probs in live:
            logs = probs_floor_log(probs)
            for tok in range(len(probs)):
                candidates.append((hyp.logprob + float(logs[tok]), hyp, tok))
        # all live hypotheses share a length, so ordering ties reduce to
        # the lexicographic token comparison
        candidates.sort(key=lambda c: (-c[0], c[1].tokens + (c[2],)))
        live = []
        for logprob, hyp, tok in candidates[:beam_size]:
            tokens = hyp.tokens + (tok,)
            if tok == model.end_id:
                done.append(Hypothesis(tokens, logprob, finished=True))
            elif len(tokens) >= max_len:
                done.append(Hypothesis(tokens, logprob, finished=False))
            else:
                state, probs = model.step(hyp.state, tok)
                live.append((Hypothesis(tokens, logprob, state=state), probs))
    done.sort(key=lambda h: (-h.logprob, len(h.tokens), h.tokens))
    return [replace(h, state=None) for h in done[:beam_size]]


def hypothesis_words(hyp: Hypothesis, model, vocab: Vocabulary) -> tuple[str, ...]:
    return tuple(vocab.decode(hyp.content_tokens(model.end_id)))


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CaptionTrainConfig:
    embed_dim: int = 32
    hidden_dim: int = 32
    epochs: int = 20
    batch_size: int = 64
    lr0: float = 1e-3
    decay: float = 0.999
    decay_every: int = 10
    min_count: int = 5
    dropout: float = 0.0    # off unless asked for


@dataclass
class CaptionTrainHistory:
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    epoch_sizes: list[int] = field(default_factory=list)
    best_epoch: int = -1


@dataclass(frozen=True)
class TrainItem:
    """One image-sentence pair ready for the trainer."""
    feature: np.ndarray
    tokens: tuple[str, ...]
    sentence_id: str
    fluency_score: float | None = None


def _encode_item(item, vocab):
    ids = [vocab.boundary_id] + vocab.encode(item.tokens) + [vocab.boundary_id]
    return item.feature, np.asarray(ids, dtype=np.intp)


def train_captioner(train_items, val_items, strategy,
                    config: CaptionTrainConfig = CaptionTrainConfig(),
                    seed: int = 0,
                    vocab: Vocabulary | None = None):
    """SGD with the stepped learning-rate schedule; per-epoch batch
    construction is delegated to the guidance strategy; checkpoint by
    validation batch loss.

    Returns (model, vocab, history).
    """
    train_items = list(train_items)
    if not train_items:
        raise CaptionerError("empty training set")
    if vocab is None:
        vocab = build_vocab([it.tokens for it in train_items],
                            min_count=config.min_count)
    feat_dim = len(train_items[0].feature)
    model = CaptionModel(feat_dim, len(vocab), config.embed_dim,
                         config.hidden_dim, vocab.boundary_id, seed=seed)
    val_encoded = [_encode_item(it, vocab) for it in val_items] if val_items else None

    opt = Sgd(lr0=config.lr0, decay=config.decay, decay_every=config.decay_every)
    rng = np.random.default_rng(seed)
    history = CaptionTrainHistory()
    best_loss = np.inf
    best_params = None
    for epoch in range(config.epochs):
        selected, weights = strategy.epoch_items(train_items, epoch)
        if not selected:
            raise CaptionerError(
                f"strategy {strategy.kind} selected no sentences at epoch {epoch}")
        history.epoch_sizes.append(len(selected))
        order = rng.permutation(len(selected))
        epoch_losses = []
        for start in range(0, len(order), config.batch_size):
            take = order[start:start + config.batch_size]
            batch = [_encode_item(selected[i], vocab) for i in take]
            bweights = [weights[i] for i in take] if weights is not None else None
            emb_masks = out_masks = None
            if config.dropout > 0.0:
                masks = [model.make_masks(rng, len(ids), config.dropout)
                         for _, ids in batch]
                emb_masks = [m[0] for m in masks]
                out_masks = [m[1] for m in masks]
            loss, grads = model.loss_and_grads(batch, bweights, emb_masks, out_masks)
            opt.step(model.params, grads, epoch)
            epoch_losses.append(loss)
        history.train_losses.append(float(np.mean(epoch_losses)))
        if val_encoded:
            val_loss = batch_loss(model, val_encoded)
            history.val_losses.append(val_loss)
        else:
            val_loss = history.train_losses[-1]
        if val_loss < best_loss:
            best_loss = val_loss
            best_params = {k: v.copy() for k, v in model.params.items()}
            history.best_epoch = epoch
    if best_params is not None:
        model.params = best_params
    return model, vocab, history


# ---------------------------------------------------------------------------
# persistence and decode-output records
# ---------------------------------------------------------------------------

def save_captioner(out_dir, model: CaptionModel, vocab: Vocabulary) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_params(out / "model", model.params, meta={
        "feat_dim": model.feat_dim,
        "vocab_size": model.vocab_size,
        "embed_dim": model.embed_dim,
        "hidden_dim": model.hidden_dim,
        "boundary_id": model.boundary_id,
    })
    vocab.save(out / "vocab.txt")


def load_captioner(model_dir):
    model_dir = Path(model_dir)
    params, meta = load_params(model_dir / "model")
    vocab = Vocabulary.load(model_dir / "vocab.txt")
    model = CaptionModel(meta["feat_dim"], meta["vocab_size"], meta["embed_dim"],
                         meta["hidden_dim"], meta["boundary_id"])
    model.params = params
    return model, vocab


@dataclass(frozen=True)
class CandidateCaption:
    """One ranked decode for an image, as written by the caption subcommand."""
    image_id: str
    rank: int
    tokens: tuple[str, ...]
    logprob: float

    def to_json(self) -> str:
        return json.dumps({"image_id": self.image_id, "rank": self.rank,
                           "tokens": list(self.tokens), "logprob": self.logprob},
                          ensure_ascii=False)


def candidate_from_json(line: str, lineno: int = 0) -> CandidateCaption:
    try:
        raw = json.loads(line)
        return CandidateCaption(image_id=raw["image_id"], rank=int(raw["rank"]),
                                tokens=tuple(raw["tokens"]),
                                logprob=float(raw["logprob"]))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise CorpusError(f"line {lineno}: bad candidate record ({exc})") from exc


def load_candidates(path) -> list[CandidateCaption]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                out.append(candidate_from_json(line, lineno))
    return out


def save_candidates(path, candidates) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for cand in candidates:
            fh.write(cand.to_json() + "\n")
