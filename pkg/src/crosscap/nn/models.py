"""The two recurrent model families.

Both share the same skeleton: an embedding (or feature projection), a
single LSTM layer running through :mod:`crosscap.nn.kernels`, and an
affine softmax head.  Gradients are explicit backpropagation through
time; there is no general autodiff here because none is needed.

Parameters live in an ordered ``dict[str, np.ndarray]`` so the optimizers
and the gradient checker can treat both families uniformly.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .functional import (
    PROB_FLOOR,
    cross_entropy,
    dropout_mask,
    softmax,
    softmax_xent_grad,
    uniform_init,
)


class DimensionError(ValueError):
    pass


def _require_ids_in_range(ids, size):
    ids = np.asarray(ids, dtype=np.intp)
    if ids.ndim != 1 or ids.shape[0] == 0:
        raise DimensionError("empty id sequence")
    if np.any(ids < 0) or np.any(ids >= size):
        raise DimensionError(f"token id outside vocabulary of size {size}")
    return ids


def lstm_step(x, c_prev, h_prev, wx, wh, b):
    """Run one LSTM step; a thin convenience wrapper over the kernel."""
    x = np.asarray(x, dtype=np.float64)
    c_prev = np.asarray(c_prev, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    H = wh.shape[0]
    if x.shape[0] != wx.shape[0] or c_prev.shape[0] != H or h_prev.shape[0] != H:
        raise DimensionError(
            f"lstm_step shapes: x{x.shape} c{c_prev.shape} h{h_prev.shape} "
            f"vs wx{wx.shape} wh{wh.shape}"
        )
    _, cs, hs = kernels.lstm_forward(x[None, :], wx, wh, b, c_prev, h_prev)
    return cs[0], hs[0]


class SequenceClassifier:
    """Token ids -> embedding -> LSTM -> affine softmax over n_classes.

    Only the final hidden state feeds the classification loss; the
    per-step probabilities exist for inspection.
    """

    def __init__(self, vocab_size, embed_dim, hidden_dim, n_classes=2, seed=0):
        self.vocab_size = vocab_size
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.n_classes = n_classes
        rng = np.random.default_rng(seed)
        self.params = {
            "w_embed": uniform_init(rng, vocab_size, embed_dim),
            "lstm_wx": uniform_init(rng, embed_dim, 4 * hidden_dim),
            "lstm_wh": uniform_init(rng, hidden_dim, 4 * hidden_dim),
            "lstm_b": np.zeros(4 * hidden_dim),
            "w_out": uniform_init(rng, hidden_dim, n_classes),
            "b_out": np.zeros(n_classes),
        }

    def zero_grads(self):
        return {k: np.zeros_like(v) for k, v in self.params.items()}

    def forward(self, ids, emb_mask=None, out_mask=None):
        """Return (per-step class probabilities (T, C), final hidden state)."""
        probs, hs, _ = self._forward_full(ids, emb_mask, out_mask)
        return probs, hs[-1]

    def _forward_full(self, ids, emb_mask=None, out_mask=None):
        p = self.params
        ids = _require_ids_in_range(ids, self.vocab_size)
        xs = p["w_embed"][ids]
        if emb_mask is not None:
            xs = xs * emb_mask
        H = self.hidden_dim
        gates, cs, hs = kernels.lstm_forward(
            xs, p["lstm_wx"], p["lstm_wh"], p["lstm_b"], np.zeros(H), np.zeros(H)
        )
        head_in = hs if out_mask is None else hs * out_mask
        probs = softmax(head_in @ p["w_out"] + p["b_out"])
        cache = (ids, xs, gates, cs, hs, head_in, probs, emb_mask, out_mask)
        return probs, hs, cache

    def loss(self, ids, label, emb_mask=None, out_mask=None):
        probs, _, _ = self._forward_full(ids, emb_mask, out_mask)
        return cross_entropy(probs[-1:], [label])

    def loss_and_grads(self, batch, emb_masks=None, out_masks=None, grads=None):
        """Mean cross-entropy over ``batch`` of (ids, label); grads accumulated.

        Masks, when given, are per-example dropout masks for the embedding
        output (T, E) and the head input (T, H).
        """
        if not batch:
            raise ValueError("empty batch")
        if grads is None:
            grads = self.zero_grads()
        p = self.params
        H = self.hidden_dim
        m = len(batch)
        total = 0.0
        for idx, (ids, label) in enumerate(batch):
            emb_mask = emb_masks[idx] if emb_masks is not None else None
            out_mask = out_masks[idx] if out_masks is not None else None
            probs, hs, cache = self._forward_full(ids, emb_mask, out_mask)
            ids_arr, xs, gates, cs, hs, head_in, probs, emb_mask, out_mask = cache
            total += cross_entropy(probs[-1:], [label])

            scale = 1.0 / m
            dlogits = softmax_xent_grad(probs[-1:], [label])[0] * scale
            grads["w_out"] += np.outer(head_in[-1], dlogits)
            grads["b_out"] += dlogits
            dhead = p["w_out"] @ dlogits
            dhs = np.zeros_like(hs)
            dhs[-1] = dhead if out_mask is None else dhead * out_mask[-1]
            dxs, dwx, dwh, db, _, _ = kernels.lstm_backward(
                xs, p["lstm_wx"], p["lstm_wh"], gates, cs, hs,
                np.zeros(H), np.zeros(H), dhs,
            )
            grads["lstm_wx"] += dwx
            grads["lstm_wh"] += dwh
            grads["lstm_b"] += db
            if emb_mask is not None:
                dxs = dxs * emb_mask
            np.add.at(grads["w_embed"], ids_arr, dxs)
        return total / m, grads

    def make_masks(self, rng, seq_len, rate):
        """Fresh per-example dropout masks for one training sequence."""
        return (
            dropout_mask(rng, (seq_len, self.embed_dim), rate),
            dropout_mask(rng, (seq_len, self.hidden_dim), rate),
        )


class CaptionModel:
    """Image-conditioned caption generator.

    The projected image feature is fed first to initialize the memory,
    then the boundary-bracketed word sequence; training scores positions
    1..n+1 (the image step's own prediction is unscored).
    """

    def __init__(self, feat_dim, vocab_size, embed_dim, hidden_dim, boundary_id,
                 seed=0):
        self.feat_dim = feat_dim
        self.vocab_size = vocab_size
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.boundary_id = boundary_id
        rng = np.random.default_rng(seed)
        self.params = {
            "w_img": uniform_init(rng, feat_dim, embed_dim),
            "w_embed": uniform_init(rng, vocab_size, embed_dim),
            "lstm_wx": uniform_init(rng, embed_dim, 4 * hidden_dim),
            "lstm_wh": uniform_init(rng, hidden_dim, 4 * hidden_dim),
            "lstm_b": np.zeros(4 * hidden_dim),
            "w_out": uniform_init(rng, hidden_dim, vocab_size),
            "b_out": np.zeros(vocab_size),
        }

    def zero_grads(self):
        return {k: np.zeros_like(v) for k, v in self.params.items()}

    def _inputs(self, feature, ids, emb_mask=None):
        """Stack the image step and the word embeddings for ids[:-1]."""
        p = self.params
        feature = np.asarray(feature, dtype=np.float64)
        if feature.shape != (self.feat_dim,):
            raise DimensionError(
                f"feature shape {feature.shape}, expected ({self.feat_dim},)"
            )
        xs = np.empty((len(ids), self.embed_dim))
        xs[0] = feature @ p["w_img"]
        embeds = p["w_embed"][ids[:-1]]
        if emb_mask is not None:
            embeds = embeds * emb_mask
        xs[1:] = embeds
        return xs

    def _forward_full(self, feature, ids, emb_mask=None, out_mask=None):
        p = self.params
        ids = _require_ids_in_range(ids, self.vocab_size)
        if len(ids) < 2 or ids[0] != self.boundary_id or ids[-1] != self.boundary_id:
            raise DimensionError("sequence must be bracketed by the boundary token")
        xs = self._inputs(feature, ids, emb_mask)
        H = self.hidden_dim
        gates, cs, hs = kernels.lstm_forward(
            xs, p["lstm_wx"], p["lstm_wh"], p["lstm_b"], np.zeros(H), np.zeros(H)
        )
        # scored hidden states: positions 1..n+1 predict ids[1..n+1]
        head_in = hs[1:] if out_mask is None else hs[1:] * out_mask
        probs = softmax(head_in @ p["w_out"] + p["b_out"])
        cache = (ids, feature, xs, gates, cs, hs, head_in, probs, emb_mask, out_mask)
        return probs, cache

    def logprob(self, feature, ids):
        """Sum of per-step log probabilities of the bracketed sequence."""
        probs, cache = self._forward_full(feature, ids)
        ids = cache[0]
        return -cross_entropy(probs, ids[1:])

    def loss_and_grads(self, batch, weights=None, emb_masks=None, out_masks=None,
                       grads=None):
        """(1/m) sum of w_i * nll_i over (feature, ids) pairs, with grads."""
        if not batch:
            raise ValueError("empty batch")
        m = len(batch)
        if weights is None:
            weights = [1.0] * m
        if len(weights) != m:
            raise ValueError(f"{len(weights)} weights for batch of {m}")
        if grads is None:
            grads = self.zero_grads()
        p = self.params
        H = self.hidden_dim
        total = 0.0
        for idx, (feature, ids) in enumerate(batch):
            emb_mask = emb_masks[idx] if emb_masks is not None else None
            out_mask = out_masks[idx] if out_masks is not None else None
            probs, cache = self._forward_full(feature, ids, emb_mask, out_mask)
            ids_arr, feature, xs, gates, cs, hs, head_in, probs, emb_mask, out_mask = cache
            targets = ids_arr[1:]
            nll = cross_entropy(probs, targets)
            w = float(weights[idx])
            total += w * nll

            scale = w / m
            dlogits = softmax_xent_grad(probs, targets) * scale
            grads["w_out"] += head_in.T @ dlogits
            grads["b_out"] += dlogits.sum(axis=0)
            dhead = dlogits @ p["w_out"].T
            if out_mask is not None:
                dhead = dhead * out_mask
            dhs = np.zeros_like(hs)
            dhs[1:] = dhead
            dxs, dwx, dwh, db, _, _ = kernels.lstm_backward(
                xs, p["lstm_wx"], p["lstm_wh"], gates, cs, hs,
                np.zeros(H), np.zeros(H), dhs,
            )
            grads["lstm_wx"] += dwx
            grads["lstm_wh"] += dwh
            grads["lstm_b"] += db
            grads["w_img"] += np.outer(feature, dxs[0])
            dembeds = dxs[1:]
            if emb_mask is not None:
                dembeds = dembeds * emb_mask
            np.add.at(grads["w_embed"], ids_arr[:-1], dembeds)
        return total / m, grads

    def make_masks(self, rng, seq_len, rate):
        """Masks for one bracketed sequence: words ids[:-1], scored steps."""
        return (
            dropout_mask(rng, (seq_len - 1, self.embed_dim), rate),
            dropout_mask(rng, (seq_len - 1, self.hidden_dim), rate),
        )

    # -- decoding interface (shared with toy models in tests) ---------------

    def begin(self, feature):
        """Feed image then the opening boundary; return (state, next-word probs)."""
        p = self.params
        feature = np.asarray(feature, dtype=np.float64)
        x_img = feature @ p["w_img"]
        H = self.hidden_dim
        c, h = lstm_step(x_img, np.zeros(H), np.zeros(H),
                         p["lstm_wx"], p["lstm_wh"], p["lstm_b"])
        return self.step((c, h), self.boundary_id)

    def step(self, state, token_id):
        """Feed one token; return ((c, h), probability row over the vocabulary)."""
        p = self.params
        c, h = state
        x = p["w_embed"][token_id]
        c, h = lstm_step(x, c, h, p["lstm_wx"], p["lstm_wh"], p["lstm_b"])
        probs = softmax(h @ p["w_out"] + p["b_out"])
        return (c, h), probs

    @property
    def end_id(self):
        return self.boundary_id


def probs_floor_log(prob_row):
    """log p with the shared probability floor (used by decoders)."""
    return np.log(np.maximum(prob_row, PROB_FLOOR))
