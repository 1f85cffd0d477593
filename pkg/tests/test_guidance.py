"""Training-data strategies: filtering, rejection sampling, loss weights."""

import numpy as np
import pytest

from conftest import make_record
from crosscap.captioner import CandidateCaption, batch_loss
from crosscap.guidance import (
    FLUENCY_ONLY,
    REJECTION_SAMPLING,
    STRATEGIES,
    WEIGHTED_LOSS,
    WITHOUT_FLUENCY,
    GuidanceError,
    Strategy,
    filter_fluent,
    mu_weight,
    rejection_sample_epoch,
    rerank_by_fluency,
    weighted_batch_loss,
)
from crosscap.nn import CaptionModel


def _scored(scores):
    return [make_record(f"s{i}", ("w",), score=f) for i, f in enumerate(scores)]


class TestFilterFluent:
    def test_threshold_is_strict(self):
        records = _scored([0.2, 0.5, 0.5001, 0.9])
        kept = filter_fluent(records)
        assert [r.sentence_id for r in kept] == ["s2", "s3"]

    def test_idempotent(self):
        records = _scored([0.3, 0.8, 0.6])
        once = filter_fluent(records)
        assert filter_fluent(once) == once

    def test_missing_score_names_sentence(self):
        with pytest.raises(GuidanceError, match="s0"):
            filter_fluent([make_record("s0", ("w",))])


class TestRejectionSampling:
    def test_high_scores_always_kept(self):
        records = _scored([0.51, 0.8, 1.0])
        for epoch in range(30):
            assert rejection_sample_epoch(records, seed=1, epoch=epoch) == records

    def test_zero_scores_never_kept(self):
        records = _scored([0.0, 0.0])
        for epoch in range(30):
            assert rejection_sample_epoch(records, seed=1, epoch=epoch) == []

    def test_same_seed_and_epoch_reproduce(self):
        records = _scored([0.1, 0.3, 0.45, 0.7, 0.2])
        a = rejection_sample_epoch(records, seed=9, epoch=4)
        b = rejection_sample_epoch(records, seed=9, epoch=4)
        assert a == b

    def test_samples_vary_across_epochs(self):
        records = _scored([0.25] * 40)
        kept = {epoch: len(rejection_sample_epoch(records, seed=0, epoch=epoch))
                for epoch in range(8)}
        assert len(set(kept.values())) > 1  # a frozen sample would be constant

    def test_inclusion_rate_close_to_twice_score(self):
        # quick version of the acceptance law: keep-prob for f <= 0.5 is
        # P(f > U(0, 0.5)) = 2f
        records = _scored([0.2])
        hits = sum(
            len(rejection_sample_epoch(records, seed=3, epoch=e))
            for e in range(2000)
        )
        assert hits / 2000 == pytest.approx(0.4, abs=0.03)


class TestMuWeight:
    def test_piecewise_rule(self):
        assert mu_weight(0.9) == 1.0
        assert mu_weight(0.51) == 1.0
        assert mu_weight(0.3) == 0.3
        assert mu_weight(0.0) == 0.0

    def test_threshold_value_keeps_its_score(self):
        assert mu_weight(0.5) == 0.5

    def test_range_validated(self):
        with pytest.raises(GuidanceError, match="outside"):
            mu_weight(-0.1)
        with pytest.raises(GuidanceError, match="outside"):
            mu_weight(1.01)


class TestWeightedBatchLoss:
    def _setup(self):
        model = CaptionModel(feat_dim=2, vocab_size=5, embed_dim=4,
                             hidden_dim=4, boundary_id=0, seed=1)
        batch = [(np.ones(2), np.array([0, 2, 3, 0])),
                 (np.array([0.5, 0.5]), np.array([0, 4, 0]))]
        return model, batch

    def test_all_fluent_bitwise_equals_unweighted(self):
        model, batch = self._setup()
        weighted = weighted_batch_loss(model, batch, scores=[0.7, 0.99])
        assert weighted == batch_loss(model, batch)  # bitwise, no tolerance

    def test_low_score_scales_single_item_loss(self):
        model, batch = self._setup()
        single = batch[:1]
        weighted = weighted_batch_loss(model, single, scores=[0.3])
        assert weighted == pytest.approx(0.3 * batch_loss(model, single),
                                         abs=1e-12)

    def test_score_count_checked(self):
        model, batch = self._setup()
        with pytest.raises(GuidanceError, match="scores"):
            weighted_batch_loss(model, batch, scores=[0.5])


class TestStrategy:
    def test_known_kinds_only(self):
        for kind in STRATEGIES:
            Strategy(kind)
        with pytest.raises(GuidanceError, match="unknown strategy"):
            Strategy("magic")

    def test_requires_scores_flag(self):
        assert not Strategy(WITHOUT_FLUENCY).requires_scores
        for kind in (FLUENCY_ONLY, REJECTION_SAMPLING, WEIGHTED_LOSS):
            assert Strategy(kind).requires_scores

    def test_control_passes_everything_through(self):
        records = _scored([0.1, 0.9])
        selected, weights = Strategy(WITHOUT_FLUENCY).epoch_items(records, 0)
        assert selected == records
        assert weights is None

    def test_fluency_only_filters(self):
        records = _scored([0.1, 0.9, 0.6])
        selected, weights = Strategy(FLUENCY_ONLY).epoch_items(records, 0)
        assert [r.sentence_id for r in selected] == ["s1", "s2"]
        assert weights is None

    def test_fluency_only_with_nothing_fluent_errors(self):
        with pytest.raises(GuidanceError, match="no sentences"):
            Strategy(FLUENCY_ONLY).epoch_items(_scored([0.2, 0.5]), 0)

    def test_rejection_strategy_matches_function(self):
        records = _scored([0.3, 0.8, 0.1, 0.45])
        strat = Strategy(REJECTION_SAMPLING, seed=7)
        selected, weights = strat.epoch_items(records, epoch=3)
        assert selected == rejection_sample_epoch(records, seed=7, epoch=3)
        assert weights is None

    def test_weighted_strategy_emits_mu_weights(self):
        records = _scored([0.3, 0.8])
        selected, weights = Strategy(WEIGHTED_LOSS).epoch_items(records, 0)
        assert selected == records
        assert weights == [0.3, 1.0]


class TestRerank:
    def _cands(self):
        return [CandidateCaption("img0", r, ("w",) * r, -float(r))
                for r in (1, 2, 3)]

    def test_sorts_by_fluency_descending(self):
        scores = {1: 0.2, 2: 0.9, 3: 0.9}
        ranked = rerank_by_fluency(
            self._cands(), lambda c: (scores[c.rank], False))
        assert [r.candidate.rank for r in ranked] == [2, 3, 1]

    def test_ties_keep_original_order(self):
        ranked = rerank_by_fluency(self._cands(), lambda c: (0.5, False))
        assert [r.candidate.rank for r in ranked] == [1, 2, 3]

    def test_single_candidate(self):
        ranked = rerank_by_fluency(self._cands()[:1], lambda c: (0.4, True))
        assert len(ranked) == 1
        assert ranked[0].fluency == 0.4
        assert ranked[0].degraded

    def test_empty_list_rejected(self):
        with pytest.raises(GuidanceError, match="no candidates"):
            rerank_by_fluency([], lambda c: (0.5, False))

    def test_score_range_validated(self):
        with pytest.raises(GuidanceError, match="outside"):
            rerank_by_fluency(self._cands(), lambda c: (1.5, False))
