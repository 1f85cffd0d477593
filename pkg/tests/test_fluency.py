"""Four-view fluency classifier: streams, scoring, ensemble, baselines."""

import numpy as np
import pytest

from conftest import make_labeled, make_pair, make_record
from crosscap.corpus import FLUENT, NOT_FLUENT, SOURCE
from crosscap.captioner import CandidateCaption
from crosscap.fluency import (
    FLUENT_CLASS,
    NOT_FLUENT_CLASS,
    SOURCE_POS,
    SOURCE_WORDS,
    TARGET_POS,
    TARGET_WORDS,
    VIEWS,
    FluencyError,
    FluencyView,
    TrainConfig,
    classify,
    evaluate_pr,
    length_baseline,
    load_view_set,
    random_baseline,
    rerank_scorer,
    save_view_set,
    score_ensemble,
    score_pairs,
    score_stream,
    score_view,
    train_view,
    view_stream,
)
from crosscap.nn import SequenceClassifier
from crosscap.text import build_vocab

SMALL = TrainConfig(embed_dim=8, hidden_dim=8, epochs=12, batch_size=16,
                    patience=6, dropout=0.0, lr=5e-3)


def _tiny_view(view, seed=0):
    vocab = build_vocab([["w", "q", "z"]], min_count=1)
    model = SequenceClassifier(len(vocab), 4, 4, seed=seed)
    return FluencyView(view=view, model=model, vocab=vocab)


def _marker_examples(n, seed=0):
    """Separable toy set: disfluent sentences carry a tell-tale token."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        color = ("red", "blue", "green")[int(rng.integers(3))]
        tokens = ("the", color, "dog", "runs")
        pos = ("DET", "ADJ", "NOUN", "VERB")
        if i % 2 == 0:
            label = FLUENT
        else:
            tokens = tokens[:2] + ("garble",) + tokens[2:]
            pos = pos[:2] + ("X",) + pos[2:]
            label = NOT_FLUENT
        out.append(make_labeled(f"s{i}", tokens, label, target_pos=pos,
                                source_tokens=("the", color, "dog"),
                                source_pos=("DET", "ADJ", "NOUN")))
    return out


class TestViewStream:
    def test_each_view_reads_its_stream(self):
        pair = make_pair("s0", ("A", "B"), source_tokens=("a", "b"),
                         target_pos=("X", "Y"), source_pos=("P", "Q"))
        assert view_stream(TARGET_WORDS, pair) == ("A", "B")
        assert view_stream(SOURCE_WORDS, pair) == ("a", "b")
        assert view_stream(TARGET_POS, pair) == ("X", "Y")
        assert view_stream(SOURCE_POS, pair) == ("P", "Q")

    def test_missing_pos_fails_loudly(self):
        pair = make_pair("s7", ("A",))
        with pytest.raises(FluencyError, match="s7"):
            view_stream(TARGET_POS, pair)

    def test_unknown_view_rejected(self):
        with pytest.raises(FluencyError, match="unknown view"):
            view_stream("chars", make_pair("s0", ("A",)))


class TestScoring:
    def test_score_is_a_distribution(self):
        fv = _tiny_view(TARGET_WORDS)
        score = score_stream(fv, ("w", "q"))
        assert score.fluent + score.not_fluent == pytest.approx(1.0, abs=1e-12)
        assert 0.0 < score.fluent < 1.0

    def test_class_indices(self):
        assert NOT_FLUENT_CLASS == 0
        assert FLUENT_CLASS == 1

    def test_equal_view_scores_mean_to_that_score(self):
        views = [_tiny_view(v, seed=0) for v in VIEWS]
        pair = make_pair("s0", ("w", "q"), source_tokens=("w", "q"),
                         target_pos=("w", "q"), source_pos=("w", "q"))
        per_view = [score_view(v, pair).fluent for v in views]
        assert len(set(per_view)) == 1
        assert score_ensemble(views, pair) == pytest.approx(per_view[0], abs=1e-12)

    def test_ensemble_is_arithmetic_mean(self):
        views = [_tiny_view(v, seed=i) for i, v in enumerate(VIEWS)]
        pair = make_pair("s0", ("w", "q"), source_tokens=("q", "w"),
                         target_pos=("z", "w"), source_pos=("w", "z"))
        per_view = [score_view(v, pair).fluent for v in views]
        assert score_ensemble(views, pair) == pytest.approx(np.mean(per_view))

    def test_ensemble_order_invariant(self):
        views = [_tiny_view(v, seed=i) for i, v in enumerate(VIEWS)]
        pair = make_pair("s0", ("w",), source_tokens=("q",),
                         target_pos=("z",), source_pos=("w",))
        assert score_ensemble(views, pair) == \
            pytest.approx(score_ensemble(list(reversed(views)), pair), abs=1e-15)

    def test_ensemble_requires_exactly_four_views(self):
        views = [_tiny_view(v) for v in VIEWS]
        pair = make_pair("s0", ("w",), source_tokens=("q",),
                         target_pos=("z",), source_pos=("w",))
        with pytest.raises(FluencyError, match="four views"):
            score_ensemble(views[:3], pair)
        with pytest.raises(FluencyError, match="four views"):
            score_ensemble(views[:3] + [_tiny_view(TARGET_WORDS)], pair)

    def test_score_pairs_threads_match_serial(self):
        views = [_tiny_view(v, seed=i) for i, v in enumerate(VIEWS)]
        pairs = [make_pair(f"s{i}", ("w", "q"), source_tokens=("q",),
                           target_pos=("z", "w"), source_pos=("w",))
                 for i in range(8)]
        serial = score_pairs(views, pairs, threads=1)
        threaded = score_pairs(views, pairs, threads=4)
        np.testing.assert_allclose(threaded, serial, atol=0)


class TestClassify:
    def test_table_scores(self):
        assert classify(0.803) == FLUENT
        assert classify(0.424) == NOT_FLUENT

    def test_threshold_is_strict(self):
        assert classify(0.5) == NOT_FLUENT
        assert classify(0.5 + 1e-9) == FLUENT

    def test_range_checked(self):
        with pytest.raises(FluencyError, match="outside"):
            classify(1.2)


class TestTraining:
    def test_learns_separable_data(self):
        examples = _marker_examples(80)
        fview, history = train_view(TARGET_WORDS, examples[:60], examples[60:],
                                    SMALL, seed=0)
        correct = 0
        for ex in examples[60:]:
            f = score_view(fview, ex.pair).fluent
            predicted = classify(f)
            correct += predicted == ex.label
        assert correct / 20 >= 0.95
        assert history.best_epoch >= 0
        assert len(history.val_losses) == len(history.train_losses)

    def test_same_seed_reproduces_parameters(self):
        examples = _marker_examples(40)
        cfg = TrainConfig(embed_dim=6, hidden_dim=6, epochs=3, batch_size=16,
                          dropout=0.5, lr=1e-3)
        a, _ = train_view(TARGET_WORDS, examples[:30], examples[30:], cfg, seed=5)
        b, _ = train_view(TARGET_WORDS, examples[:30], examples[30:], cfg, seed=5)
        for k in a.model.params:
            np.testing.assert_array_equal(a.model.params[k], b.model.params[k])

    def test_single_class_training_refused(self):
        fluent_only = [ex for ex in _marker_examples(10) if ex.is_fluent]
        with pytest.raises(FluencyError, match="both classes"):
            train_view(TARGET_WORDS, fluent_only, None, SMALL)

    def test_empty_training_refused(self):
        with pytest.raises(FluencyError, match="empty"):
            train_view(TARGET_WORDS, [], None, SMALL)

    def test_early_stop_respects_epoch_budget(self):
        examples = _marker_examples(30)
        _, history = train_view(TARGET_POS, examples[:20], examples[20:],
                                SMALL, seed=1)
        assert 1 <= len(history.train_losses) <= SMALL.epochs


class TestPersistence:
    def test_view_set_round_trip_preserves_scores(self, tmp_path):
        examples = _marker_examples(30)
        views = [train_view(v, examples[:24], examples[24:],
                            TrainConfig(embed_dim=6, hidden_dim=6, epochs=2,
                                        batch_size=16, dropout=0.0, lr=1e-3),
                            seed=i)[0]
                 for i, v in enumerate(VIEWS)]
        save_view_set(tmp_path, views)
        loaded = load_view_set(tmp_path)
        pair = examples[0].pair
        before = score_ensemble(views, pair)
        after = score_ensemble(loaded, pair)
        assert after == before  # bit-exact parameter persistence


class TestRerankScorer:
    def _views(self):
        return [_tiny_view(v, seed=i) for i, v in enumerate(VIEWS)]

    def _cand(self, tokens, image_id="img0"):
        return CandidateCaption(image_id=image_id, rank=1,
                                tokens=tuple(tokens), logprob=-1.0)

    def test_all_streams_available_is_not_degraded(self):
        source = make_record("s0", ("w", "q"), SOURCE, pos=("P", "Q"))
        scorer = rerank_scorer(
            self._views(),
            pos_tagger=lambda toks: tuple("z" for _ in toks),
            source_lookup=lambda image_id: source,
        )
        f, degraded = scorer(self._cand(("w", "q")))
        assert 0.0 < f < 1.0
        assert degraded is False

    def test_target_words_only_is_degraded(self):
        scorer = rerank_scorer(self._views())
        f, degraded = scorer(self._cand(("w",)))
        assert degraded is True
        direct = score_stream(self._views()[0], ("w",)).fluent
        assert f == pytest.approx(direct, abs=1e-12)

    def test_empty_candidate_scores_zero_degraded(self):
        scorer = rerank_scorer(self._views())
        assert scorer(self._cand(())) == (0.0, True)

    def test_requires_target_words_view(self):
        others = [_tiny_view(v) for v in VIEWS if v != TARGET_WORDS]
        with pytest.raises(FluencyError, match="target_words"):
            rerank_scorer(others)


class TestEvaluatePr:
    def test_hand_counted_mixed_case(self):
        preds = [FLUENT, FLUENT, NOT_FLUENT]
        labels = [FLUENT, NOT_FLUENT, FLUENT]
        pr = evaluate_pr(preds, labels)
        assert pr.precision == pytest.approx(50.0)
        assert pr.recall == pytest.approx(50.0)
        assert (pr.tp, pr.fp, pr.fn) == (1, 1, 1)
        assert pr.precision_defined

    def test_all_positive_split(self):
        labels = [FLUENT] * 294 + [NOT_FLUENT] * 706
        pr = evaluate_pr([FLUENT] * 1000, labels)
        assert pr.precision == pytest.approx(29.4)
        assert pr.recall == pytest.approx(100.0)

    def test_no_predicted_positives_flags_precision(self):
        pr = evaluate_pr([NOT_FLUENT, NOT_FLUENT], [FLUENT, NOT_FLUENT])
        assert pr.precision == 0.0
        assert not pr.precision_defined
        assert pr.recall == 0.0

    def test_length_mismatch_rejected(self):
        with pytest.raises(FluencyError, match="predictions"):
            evaluate_pr([FLUENT], [FLUENT, FLUENT])

    def test_empty_rejected(self):
        with pytest.raises(FluencyError, match="nothing"):
            evaluate_pr([], [])


class TestBaselines:
    def test_length_threshold_is_mean_of_fluent_lengths(self):
        # fluent training lengths 4 and 6 -> threshold 5, strictly-below rule
        preds = length_baseline(
            [("a",) * 4, ("a",) * 5, ("a",) * 6], fluent_training_lengths=[4, 6])
        assert preds == [FLUENT, NOT_FLUENT, NOT_FLUENT]

    def test_length_baseline_needs_training_lengths(self):
        with pytest.raises(FluencyError, match="baseline"):
            length_baseline([("a",)], [])

    def test_random_baseline_deterministic_per_seed(self):
        assert random_baseline(20, seed=3) == random_baseline(20, seed=3)
        assert set(random_baseline(200, seed=0)) == {FLUENT, NOT_FLUENT}
