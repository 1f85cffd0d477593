"""Command-line pipeline driver.

One subcommand per pipeline stage: synth, train-classifier, score,
train-captioner, caption, rerank, evaluate, gradcheck, serve.  Flags win
over a key=value config file (--config), which wins over built-in
defaults; relative paths resolve against $CROSSCAP_DATA_ROOT when set.
Every artifact directory gets a manifest.json recording the resolved
configuration, enough for an exact rerun.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, captioner, corpus, fluency, guidance, metrics, synthgen
from .corpus import FLUENT, NOT_FLUENT
from .nn import CaptionModel, SequenceClassifier, grad_check, kernels


class CliError(ValueError):
    pass


class _Required:
    def __repr__(self):
        return "<required>"


REQUIRED = _Required()


def _parse_config_file(path: Path) -> dict[str, str]:
    values = {}
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _cast_like(raw: str, default):
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise CliError(f"cannot read {raw!r} as a boolean")
    if isinstance(default, int) and default is not REQUIRED:
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    if isinstance(default, tuple):
        return tuple(p.strip() for p in raw.split(",") if p.strip())
    return raw


class Settings:
    """Flag > config-file entry > built-in default, per subcommand."""

    def __init__(self, args: argparse.Namespace, defaults: dict):
        self.args = args
        self.defaults = defaults
        config_path = getattr(args, "config", None)
        self.config = _parse_config_file(Path(config_path)) if config_path else {}
        self.root = Path(os.environ.get("CROSSCAP_DATA_ROOT", "."))

    def get(self, key):
        value = getattr(self.args, key, None)
        if value is None and key in self.config:
            default = self.defaults[key]
            template = default if default is not REQUIRED else ""
            value = _cast_like(self.config[key], template)
        if value is None:
            value = self.defaults[key]
        if value is REQUIRED:
            raise CliError(f"missing required flag --{key.replace('_', '-')}")
        return value

    def path(self, key) -> Path | None:
        value = self.get(key)
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else self.root / p

    def resolved(self) -> dict:
        out = {}
        for key in self.defaults:
            value = self.get(key)
            out[key] = str(value) if isinstance(value, Path) else value
        return out


def _manifest_payload(command: str, settings: Settings, extra=None) -> dict:
    payload = {
        "command": command,
        "version": __version__,
        "backend": kernels.BACKEND,
        "config": settings.resolved(),
    }
    if extra:
        payload.update(extra)
    return payload


def write_manifest(out_dir, command: str, settings: Settings, extra=None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(
        json.dumps(_manifest_payload(command, settings, extra),
                   indent=2, default=str) + "\n")


def write_sidecar_manifest(out_file, command: str, settings: Settings, extra=None):
    """Config record for commands whose artifact is a single file."""
    side = Path(str(out_file) + ".manifest.json")
    side.write_text(json.dumps(_manifest_payload(command, settings, extra),
                               indent=2, default=str) + "\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

SYNTH_DEFAULTS = {
    "out": REQUIRED, "images": 100, "captions_per_image": 1, "rho": 0.0,
    "seed": 0, "feat_dim": 8, "split_seed": 0,
    "colors": ("red", "blue", "green"), "objects": ("dog", "cat", "bird"),
    "actions": ("runs", "sleeps"),
}


def cmd_synth(s: Settings) -> int:
    cfg = synthgen.SynthConfig(
        n_images=s.get("images"),
        captions_per_image=s.get("captions_per_image"),
        colors=tuple(s.get("colors")), objects=tuple(s.get("objects")),
        actions=tuple(s.get("actions")), feat_dim=s.get("feat_dim"),
        corrupt_prob=s.get("rho"), seed=s.get("seed"))
    out = s.path("out")
    generated = synthgen.generate(cfg)
    gen_manifest = synthgen.write_corpus(generated, out, cfg,
                                         split_seed=s.get("split_seed"))
    write_manifest(out, "synth", s, extra={"generator": gen_manifest})
    n = len(generated.target)
    bad = sum(1 for v in generated.labels.values() if v == corpus.NOT_FLUENT)
    print(f"wrote {cfg.n_images} images / {n} sentences to {out} "
          f"({bad / n:.1%} not fluent)")
    return 0


CLASSIFIER_DEFAULTS = {
    "train_target": REQUIRED, "train_source": REQUIRED,
    "val_target": REQUIRED, "val_source": REQUIRED, "out": REQUIRED,
    "embed_dim": 32, "hidden_dim": 32, "epochs": 30, "batch_size": 64,
    "patience": 5, "dropout": 0.5, "lr": 1e-4, "min_count": 1,
    "seed": 0, "threads": 1,
}


def _labeled_examples(target_path, source_path):
    targets = corpus.load_captions(target_path)
    sources = corpus.load_captions(source_path)
    pairs = corpus.pair_records(sources, targets)
    examples = []
    for pair in pairs:
        score = pair.target.fluency_score
        if score is None:
            raise CliError(
                f"sentence {pair.sentence_id} has no fluency field; "
                f"expected 0/1 labels in {target_path}")
        examples.append(corpus.FluencyExample(
            pair=pair, label=FLUENT if score > 0.5 else NOT_FLUENT))
    return examples


def cmd_train_classifier(s: Settings) -> int:
    train_examples = _labeled_examples(s.path("train_target"), s.path("train_source"))
    val_examples = _labeled_examples(s.path("val_target"), s.path("val_source"))
    config = fluency.TrainConfig(
        embed_dim=s.get("embed_dim"), hidden_dim=s.get("hidden_dim"),
        epochs=s.get("epochs"), batch_size=s.get("batch_size"),
        patience=s.get("patience"), dropout=s.get("dropout"),
        lr=s.get("lr"), min_count=s.get("min_count"))
    seed = s.get("seed")

    def train_one(view_index):
        view = fluency.VIEWS[view_index]
        return fluency.train_view(view, train_examples, val_examples,
                                  config, seed=seed + view_index)

    threads = s.get("threads")
    started = time.monotonic()
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trained = list(pool.map(train_one, range(len(fluency.VIEWS))))
    else:
        trained = [train_one(i) for i in range(len(fluency.VIEWS))]
    views = [t[0] for t in trained]

    out = s.path("out")
    fluency.save_view_set(out, views)
    scores = fluency.score_pairs(views, [ex.pair for ex in val_examples])
    correct = sum(1 for ex, f in zip(val_examples, scores)
                  if fluency.classify(f) == ex.label)
    accuracy = correct / len(val_examples)
    summary = {}
    for (view, history) in trained:
        best = history.best_epoch
        summary[view.view] = {
            "epochs_run": len(history.train_losses),
            "best_epoch": best,
            "val_loss": history.val_losses[best] if history.val_losses else None,
        }
        print(f"{view.view}: best epoch {best}, "
              f"val loss {summary[view.view]['val_loss']:.4f}")
    print(f"ensemble val accuracy {accuracy:.3f} "
          f"({time.monotonic() - started:.1f}s)")
    write_manifest(out, "train-classifier", s,
                   extra={"views": summary, "val_accuracy": accuracy})
    return 0


SCORE_DEFAULTS = {
    "target": REQUIRED, "source": REQUIRED, "classifier": REQUIRED,
    "out": REQUIRED, "threads": 1,
}


def cmd_score(s: Settings) -> int:
    targets = corpus.load_captions(s.path("target"))
    sources = corpus.load_captions(s.path("source"))
    pairs = corpus.pair_records(sources, targets)
    views = fluency.load_view_set(s.path("classifier"))
    scores = fluency.score_pairs(views, pairs, threads=s.get("threads"))
    corpus.save_captions(
        [t.with_score(f) for t, f in zip(targets, scores)], s.path("out"))
    write_sidecar_manifest(s.path("out"), "score", s)
    n_fluent = sum(1 for f in scores if f > 0.5)
    print(f"scored {len(scores)} sentences -> {s.path('out')} "
          f"(mean {np.mean(scores):.3f}, {n_fluent} fluent)")
    return 0


TRAIN_CAPTIONER_DEFAULTS = {
    "train": REQUIRED, "val": REQUIRED, "features": REQUIRED, "out": REQUIRED,
    "strategy": "without-fluency", "embed_dim": 32, "hidden_dim": 32,
    "epochs": 20, "batch_size": 64, "lr0": 1e-3, "decay": 0.999,
    "decay_every": 10, "min_count": 5, "dropout": 0.0, "seed": 0,
}


def _train_items(records, features, path):
    items = []
    for rec in records:
        feat = features.get(rec.image_id)
        if feat is None:
            raise CliError(f"no feature vector for image {rec.image_id} "
                           f"(captions from {path})")
        items.append(captioner.TrainItem(
            feature=feat.vector, tokens=rec.tokens,
            sentence_id=rec.sentence_id, fluency_score=rec.fluency_score))
    return items


def cmd_train_captioner(s: Settings) -> int:
    features = corpus.load_features(s.path("features"))
    train_items = _train_items(corpus.load_captions(s.path("train")),
                               features, s.path("train"))
    val_items = _train_items(corpus.load_captions(s.path("val")),
                             features, s.path("val"))
    kind = s.get("strategy").replace("-", "_")
    strategy = guidance.Strategy(kind=kind, seed=s.get("seed"))
    if strategy.requires_scores:
        missing = [it.sentence_id for it in train_items
                   if it.fluency_score is None]
        if missing:
            raise CliError(
                f"strategy {s.get('strategy')} needs fluency scores, but "
                f"{len(missing)} sentences lack the fluency field "
                f"(first: {missing[0]}); run the score subcommand first")
    config = captioner.CaptionTrainConfig(
        embed_dim=s.get("embed_dim"), hidden_dim=s.get("hidden_dim"),
        epochs=s.get("epochs"), batch_size=s.get("batch_size"),
        lr0=s.get("lr0"), decay=s.get("decay"),
        decay_every=s.get("decay_every"), min_count=s.get("min_count"),
        dropout=s.get("dropout"))
    started = time.monotonic()
    model, vocab, history = captioner.train_captioner(
        train_items, val_items, strategy, config, seed=s.get("seed"))
    out = s.path("out")
    captioner.save_captioner(out, model, vocab)
    write_manifest(out, "train-captioner", s, extra={
        "vocab_size": len(vocab),
        "train_sentences": len(train_items),
        "epoch_sizes": history.epoch_sizes,
        "train_losses": history.train_losses,
        "val_losses": history.val_losses,
        "best_epoch": history.best_epoch,
    })
    print(f"{strategy.kind}: {len(history.train_losses)} epochs, "
          f"val loss {min(history.val_losses):.4f} at epoch "
          f"{history.best_epoch} ({time.monotonic() - started:.1f}s)")
    return 0


CAPTION_DEFAULTS = {
    "features": REQUIRED, "model": REQUIRED, "out": REQUIRED,
    "beam": 5, "max_len": 30, "topk": 1,
}


def cmd_caption(s: Settings) -> int:
    model, vocab = captioner.load_captioner(s.path("model"))
    features = corpus.load_features(s.path("features"))
    rows = []
    for image_id, feat in features.items():
        hyps = captioner.beam_search(model, feat.vector,
                                     beam_size=s.get("beam"),
                                     max_len=s.get("max_len"))
        for rank, hyp in enumerate(hyps[:s.get("topk")], start=1):
            rows.append(captioner.CandidateCaption(
                image_id=image_id, rank=rank,
                tokens=captioner.hypothesis_words(hyp, model, vocab),
                logprob=hyp.logprob))
    captioner.save_candidates(s.path("out"), rows)
    write_sidecar_manifest(s.path("out"), "caption", s)
    print(f"decoded {len(features)} images -> {s.path('out')} "
          f"({len(rows)} captions)")
    return 0


RERANK_DEFAULTS = {
    "candidates": REQUIRED, "classifier": REQUIRED, "out": REQUIRED,
    "source": None, "toy_pos": True,
}


def cmd_rerank(s: Settings) -> int:
    candidates = captioner.load_candidates(s.path("candidates"))
    views = fluency.load_view_set(s.path("classifier"))
    pos_tagger = synthgen.toy_pos_tags if s.get("toy_pos") else None
    source_lookup = None
    if s.path("source") is not None:
        by_image = {}
        for rec in corpus.load_captions(s.path("source")):
            by_image.setdefault(rec.image_id, rec)
        source_lookup = by_image.get
    scorer = fluency.rerank_scorer(views, pos_tagger, source_lookup)

    grouped: dict[str, list] = {}
    for cand in candidates:
        grouped.setdefault(cand.image_id, []).append(cand)
    n_degraded = 0
    with open(s.path("out"), "w", encoding="utf-8") as fh:
        for image_id, group in grouped.items():
            for new_rank, entry in enumerate(
                    guidance.rerank_by_fluency(group, scorer), start=1):
                cand = entry.candidate
                n_degraded += entry.degraded
                fh.write(json.dumps({
                    "image_id": image_id, "rank": new_rank,
                    "orig_rank": cand.rank, "tokens": list(cand.tokens),
                    "logprob": cand.logprob, "fluency": entry.fluency,
                    "degraded": entry.degraded,
                }, ensure_ascii=False) + "\n")
    write_sidecar_manifest(s.path("out"), "rerank", s)
    note = " (all scored with the full four views)" if n_degraded == 0 else \
        f" ({n_degraded}/{len(candidates)} degraded: missing streams)"
    print(f"reranked {len(candidates)} candidates over "
          f"{len(grouped)} images{note}")
    return 0


EVALUATE_DEFAULTS = {
    "candidates": REQUIRED, "references": REQUIRED, "out": None,
    "cider_variant": "plain",
}


def cmd_evaluate(s: Settings) -> int:
    best: dict[str, captioner.CandidateCaption] = {}
    for cand in captioner.load_candidates(s.path("candidates")):
        kept = best.get(cand.image_id)
        if kept is None or cand.rank < kept.rank:
            best[cand.image_id] = cand
    refs: dict[str, list] = {}
    for rec in corpus.load_captions(s.path("references")):
        refs.setdefault(rec.image_id, []).append(rec.tokens)
    instances = metrics.build_instances(
        {i: c.tokens for i, c in best.items()}, refs)
    report = metrics.compute_report(instances, cider_variant=s.get("cider_variant"))
    print(f"BLEU-4  {report.bleu4:7.2f}")
    print(f"ROUGE-L {report.rouge_l:7.2f}")
    print(f"CIDEr   {report.cider:7.2f}  ({report.cider_variant})")
    if s.path("out") is not None:
        payload = {
            "bleu4": report.bleu4, "rouge_l": report.rouge_l,
            "cider": report.cider, "cider_variant": report.cider_variant,
            "per_image": {
                image_id: {"rouge_l": report.per_image_rouge[image_id],
                           "cider": report.per_image_cider[image_id]}
                for image_id in sorted(report.per_image_rouge)
            },
        }
        s.path("out").write_text(json.dumps(payload, indent=2) + "\n")
        write_sidecar_manifest(s.path("out"), "evaluate", s)
    return 0


GRADCHECK_DEFAULTS = {"step": 1e-4, "tol": 1e-4, "seed": 0}


def cmd_gradcheck(s: Settings) -> int:
    """Finite-difference check of both model families at toy size."""
    rng = np.random.default_rng(s.get("seed"))
    step, tol = s.get("step"), s.get("tol")
    failures = 0

    clf = SequenceClassifier(vocab_size=6, embed_dim=4, hidden_dim=4, seed=1)
    batch = [(rng.integers(0, 6, size=rng.integers(2, 6)).tolist(),
              int(rng.integers(2))) for _ in range(3)]
    _, grads = clf.loss_and_grads(batch)
    report = grad_check(clf.params, lambda: clf.loss_and_grads(batch)[0],
                        grads, step=step)
    ok = report.ok(tol)
    failures += not ok
    print(f"classifier: worst rel err {report.worst:.3e} "
          f"[{'PASS' if ok else 'FAIL'}]")

    cap = CaptionModel(feat_dim=5, vocab_size=6, embed_dim=4, hidden_dim=4,
                       boundary_id=0, seed=2)
    cap_batch = []
    for _ in range(3):
        feat = rng.normal(size=5)
        feat /= np.linalg.norm(feat)
        words = rng.integers(1, 6, size=rng.integers(1, 4)).tolist()
        cap_batch.append((feat, [0] + words + [0]))
    _, grads = cap.loss_and_grads(cap_batch)
    report = grad_check(cap.params, lambda: cap.loss_and_grads(cap_batch)[0],
                        grads, step=step)
    ok = report.ok(tol)
    failures += not ok
    print(f"captioner:  worst rel err {report.worst:.3e} "
          f"[{'PASS' if ok else 'FAIL'}]")
    return 1 if failures else 0


SERVE_DEFAULTS = {
    "corpus": REQUIRED, "source": None, "annotators": ("a1", "a2"),
    "raters": (), "system": (), "log": None, "snapshot_every": 200,
    "seed": 0, "host": "127.0.0.1", "port": 8000, "static": None,
}


def cmd_serve(s: Settings) -> int:
    from .service import AnnotationStore, ServiceConfig, create_app

    sentences = corpus.load_captions(s.path("corpus"))
    sources = corpus.load_captions(s.path("source")) \
        if s.path("source") is not None else None
    systems = {}
    for spec_item in s.get("system"):
        name, _, path = spec_item.partition("=")
        if not path:
            raise CliError(f"--system wants name=path, got {spec_item!r}")
        outputs = {}
        for cand in captioner.load_candidates(Path(path) if Path(path).is_absolute()
                                              else s.root / path):
            if cand.rank == 1:
                outputs[cand.image_id] = cand.tokens
        systems[name] = outputs
    store = AnnotationStore(
        sentences,
        ServiceConfig(annotators=tuple(s.get("annotators")),
                      raters=tuple(s.get("raters")),
                      seed=s.get("seed"),
                      snapshot_every=s.get("snapshot_every")),
        sources=sources, systems=systems, log_path=s.path("log"))
    app = create_app(store, static_dir=s.path("static"))
    import uvicorn
    print(f"serving {len(sentences)} sentences "
          f"({len(systems)} systems) on {s.get('host')}:{s.get('port')}")
    uvicorn.run(app, host=s.get("host"), port=s.get("port"), log_level="warning")
    return 0


# ---------------------------------------------------------------------------
# parser plumbing
# ---------------------------------------------------------------------------

COMMANDS = {
    "synth": (cmd_synth, SYNTH_DEFAULTS, "generate a synthetic bilingual corpus"),
    "train-classifier": (cmd_train_classifier, CLASSIFIER_DEFAULTS,
                         "train the four fluency views"),
    "score": (cmd_score, SCORE_DEFAULTS, "ensemble-score a caption file"),
    "train-captioner": (cmd_train_captioner, TRAIN_CAPTIONER_DEFAULTS,
                        "train the caption generator"),
    "caption": (cmd_caption, CAPTION_DEFAULTS, "decode captions for features"),
    "rerank": (cmd_rerank, RERANK_DEFAULTS,
               "reorder decoded candidates by fluency"),
    "evaluate": (cmd_evaluate, EVALUATE_DEFAULTS,
                 "score candidates against references"),
    "gradcheck": (cmd_gradcheck, GRADCHECK_DEFAULTS,
                  "finite-difference gradient check"),
    "serve": (cmd_serve, SERVE_DEFAULTS, "run the annotation service"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crosscap",
        description="fluency-guided cross-lingual captioning pipeline")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)
    for name, (_, defaults, help_text) in COMMANDS.items():
        sub = subs.add_parser(name, help=help_text)
        sub.add_argument("--config", help="key=value file supplying defaults")
        for key, default in defaults.items():
            flag = "--" + key.replace("_", "-")
            if isinstance(default, bool):
                sub.add_argument(flag, action=argparse.BooleanOptionalAction,
                                 default=None)
            elif key == "system":
                sub.add_argument(flag, action="append", default=None,
                                 metavar="NAME=PATH")
            elif isinstance(default, tuple):
                sub.add_argument(flag, type=lambda v: tuple(
                    p.strip() for p in v.split(",") if p.strip()), default=None)
            elif isinstance(default, int) and default is not REQUIRED:
                sub.add_argument(flag, type=int, default=None)
            elif isinstance(default, float):
                sub.add_argument(flag, type=float, default=None)
            else:
                sub.add_argument(flag, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    fn, defaults, _ = COMMANDS[args.command]
    try:
        return fn(Settings(args, defaults))
    except (CliError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
