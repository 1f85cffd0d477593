"""HTTP service for the two human annotation workflows.

Workflow one: fluency grading.  Every sentence is shown independently to
two annotators, who grade it fluent / not_fluent / difficult; the
consensus export keeps only sentences where both grades agree on fluent
or not_fluent.

Workflow two: blind comparative rating.  All systems' captions for one
image are presented together, shuffled per (rater, image) and labeled
with opaque handles, and each image is rated by exactly two raters on
1-5 relevance and fluency scales.

State is an append-only JSONL event log with periodic snapshots; every
mutation is an event, and recovery replays the tail after the newest
snapshot.
"""

from __future__ import annotations

import json
import threading
import time
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from pydantic import BaseModel

from .corpus import FLUENT, NOT_FLUENT, CaptionRecord, caption_to_json

DIFFICULT = "difficult"
GRADES = (FLUENT, NOT_FLUENT, DIFFICULT)

GRADERS_PER_SENTENCE = 2
RATERS_PER_IMAGE = 2
LIKERT_MIN, LIKERT_MAX = 1, 5


class AuthError(Exception):
    pass


class ConflictError(Exception):
    pass


class ValidationError(Exception):
    pass


@dataclass(frozen=True)
class ServiceConfig:
    annotators: tuple[str, ...] = ()
    raters: tuple[str, ...] = ()
    seed: int = 0
    snapshot_every: int = 200


def _crc(text: str) -> int:
    return zlib.crc32(text.encode("utf-8"))


class AnnotationStore:
    """All service state plus its event-log persistence.

    Mutations are serialized by one lock: validate, append the event,
    apply it.  Replay on construction applies events without validation
    (they were valid when written).
    """

    def __init__(self, sentences, config: ServiceConfig, sources=None,
                 systems=None, log_path=None):
        self.config = config
        self.sentences: dict[str, CaptionRecord] = {}
        for rec in sentences:
            if rec.sentence_id in self.sentences:
                raise ValidationError(f"duplicate sentence_id {rec.sentence_id}")
            self.sentences[rec.sentence_id] = rec
        self.sources = {rec.sentence_id: rec for rec in (sources or [])}
        self.source_by_image: dict[str, CaptionRecord] = {}
        for rec in (sources or []):
            self.source_by_image.setdefault(rec.image_id, rec)
        # system name -> image_id -> caption tokens
        self.systems: dict[str, dict[str, tuple[str, ...]]] = {
            name: dict(outputs) for name, outputs in (systems or {}).items()
        }
        image_ids = set()
        for outputs in self.systems.values():
            image_ids.update(outputs)
        # rating units: images covered by at least two systems
        self.eval_images = sorted(
            i for i in image_ids
            if sum(1 for o in self.systems.values() if i in o) >= 2)

        self.grades: dict[str, dict[str, str]] = {}
        self.open_assignments: dict[str, str] = {}
        self.sessions: dict[tuple[str, str], list[str]] = {}  # presentation order
        self.open_eval: dict[str, str] = {}
        self.ratings: dict[tuple[str, str], dict[str, tuple[int, int]]] = {}

        self.lock = threading.Lock()
        self.seq = 0
        self.log_path = Path(log_path) if log_path else None
        if self.log_path is not None:
            self._recover()

    # -- persistence --------------------------------------------------------

    @property
    def snapshot_path(self):
        return self.log_path.with_name(self.log_path.name + ".snapshot") \
            if self.log_path else None

    def _recover(self):
        start_seq = 0
        snap = self.snapshot_path
        if snap and snap.exists():
            state = json.loads(snap.read_text())
            start_seq = state["seq"]
            self.seq = start_seq
            self.grades = {k: dict(v) for k, v in state["grades"].items()}
            self.open_assignments = dict(state["open_assignments"])
            self.sessions = {(r, i): list(order)
                             for r, i, order in state["sessions"]}
            self.open_eval = dict(state["open_eval"])
            self.ratings = {(r, i): {h: tuple(v) for h, v in scores.items()}
                            for r, i, scores in state["ratings"]}
        if self.log_path.exists():
            with open(self.log_path, encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    event = json.loads(line)
                    if event["seq"] > start_seq:
                        self._apply(event)
                        self.seq = event["seq"]

    def _snapshot(self):
        state = {
            "seq": self.seq,
            "grades": self.grades,
            "open_assignments": self.open_assignments,
            "sessions": [[r, i, order] for (r, i), order in self.sessions.items()],
            "open_eval": self.open_eval,
            "ratings": [[r, i, scores] for (r, i), scores in self.ratings.items()],
        }
        self.snapshot_path.write_text(json.dumps(state) + "\n")

    def _record(self, event: dict):
        self.seq += 1
        event = {"seq": self.seq, "ts": time.time(), **event}
        if self.log_path is not None:
            with open(self.log_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(event, ensure_ascii=False) + "\n")
        self._apply(event)
        if self.log_path is not None and \
                self.seq % self.config.snapshot_every == 0:
            self._snapshot()

    def _apply(self, event: dict):
        kind = event["type"]
        if kind == "assignment":
            self.open_assignments[event["annotator"]] = event["sentence_id"]
        elif kind == "grade":
            sid, annotator = event["sentence_id"], event["annotator"]
            self.grades.setdefault(sid, {})[annotator] = event["grade"]
            if self.open_assignments.get(annotator) == sid:
                del self.open_assignments[annotator]
        elif kind == "eval_issue":
            rater, image = event["rater"], event["image_id"]
            self.sessions[(rater, image)] = list(event["order"])
            self.open_eval[rater] = image
        elif kind == "rating":
            rater, image = event["rater"], event["image_id"]
            self.ratings[(rater, image)] = {
                h: (int(r), int(f)) for h, (r, f) in event["scores"].items()}
            if self.open_eval.get(rater) == image:
                del self.open_eval[rater]
        else:  # pragma: no cover - future-proofing
            raise ValueError(f"unknown event type {kind!r}")

    # -- grading ------------------------------------------------------------

    def _require_annotator(self, annotator):
        if annotator not in self.config.annotators:
            raise AuthError(f"unknown annotator {annotator!r}")

    def _engagement(self, sid) -> set[str]:
        engaged = set(self.grades.get(sid, ()))
        engaged.update(a for a, s in self.open_assignments.items() if s == sid)
        return engaged

    def next_assignment(self, annotator):
        """The next sentence for this annotator, or None when exhausted.

        Least-graded sentences first; an ungraded open assignment is
        simply reissued.
        """
        with self.lock:
            self._require_annotator(annotator)
            sid = self.open_assignments.get(annotator)
            if sid is None:
                best = None
                for order, cand in enumerate(self.sentences):
                    engaged = self._engagement(cand)
                    if annotator in engaged or len(engaged) >= GRADERS_PER_SENTENCE:
                        continue
                    key = (len(engaged), order)
                    if best is None or key < best[0]:
                        best = (key, cand)
                if best is None:
                    return None
                sid = best[1]
                self._record({"type": "assignment", "annotator": annotator,
                              "sentence_id": sid})
            record = self.sentences[sid]
            source = self.source_by_image.get(record.image_id)
            if record.sentence_id in self.sources:
                source = self.sources[record.sentence_id]
            return {
                "sentence_id": sid,
                "annotator": annotator,
                "language": record.language,
                "tokens": list(record.tokens),
                "source": None if source is None else {
                    "language": source.language,
                    "tokens": list(source.tokens),
                },
            }

    def submit_grade(self, sentence_id, annotator, grade):
        with self.lock:
            self._require_annotator(annotator)
            if grade not in GRADES:
                raise ValidationError(
                    f"grade must be one of {GRADES}, got {grade!r}")
            if sentence_id not in self.sentences:
                raise ValidationError(f"unknown sentence {sentence_id!r}")
            existing = self.grades.get(sentence_id, {}).get(annotator)
            if existing is not None:
                if existing == grade:
                    return {"status": "stored", "sentence_id": sentence_id,
                            "duplicate": True}
                raise ConflictError(
                    f"{annotator} already graded {sentence_id} as {existing}")
            if self.open_assignments.get(annotator) != sentence_id:
                raise ConflictError(
                    f"no open assignment of {sentence_id} for {annotator}")
            self._record({"type": "grade", "annotator": annotator,
                          "sentence_id": sentence_id, "grade": grade})
            return {"status": "stored", "sentence_id": sentence_id,
                    "duplicate": False}

    def consensus_records(self) -> list[CaptionRecord]:
        """Doubly-graded sentences where both grades agree on (not_)fluent."""
        with self.lock:
            out = []
            for sid, record in self.sentences.items():
                grades = list(self.grades.get(sid, {}).values())
                if len(grades) != GRADERS_PER_SENTENCE:
                    continue
                if grades[0] != grades[1] or grades[0] == DIFFICULT:
                    continue
                out.append(record.with_score(1.0 if grades[0] == FLUENT else 0.0))
            return out

    # -- rating -------------------------------------------------------------

    def _require_rater(self, rater):
        if rater not in self.config.raters:
            raise AuthError(f"unknown rater {rater!r}")

    def _raters_engaged(self, image) -> set[str]:
        engaged = {r for (r, i) in self.ratings if i == image}
        engaged.update(r for r, i in self.open_eval.items() if i == image)
        return engaged

    def _session_bundle(self, rater, image):
        order = self.sessions[(rater, image)]
        items = [{"handle": f"h{pos + 1}",
                  "tokens": list(self.systems[system][image])}
                 for pos, system in enumerate(order)]
        source = self.source_by_image.get(image)
        return {
            "image_id": image,
            "rater": rater,
            "items": items,
            "context_tokens": None if source is None else list(source.tokens),
        }

    def next_eval_item(self, rater):
        with self.lock:
            self._require_rater(rater)
            if len(self.systems) < 2:
                raise ConflictError("evaluation needs at least two systems")
            image = self.open_eval.get(rater)
            if image is None:
                best = None
                for order, cand in enumerate(self.eval_images):
                    engaged = self._raters_engaged(cand)
                    if rater in engaged or len(engaged) >= RATERS_PER_IMAGE:
                        continue
                    key = (len(engaged), order)
                    if best is None or key < best[0]:
                        best = (key, cand)
                if best is None:
                    return None
                image = best[1]
                present = sorted(name for name, o in self.systems.items()
                                 if image in o)
                rng = np.random.default_rng(np.random.SeedSequence(
                    (self.config.seed, _crc(rater), _crc(image))))
                order = [present[i] for i in rng.permutation(len(present))]
                self._record({"type": "eval_issue", "rater": rater,
                              "image_id": image, "order": order})
            return self._session_bundle(rater, image)

    def submit_rating(self, rater, image_id, scores):
        """scores: mapping handle -> (relevance, fluency)."""
        with self.lock:
            self._require_rater(rater)
            stored = self.ratings.get((rater, image_id))
            normalized = {}
            for handle, pair in scores.items():
                try:
                    relevance, fluency = pair
                except (TypeError, ValueError):
                    raise ValidationError(
                        f"handle {handle}: need (relevance, fluency)") from None
                for value in (relevance, fluency):
                    if not isinstance(value, int) or \
                            not LIKERT_MIN <= value <= LIKERT_MAX:
                        raise ValidationError(
                            f"score {value!r} outside {LIKERT_MIN}..{LIKERT_MAX}")
                normalized[handle] = (relevance, fluency)
            if stored is not None:
                if stored == normalized:
                    return {"status": "stored", "image_id": image_id,
                            "duplicate": True}
                raise ConflictError(
                    f"{rater} already rated {image_id} differently")
            if self.open_eval.get(rater) != image_id:
                raise ConflictError(
                    f"no open evaluation of {image_id} for {rater}")
            order = self.sessions[(rater, image_id)]
            expected = {f"h{pos + 1}" for pos in range(len(order))}
            if set(normalized) != expected:
                raise ValidationError(
                    f"ratings must cover handles {sorted(expected)} exactly")
            self._record({"type": "rating", "rater": rater,
                          "image_id": image_id, "scores": normalized})
            return {"status": "stored", "image_id": image_id, "duplicate": False}

    def report(self):
        """Per-system mean and population standard deviation of both scales."""
        with self.lock:
            collected: dict[str, dict[str, list[int]]] = {
                name: {"relevance": [], "fluency": []} for name in self.systems}
            for (rater, image), scores in self.ratings.items():
                order = self.sessions[(rater, image)]
                for pos, system in enumerate(order):
                    rel, flu = scores[f"h{pos + 1}"]
                    collected[system]["relevance"].append(rel)
                    collected[system]["fluency"].append(flu)
            out = {}
            for name, values in sorted(collected.items()):
                n = len(values["relevance"])
                out[name] = {"n": n}
                for scale in ("relevance", "fluency"):
                    xs = values[scale]
                    out[name][scale] = {
                        "mean": float(np.mean(xs)) if xs else None,
                        "sd": float(np.std(xs)) if xs else None,
                    }
            return out

    def progress(self):
        with self.lock:
            doubly = sum(1 for g in self.grades.values()
                         if len(g) >= GRADERS_PER_SENTENCE)
            per_annotator = {a: 0 for a in self.config.annotators}
            for g in self.grades.values():
                for annotator in g:
                    per_annotator[annotator] += 1
            rated_twice = {}
            for (_, image) in self.ratings:
                rated_twice[image] = rated_twice.get(image, 0) + 1
            return {
                "grading": {
                    "sentences": len(self.sentences),
                    "graded_twice": doubly,
                    "grades": sum(len(g) for g in self.grades.values()),
                    "per_annotator": per_annotator,
                },
                "rating": {
                    "images": len(self.eval_images),
                    "rated_twice": sum(1 for n in rated_twice.values()
                                       if n >= RATERS_PER_IMAGE),
                    "ratings": len(self.ratings),
                },
            }


# ---------------------------------------------------------------------------
# HTTP layer
# ---------------------------------------------------------------------------

class GradeIn(BaseModel):
    sentence_id: str
    annotator: str
    grade: str


class RatingItem(BaseModel):
    handle: str
    relevance: int
    fluency: int


class RatingIn(BaseModel):
    rater: str
    image_id: str
    ratings: list[RatingItem]


def create_app(store: AnnotationStore, static_dir=None):
    from fastapi import FastAPI, HTTPException, Response

    app = FastAPI(title="crosscap annotation service")

    def guard(fn, *args):
        try:
            return fn(*args)
        except AuthError as exc:
            raise HTTPException(status_code=401, detail=str(exc)) from exc
        except ConflictError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except ValidationError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc

    @app.get("/api/assignment")
    def assignment(annotator: str):
        bundle = guard(store.next_assignment, annotator)
        if bundle is None:
            return Response(status_code=204)
        return bundle

    @app.post("/api/grade")
    def grade(body: GradeIn):
        return guard(store.submit_grade, body.sentence_id, body.annotator,
                     body.grade)

    @app.get("/api/export/consensus")
    def export_consensus():
        lines = [caption_to_json(rec) for rec in store.consensus_records()]
        return Response("\n".join(lines) + ("\n" if lines else ""),
                        media_type="application/x-ndjson")

    @app.get("/api/eval/item")
    def eval_item(rater: str):
        bundle = guard(store.next_eval_item, rater)
        if bundle is None:
            return Response(status_code=204)
        return bundle

    @app.post("/api/eval/rating")
    def eval_rating(body: RatingIn):
        scores = {}
        for item in body.ratings:
            if item.handle in scores:
                raise HTTPException(status_code=422,
                                    detail=f"duplicate handle {item.handle}")
            scores[item.handle] = (item.relevance, item.fluency)
        return guard(store.submit_rating, body.rater, body.image_id, scores)

    @app.get("/api/eval/report")
    def eval_report():
        return store.report()

    @app.get("/api/progress")
    def progress():
        return store.progress()

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=str(static_dir), html=True),
                  name="ui")
    return app
