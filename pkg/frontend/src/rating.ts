// Rating flow: every system's caption for one image on a single screen,
// in exactly the order the server sent (the server owns the blind,
// per-rater shuffle — re-sorting here would break comparability).
// Each caption gets two 1-5 selectors; submission requires all of them.

import { Client, SubmitOutcome, SubmitQueue } from "./api";
import { escapeHtml, joinTokens } from "./format";
import {
  EvalItem,
  LIKERT_MAX,
  LIKERT_MIN,
  RatingSubmission,
  ratingSubmissionSchema,
} from "./schemas";

export const SCALES = ["relevance", "fluency"] as const;
export type Scale = (typeof SCALES)[number];

export type ScoreSheet = Map<string, Partial<Record<Scale, number>>>;

export interface RatingState {
  rater: string;
  item: EvalItem | null;
  scores: ScoreSheet;
  done: boolean;
  ratedCount: number;
  queuedCount: number;
  missing: string[]; // handles with an unfilled selector, set on failed submit
  notice: string;
}

export function initialRatingState(rater: string): RatingState {
  return {
    rater,
    item: null,
    scores: new Map(),
    done: false,
    ratedCount: 0,
    queuedCount: 0,
    missing: [],
    notice: "",
  };
}

/** Handles whose two scores are not both filled in yet. */
export function missingHandles(item: EvalItem, scores: ScoreSheet): string[] {
  return item.items
    .map((caption) => caption.handle)
    .filter((handle) => {
      const entry = scores.get(handle);
      return (
        entry === undefined ||
        SCALES.some((scale) => entry[scale] === undefined)
      );
    });
}

/**
 * Assemble the payload in the server's presentation order. Returns null
 * unless every selector on the sheet is filled.
 */
export function collectRating(
  rater: string,
  item: EvalItem,
  scores: ScoreSheet,
): RatingSubmission | null {
  if (missingHandles(item, scores).length > 0) return null;
  return ratingSubmissionSchema.parse({
    rater,
    image_id: item.image_id,
    ratings: item.items.map((caption) => {
      const entry = scores.get(caption.handle)!;
      return {
        handle: caption.handle,
        relevance: entry.relevance!,
        fluency: entry.fluency!,
      };
    }),
  });
}

function selectorRow(handle: string, scale: Scale, picked?: number): string {
  const buttons = [];
  for (let v = LIKERT_MIN; v <= LIKERT_MAX; v++) {
    const on = picked === v ? " on" : "";
    buttons.push(
      `<button class="likert${on}" data-handle="${handle}"` +
        ` data-scale="${scale}" data-value="${v}">${v}</button>`,
    );
  }
  return `<div class="scale"><span class="label">${scale}</span>${buttons.join("")}</div>`;
}

export function renderRating(state: RatingState): string {
  if (state.done) {
    return `
      <section class="panel done">
        <h2>All done</h2>
        <p>No images left to rate. You rated ${state.ratedCount}.</p>
      </section>`;
  }
  const item = state.item;
  if (item === null) {
    return `<section class="panel"><p>Loading…</p></section>`;
  }
  const rows = item.items
    .map((caption) => {
      const entry = state.scores.get(caption.handle) ?? {};
      const warn = state.missing.includes(caption.handle)
        ? ` <span class="warn">rate both scales</span>`
        : "";
      return `
      <div class="caption-row" data-handle="${caption.handle}">
        <div class="caption-text">
          <span class="handle">${caption.handle}</span>
          ${escapeHtml(joinTokens(caption.tokens, "target"))}${warn}
        </div>
        ${selectorRow(caption.handle, "relevance", entry.relevance)}
        ${selectorRow(caption.handle, "fluency", entry.fluency)}
      </div>`;
    })
    .join("\n");
  return `
    <section class="panel">
      ${contextPanel(item)}
      <div class="captions">${rows}</div>
      <button class="submit-rating">Submit all ratings</button>
      <p class="status">${escapeHtml(state.notice)}</p>
    </section>`;
}

function contextPanel(item: EvalItem): string {
  // synthetic corpora have no pictures; show the source description instead
  const inner =
    item.context_tokens === null
      ? "(no image preview)"
      : escapeHtml(joinTokens(item.context_tokens, "source"));
  return `<div class="image-placeholder">
      <span class="label">image ${escapeHtml(item.image_id)}</span>
      <p>${inner}</p>
    </div>`;
}

export class RatingFlow {
  state: RatingState;

  constructor(
    private readonly client: Client,
    rater: string,
    private readonly queue = new SubmitQueue(),
    private readonly onChange: (s: RatingState) => void = () => {},
  ) {
    this.state = initialRatingState(rater);
  }

  private emit() {
    this.state.queuedCount = this.queue.pending;
    this.onChange(this.state);
  }

  async start(): Promise<void> {
    await this.advance();
  }

  private async advance(): Promise<void> {
    const next = await this.client.nextEvalItem(this.state.rater);
    if (next === null) {
      this.state.item = null;
      this.state.done = true;
    } else {
      this.state.item = next;
      this.state.scores = new Map();
      this.state.missing = [];
    }
    this.emit();
  }

  pick(handle: string, scale: Scale, value: number): void {
    const entry = this.state.scores.get(handle) ?? {};
    entry[scale] = value;
    this.state.scores.set(handle, entry);
    this.state.missing = this.state.missing.filter((h) => h !== handle);
    this.emit();
  }

  /** Validate the sheet; submit only when complete. */
  async submit(): Promise<SubmitOutcome | null> {
    const item = this.state.item;
    if (item === null) return null;
    const submission = collectRating(this.state.rater, item, this.state.scores);
    if (submission === null) {
      this.state.missing = missingHandles(item, this.state.scores);
      this.state.notice = "every caption needs both scores";
      this.emit();
      return null;
    }
    const outcome = await this.queue.submit(
      `rating ${submission.image_id}`,
      () => this.client.submitRating(submission),
    );
    this.state.ratedCount += 1;
    this.state.notice = outcome.queued
      ? "saved locally — will sync when the connection returns"
      : "";
    this.emit(); // show the queued state even if fetching the next one fails
    await this.advance();
    return outcome;
  }

  async flushQueue(): Promise<number> {
    const delivered = await this.queue.flush();
    this.emit();
    return delivered;
  }
}
