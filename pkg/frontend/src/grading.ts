// Grading flow: fetch an assignment, show the sentence with its source
// counterpart, take one of three grades, advance to the next sentence.
// Keys 1/2/3 mirror the three buttons so a practiced annotator can keep
// one hand on the keyboard.

import { Client, SubmitOutcome, SubmitQueue } from "./api";
import { escapeHtml, joinTokens } from "./format";
import { Assignment, Grade, gradeSubmissionSchema } from "./schemas";

export const GRADE_LABELS: Record<Grade, string> = {
  fluent: "Fluent",
  not_fluent: "Not fluent",
  difficult: "Difficult to tell",
};

export const GRADE_KEYS: Record<string, Grade> = {
  "1": "fluent",
  "2": "not_fluent",
  "3": "difficult",
};

export interface GradingState {
  annotator: string;
  assignment: Assignment | null;
  done: boolean;
  gradedCount: number;
  queuedCount: number;
  notice: string;
}

export function initialGradingState(annotator: string): GradingState {
  return {
    annotator,
    assignment: null,
    done: false,
    gradedCount: 0,
    queuedCount: 0,
    notice: "",
  };
}

export function buildGradeSubmission(assignment: Assignment, grade: Grade) {
  return gradeSubmissionSchema.parse({
    sentence_id: assignment.sentence_id,
    annotator: assignment.annotator,
    grade,
  });
}

export function renderGrading(state: GradingState): string {
  if (state.done) {
    return `
      <section class="panel done">
        <h2>All done</h2>
        <p>No sentences left to grade. You graded ${state.gradedCount}.</p>
        ${queueBadge(state.queuedCount)}
      </section>`;
  }
  const a = state.assignment;
  if (a === null) {
    return `<section class="panel"><p>Loading assignment…</p></section>`;
  }
  const buttons = (Object.keys(GRADE_KEYS) as Array<keyof typeof GRADE_KEYS>)
    .map((key) => {
      const grade = GRADE_KEYS[key]!;
      return `<button class="grade" data-grade="${grade}">
        ${GRADE_LABELS[grade]} <kbd>${key}</kbd></button>`;
    })
    .join("\n");
  return `
    <section class="panel">
      <p class="hint">Does this sentence read naturally in the target
      language? Judge the wording only — not whether it matches the
      source meaning.</p>
      <div class="sentence target" data-sentence-id="${escapeHtml(a.sentence_id)}">
        ${escapeHtml(joinTokens(a.tokens, a.language))}
      </div>
      ${sourcePanel(a)}
      <div class="grades">${buttons}</div>
      <p class="status">${escapeHtml(state.notice)}</p>
      ${queueBadge(state.queuedCount)}
    </section>`;
}

function sourcePanel(a: Assignment): string {
  if (a.source === null) {
    return `<div class="sentence source muted">(no source sentence)</div>`;
  }
  return `<div class="sentence source">
      <span class="label">source:</span>
      ${escapeHtml(joinTokens(a.source.tokens, a.source.language))}
    </div>`;
}

function queueBadge(queued: number): string {
  if (queued === 0) return "";
  return `<p class="queue-badge">⏳ ${queued} submission${
    queued === 1 ? "" : "s"
  } waiting for the network</p>`;
}

export class GradingFlow {
  state: GradingState;

  constructor(
    private readonly client: Client,
    annotator: string,
    private readonly queue = new SubmitQueue(),
    private readonly onChange: (s: GradingState) => void = () => {},
  ) {
    this.state = initialGradingState(annotator);
  }

  private emit() {
    this.state.queuedCount = this.queue.pending;
    this.onChange(this.state);
  }

  async start(): Promise<void> {
    await this.advance();
  }

  private async advance(): Promise<void> {
    const next = await this.client.nextAssignment(this.state.annotator);
    if (next === null) {
      this.state.assignment = null;
      this.state.done = true;
    } else {
      this.state.assignment = next;
    }
    this.emit();
  }

  /** Submit a grade for the sentence on screen, then advance. */
  async grade(grade: Grade): Promise<SubmitOutcome | null> {
    const current = this.state.assignment;
    if (current === null) return null;
    const submission = buildGradeSubmission(current, grade);
    const outcome = await this.queue.submit(
      `grade ${submission.sentence_id}`,
      () => this.client.submitGrade(submission),
    );
    this.state.gradedCount += 1;
    this.state.notice = outcome.queued
      ? "saved locally — will sync when the connection returns"
      : "";
    this.emit(); // show the queued state even if fetching the next one fails
    await this.advance();
    return outcome;
  }

  async handleKey(key: string): Promise<void> {
    const grade = GRADE_KEYS[key];
    if (grade !== undefined && this.state.assignment !== null) {
      await this.grade(grade);
    }
  }

  async flushQueue(): Promise<number> {
    const delivered = await this.queue.flush();
    if (delivered > 0) {
      this.state.notice = `synced ${delivered} queued submission${
        delivered === 1 ? "" : "s"
      }`;
    }
    this.emit();
    return delivered;
  }
}
