// Thin fetch client for the service API plus an offline submission queue.
//
// A submission that fails with a *network* error is queued and retried on
// flush(); the server treats byte-identical resubmissions as idempotent
// (it answers duplicate=true), so a retry after an unseen success is safe.
// HTTP errors (401/409/422) are never queued — they mean the payload is
// wrong, not the connection.

import {
  Assignment,
  assignmentSchema,
  EvalItem,
  evalItemSchema,
  GradeSubmission,
  gradeSubmissionSchema,
  Progress,
  progressSchema,
  RatingSubmission,
  ratingSubmissionSchema,
  SubmitResult,
  submitResultSchema,
} from "./schemas";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function raiseForStatus(res: Response): Promise<void> {
  if (res.ok) return;
  let detail = res.statusText;
  try {
    const body = (await res.json()) as { detail?: unknown };
    if (typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(res.status, detail);
}

export class Client {
  constructor(
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
    private readonly base = "",
  ) {}

  private async getJson(path: string): Promise<unknown | null> {
    const res = await this.fetchFn(this.base + path);
    await raiseForStatus(res);
    if (res.status === 204) return null;
    return res.json();
  }

  private async postJson(path: string, payload: unknown): Promise<unknown> {
    const res = await this.fetchFn(this.base + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
    await raiseForStatus(res);
    return res.json();
  }

  async nextAssignment(annotator: string): Promise<Assignment | null> {
    const body = await this.getJson(
      `/api/assignment?annotator=${encodeURIComponent(annotator)}`,
    );
    return body === null ? null : assignmentSchema.parse(body);
  }

  async submitGrade(submission: GradeSubmission): Promise<SubmitResult> {
    const payload = gradeSubmissionSchema.parse(submission);
    return submitResultSchema.parse(await this.postJson("/api/grade", payload));
  }

  async nextEvalItem(rater: string): Promise<EvalItem | null> {
    const body = await this.getJson(
      `/api/eval/item?rater=${encodeURIComponent(rater)}`,
    );
    return body === null ? null : evalItemSchema.parse(body);
  }

  async submitRating(submission: RatingSubmission): Promise<SubmitResult> {
    const payload = ratingSubmissionSchema.parse(submission);
    return submitResultSchema.parse(
      await this.postJson("/api/eval/rating", payload),
    );
  }

  async progress(): Promise<Progress> {
    return progressSchema.parse(await this.getJson("/api/progress"));
  }
}

// -- offline queue ----------------------------------------------------------

type QueuedSend = () => Promise<SubmitResult>;

interface QueueEntry {
  label: string;
  send: QueuedSend;
}

export interface SubmitOutcome {
  ok: boolean;
  queued: boolean;
  duplicate: boolean;
}

function isNetworkError(err: unknown): boolean {
  return !(err instanceof ApiError) && err instanceof Error;
}

export class SubmitQueue {
  private entries: QueueEntry[] = [];

  get pending(): number {
    return this.entries.length;
  }

  get labels(): string[] {
    return this.entries.map((e) => e.label);
  }

  /** Run a submission now; on network failure keep it for a later flush. */
  async submit(label: string, send: QueuedSend): Promise<SubmitOutcome> {
    try {
      const result = await send();
      return { ok: true, queued: false, duplicate: result.duplicate };
    } catch (err) {
      if (isNetworkError(err)) {
        this.entries.push({ label, send });
        return { ok: false, queued: true, duplicate: false };
      }
      throw err;
    }
  }

  /**
   * Retry everything in arrival order. Stops at the first entry that still
   * cannot reach the server; entries answered with duplicate=true count as
   * delivered (the original attempt had landed after all).
   */
  async flush(): Promise<number> {
    let delivered = 0;
    while (this.entries.length > 0) {
      const next = this.entries[0]!;
      try {
        await next.send();
      } catch (err) {
        if (isNetworkError(err)) break;
        // rejected outright: drop it, surfacing would need the caller
        this.entries.shift();
        throw err;
      }
      this.entries.shift();
      delivered += 1;
    }
    return delivered;
  }
}
