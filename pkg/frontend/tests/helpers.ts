// In-memory stand-in for the annotation service, driven through the same
// FetchLike seam the real client uses. Node 20 provides Response globally.

import { FetchLike } from "../src/api";
import { Assignment, EvalItem } from "../src/schemas";

export function json(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

export function noContent(): Response {
  return new Response(null, { status: 204 });
}

export interface FakeService {
  fetch: FetchLike;
  grades: Array<Record<string, unknown>>;
  ratings: Array<Record<string, unknown>>;
  /** while true every request rejects like a dropped connection */
  offline: boolean;
}

/**
 * Serve scripted assignment/eval bundles and store submissions, answering
 * duplicate=true for byte-identical repeats the way the real service does.
 */
export function fakeService(
  assignments: Assignment[] = [],
  evalItems: EvalItem[] = [],
): FakeService {
  const service: FakeService = {
    grades: [],
    ratings: [],
    offline: false,
    fetch: async (url, init) => {
      if (service.offline) throw new TypeError("fetch failed");
      if (url.startsWith("/api/assignment")) {
        const next = assignments.shift();
        return next ? json(next) : noContent();
      }
      if (url.startsWith("/api/eval/item")) {
        const next = evalItems.shift();
        return next ? json(next) : noContent();
      }
      if (url === "/api/grade" || url === "/api/eval/rating") {
        const stored = url === "/api/grade" ? service.grades : service.ratings;
        const payload = JSON.parse(init?.body as string) as Record<string, unknown>;
        const key = JSON.stringify(payload);
        const duplicate = stored.some((p) => JSON.stringify(p) === key);
        if (!duplicate) stored.push(payload);
        return json({ status: "stored", duplicate });
      }
      return json({ detail: "no route" }, 404);
    },
  };
  return service;
}

export function sampleAssignment(id: string, source = true): Assignment {
  return {
    sentence_id: id,
    annotator: "a1",
    language: "target",
    tokens: ["红", "狗"],
    source: source ? { language: "source", tokens: ["the", "red", "dog"] } : null,
  };
}

export function sampleEvalItem(id = "img0"): EvalItem {
  return {
    image_id: id,
    rater: "r1",
    items: [
      { handle: "h2", tokens: ["白", "猫"] },
      { handle: "h1", tokens: ["红", "狗"] },
    ],
    context_tokens: ["a", "red", "dog"],
  };
}
