// Browser entry point. Everything stateful lives in the flow classes so
// this file is just wiring: role picker, event delegation, offline sync.

import { ApiError, Client } from "./api";
import { escapeHtml } from "./format";
import { GRADE_KEYS, GradingFlow, renderGrading } from "./grading";
import { RatingFlow, Scale, renderRating } from "./rating";
import { Grade } from "./schemas";

type Role = "annotator" | "rater";

function rolePicker(): string {
  return `
    <section class="panel">
      <h2>Caption annotation</h2>
      <form class="role-form">
        <label>Your id <input name="person" required autofocus></label>
        <div class="roles">
          <button type="submit" data-role="annotator">Grade fluency</button>
          <button type="submit" data-role="rater">Rate captions</button>
        </div>
      </form>
    </section>`;
}

function fatal(root: HTMLElement, err: unknown): void {
  const detail =
    err instanceof ApiError
      ? `${err.status}: ${err.detail}`
      : err instanceof Error
        ? err.message
        : String(err);
  root.innerHTML = `<section class="panel error"><p>${escapeHtml(detail)}</p></section>`;
}

function runGrading(root: HTMLElement, client: Client, annotator: string): void {
  const flow = new GradingFlow(client, annotator, undefined, (state) => {
    root.innerHTML = renderGrading(state);
  });
  root.addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement;
    const grade = target.dataset.grade as Grade | undefined;
    if (grade) void flow.grade(grade).catch((e) => fatal(root, e));
  });
  document.addEventListener("keydown", (ev) => {
    const grade = GRADE_KEYS[ev.key];
    if (grade) void flow.grade(grade).catch((e) => fatal(root, e));
  });
  window.addEventListener("online", () => void flow.flushQueue());
  flow.start().catch((e) => fatal(root, e));
}

function runRating(root: HTMLElement, client: Client, rater: string): void {
  const flow = new RatingFlow(client, rater, undefined, (state) => {
    root.innerHTML = renderRating(state);
  });
  root.addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement;
    if (target.classList.contains("likert")) {
      const { handle, scale, value } = target.dataset;
      if (handle && scale && value) {
        flow.pick(handle, scale as Scale, Number(value));
      }
    } else if (target.classList.contains("submit-rating")) {
      void flow.submit().catch((e) => fatal(root, e));
    }
  });
  window.addEventListener("online", () => void flow.flushQueue());
  flow.start().catch((e) => fatal(root, e));
}

export function boot(root: HTMLElement, client = new Client()): void {
  root.innerHTML = rolePicker();
  const form = root.querySelector<HTMLFormElement>(".role-form")!;
  let role: Role = "annotator";
  form.querySelectorAll<HTMLButtonElement>("button[data-role]").forEach((b) =>
    b.addEventListener("click", () => {
      role = b.dataset.role as Role;
    }),
  );
  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const person = new FormData(form).get("person");
    if (typeof person !== "string" || person.trim() === "") return;
    const fresh = root.cloneNode(false) as HTMLElement; // drop picker listeners
    root.replaceWith(fresh);
    if (role === "annotator") runGrading(fresh, client, person.trim());
    else runRating(fresh, client, person.trim());
  });
}

const appRoot = document.getElementById("app");
if (appRoot) boot(appRoot);
