/** DOM rendering for the review console; no fetching, no app state. */

import type { QueueItem } from "./api.js";
import { canRecompute, DIMENSIONS, finalMismatch, formatScore, weightedFinal } from "./score.js";

export interface Shell {
  health: HTMLElement;
  reviewer: HTMLInputElement;
  banner: HTMLElement;
  queueBody: HTMLTableSectionElement;
  queueEmpty: HTMLElement;
  detail: HTMLElement;
  toast: HTMLElement;
}

export interface DetailHandlers {
  onApprove: (item: QueueItem) => void;
  onReject: (item: QueueItem, reason: string) => void;
  /** Called instead of onReject when the reason box is blank. */
  onRejectBlocked: () => void;
}

/** Build the static page scaffold inside `root` and hand back its live regions. */
export function renderShell(root: HTMLElement): Shell {
  root.innerHTML = `
    <header>
      <h1>review console</h1>
      <label>reviewer <input data-reviewer type="text" value="console"></label>
      <span data-health></span>
    </header>
    <div data-banner hidden></div>
    <section>
      <table>
        <thead>
          <tr><th>#</th><th>question</th><th>model</th><th>final</th><th>age</th></tr>
        </thead>
        <tbody data-queue></tbody>
      </table>
      <p data-empty hidden>no pending items</p>
    </section>
    <section data-detail></section>
    <div data-toast hidden></div>
  `;
  return {
    health: must(root, "[data-health]"),
    reviewer: must(root, "[data-reviewer]"),
    banner: must(root, "[data-banner]"),
    queueBody: must(root, "[data-queue]"),
    queueEmpty: must(root, "[data-empty]"),
    detail: must(root, "[data-detail]"),
    toast: must(root, "[data-toast]"),
  };
}

function must<T extends Element>(root: ParentNode, selector: string): T {
  const el = root.querySelector<T>(selector);
  if (!el) throw new Error(`missing shell element ${selector}`);
  return el;
}

/** Replace the queue rows with the server payload, oldest first as received. */
export function renderQueueRows(
  shell: Shell,
  items: QueueItem[],
  selectedId: number | null,
  onSelect: (itemId: number) => void,
  now: Date = new Date(),
): void {
  shell.queueBody.textContent = "";
  shell.queueEmpty.hidden = items.length > 0;
  for (const item of items) {
    const row = document.createElement("tr");
    row.dataset.itemId = String(item.item_id);
    if (item.item_id === selectedId) row.classList.add("selected");
    const model = item.source.kind === "ensemble" ? item.source.winner_model : "rag";
    const final = item.source.kind === "ensemble" ? formatScore(item.source.final_score) : "";
    appendCell(row, String(item.item_id));
    appendCell(row, preview(item.question));
    appendCell(row, model);
    appendCell(row, final);
    appendCell(row, formatAge(item.created_at, now));
    row.addEventListener("click", () => onSelect(item.item_id));
    shell.queueBody.appendChild(row);
  }
}

function appendCell(row: HTMLTableRowElement, text: string): void {
  const cell = document.createElement("td");
  cell.textContent = text;
  row.appendChild(cell);
}

function preview(text: string, max = 40): string {
  return text.length <= max ? text : text.slice(0, max) + "…";
}

/** Human-scale age like "3m ago"; empty string when the timestamp is unparseable. */
export function formatAge(createdAt: string, now: Date): string {
  const created = new Date(createdAt);
  if (Number.isNaN(created.getTime())) return "";
  const seconds = Math.max(0, (now.getTime() - created.getTime()) / 1000);
  if (seconds < 60) return "<1m ago";
  if (seconds < 3600) return `${Math.floor(seconds / 60)}m ago`;
  if (seconds < 86400) return `${Math.floor(seconds / 3600)}h ago`;
  return `${Math.floor(seconds / 86400)}d ago`;
}

/** Render one item's full detail with decision controls, or a hint when none selected. */
export function renderDetail(shell: Shell, item: QueueItem | null, handlers: DetailHandlers): void {
  shell.detail.textContent = "";
  if (!item) {
    const hint = document.createElement("p");
    hint.textContent = "select an item to review";
    shell.detail.appendChild(hint);
    return;
  }

  const heading = document.createElement("h2");
  heading.textContent = `item ${item.item_id}`;
  shell.detail.appendChild(heading);

  appendField(shell.detail, "question", item.question);
  appendField(shell.detail, "answer", item.answer);
  appendCause(shell.detail, item.cause);

  if (item.source.kind === "ensemble") {
    const source = item.source;
    appendField(shell.detail, "model", source.winner_model);
    appendField(shell.detail, "final score", formatScore(source.final_score));
    if (canRecompute(source)) {
      appendScoreBars(shell.detail, source.dimension_scores);
      if (finalMismatch(source)) {
        const warning = document.createElement("p");
        warning.dataset.scoreMismatch = "true";
        warning.className = "warning";
        warning.textContent =
          `score mismatch: weighted sum is ${weightedFinal(source.dimension_scores, source.weights).toFixed(6)}` +
          ` but the server reports ${source.final_score.toFixed(6)}`;
        shell.detail.appendChild(warning);
      }
    }
  } else {
    appendField(shell.detail, "source", "retrieval");
  }

  appendControls(shell.detail, item, handlers);
}

function appendField(parent: HTMLElement, label: string, value: string): void {
  const p = document.createElement("p");
  const strong = document.createElement("strong");
  strong.textContent = label + ": ";
  p.appendChild(strong);
  p.appendChild(document.createTextNode(value));
  parent.appendChild(p);
}

function appendCause(parent: HTMLElement, cause: string): void {
  if (cause) {
    appendField(parent, "cause", cause);
    return;
  }
  const p = document.createElement("p");
  p.dataset.causeMissing = "true";
  p.className = "warning";
  p.textContent = "cause: none extracted — no statute citation in this answer";
  parent.appendChild(p);
}

function appendScoreBars(parent: HTMLElement, scores: number[]): void {
  const list = document.createElement("dl");
  list.dataset.scores = "true";
  scores.forEach((value, i) => {
    const term = document.createElement("dt");
    term.textContent = DIMENSIONS[i] ?? `dimension ${i}`;
    const detail = document.createElement("dd");
    const bar = document.createElement("span");
    bar.className = "bar";
    bar.style.width = `${Math.round(Math.min(1, Math.max(0, value)) * 100)}%`;
    detail.appendChild(bar);
    detail.appendChild(document.createTextNode(" " + formatScore(value)));
    list.appendChild(term);
    list.appendChild(detail);
  });
  parent.appendChild(list);
}

function appendControls(parent: HTMLElement, item: QueueItem, handlers: DetailHandlers): void {
  const controls = document.createElement("div");
  controls.className = "controls";

  const reason = document.createElement("input");
  reason.type = "text";
  reason.placeholder = "reason (required to reject)";
  reason.dataset.reason = "true";

  const approve = document.createElement("button");
  approve.dataset.approve = "true";
  approve.textContent = "approve";
  approve.addEventListener("click", () => handlers.onApprove(item));

  const reject = document.createElement("button");
  reject.dataset.reject = "true";
  reject.textContent = "reject";
  reject.addEventListener("click", () => {
    const text = reason.value.trim();
    if (!text) {
      handlers.onRejectBlocked();
      return;
    }
    handlers.onReject(item, text);
  });

  const error = document.createElement("p");
  error.dataset.decisionError = "true";
  error.className = "warning";
  error.hidden = true;

  controls.appendChild(reason);
  controls.appendChild(approve);
  controls.appendChild(reject);
  parent.appendChild(controls);
  parent.appendChild(error);
}

/** Disable or re-enable the decision buttons while a POST is in flight. */
export function setDecisionBusy(detail: HTMLElement, busy: boolean): void {
  for (const button of detail.querySelectorAll<HTMLButtonElement>("button")) {
    button.disabled = busy;
  }
}

export function setDecisionError(detail: HTMLElement, message: string | null): void {
  const el = detail.querySelector<HTMLElement>("[data-decision-error]");
  if (!el) return;
  el.hidden = message === null;
  el.textContent = message ?? "";
}

/** Connectivity banner with a retry control; never fail silently. */
export function setBanner(banner: HTMLElement, message: string | null, onRetry?: () => void): void {
  banner.textContent = "";
  banner.hidden = message === null;
  if (message === null) return;
  banner.appendChild(document.createTextNode(message + " "));
  const retry = document.createElement("button");
  retry.dataset.retry = "true";
  retry.textContent = "retry";
  if (onRetry) retry.addEventListener("click", onRetry);
  banner.appendChild(retry);
}

export function showToast(toast: HTMLElement, message: string): void {
  toast.hidden = false;
  toast.textContent = message;
}

export function renderHealth(el: HTMLElement, kbEntries: number, indexRows: number): void {
  el.textContent = `kb ${kbEntries} · index ${indexRows}`;
}
