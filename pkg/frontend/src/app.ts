/** Controller: polling, selection, and the decision round-trip. */

import { ApiClient, ApiError, type DecisionRequest, type QueueItem } from "./api.js";
import { ActionGuard } from "./guard.js";
import {
  renderDetail,
  renderHealth,
  renderQueueRows,
  renderShell,
  setBanner,
  setDecisionBusy,
  setDecisionError,
  showToast,
  type Shell,
} from "./view.js";

export interface AppOptions {
  /** Queue refresh period; the server is the only source of truth. */
  pollMs?: number;
  /** Clock for age rendering, injectable for tests. */
  now?: () => Date;
}

export class App {
  private readonly shell: Shell;
  private readonly guard = new ActionGuard();
  private items: QueueItem[] = [];
  private selectedId: number | null = null;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    root: HTMLElement,
    private readonly api: ApiClient,
    private readonly opts: AppOptions = {},
  ) {
    this.shell = renderShell(root);
  }

  /** First paint plus the polling loop. */
  async start(): Promise<void> {
    this.timer = setInterval(() => void this.refresh(), this.opts.pollMs ?? 5000);
    await this.refresh();
  }

  stop(): void {
    if (this.timer !== null) clearInterval(this.timer);
    this.timer = null;
  }

  /** Re-read queue and health; on failure show a banner but keep the last view. */
  async refresh(): Promise<void> {
    let items: QueueItem[];
    try {
      const [queue, health] = await Promise.all([this.api.queue(), this.api.health()]);
      items = queue;
      renderHealth(this.shell.health, health.kb_entries, health.index_rows);
    } catch (err) {
      const message = err instanceof Error ? err.message : String(err);
      setBanner(this.shell.banner, `cannot reach the service: ${message}`, () => void this.refresh());
      return;
    }
    setBanner(this.shell.banner, null);
    this.items = items;
    if (this.selectedId !== null && !items.some((item) => item.item_id === this.selectedId)) {
      this.selectedId = null;
    }
    this.render();
  }

  private render(): void {
    renderQueueRows(
      this.shell,
      this.items,
      this.selectedId,
      (itemId) => {
        this.selectedId = itemId;
        this.render();
      },
      this.opts.now?.() ?? new Date(),
    );
    const selected = this.items.find((item) => item.item_id === this.selectedId) ?? null;
    renderDetail(this.shell, selected, {
      onApprove: (item) => void this.submit(item, { decision: "approve", reviewer_id: this.reviewerId() }),
      onReject: (item, reason) =>
        void this.submit(item, { decision: "reject", reviewer_id: this.reviewerId(), reason }),
      onRejectBlocked: () => setDecisionError(this.shell.detail, "a reason is required to reject"),
    });
  }

  private reviewerId(): string {
    return this.shell.reviewer.value.trim() || "console";
  }

  /**
   * POST the decision at most once (the guard absorbs double-clicks), then
   * re-sync from the server. 409 means another client got there first.
   */
  private async submit(item: QueueItem, body: DecisionRequest): Promise<void> {
    await this.guard.run(async () => {
      setDecisionError(this.shell.detail, null);
      setDecisionBusy(this.shell.detail, true);
      try {
        const outcome = await this.api.decide(item.item_id, body);
        if (outcome.entry_id !== null) {
          showToast(this.shell.toast, `approved item ${item.item_id} — new KB entry ${outcome.entry_id}`);
        } else {
          showToast(this.shell.toast, `rejected item ${item.item_id}`);
        }
        await this.refresh();
      } catch (err) {
        if (err instanceof ApiError && err.status === 409) {
          showToast(this.shell.toast, `item ${item.item_id} was already decided`);
          await this.refresh();
        } else {
          const message = err instanceof Error ? err.message : String(err);
          setDecisionError(this.shell.detail, `decision failed: ${message}`);
          setDecisionBusy(this.shell.detail, false);
        }
      }
    });
  }
}
