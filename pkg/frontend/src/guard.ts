/** In-flight guard: at most one guarded action runs at a time. */

export class ActionGuard {
  private inFlight = false;

  get busy(): boolean {
    return this.inFlight;
  }

  /**
   * Run the action unless one is already in flight; a blocked call returns
   * undefined without invoking the action. This is what turns a double-click
   * on "approve" into a single POST.
   */
  async run<T>(action: () => Promise<T>): Promise<T | undefined> {
    if (this.inFlight) return undefined;
    this.inFlight = true;
    try {
      return await action();
    } finally {
      this.inFlight = false;
    }
  }
}
