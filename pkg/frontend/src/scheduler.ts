// Debounced request dispatcher with a monotonic id guard.
//
// Two invariants the UI depends on:
//   - at most one request is in flight (the newest wish waits in `queued`),
//   - a reply is applied only if no newer request was scheduled since it was
//     sent, so a stale response can never overwrite a newer ghost.

export const DEBOUNCE_MS = 75;

export class SuggestScheduler<Req, Res> {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private newestId = 0;
  private inFlight = false;
  private queued: { req: Req; id: number } | null = null;

  constructor(
    private readonly send: (req: Req) => Promise<Res>,
    private readonly apply: (res: Res) => void,
    private readonly onError: () => void = () => {},
    private readonly debounceMs: number = DEBOUNCE_MS,
  ) {}

  /** Debounce, then dispatch.  Scheduling immediately stales every earlier
   * request, even ones already in flight. */
  schedule(req: Req): void {
    const id = ++this.newestId;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      this.dispatch(req, id);
    }, this.debounceMs);
  }

  /** Drop the pending request, if any, and orphan any in-flight reply. */
  cancel(): void {
    this.newestId += 1;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
    this.queued = null;
  }

  private dispatch(req: Req, id: number): void {
    if (this.inFlight) {
      this.queued = { req, id };
      return;
    }
    this.inFlight = true;
    this.send(req)
      .then(
        (res) => {
          if (id === this.newestId) this.apply(res);
        },
        () => {
          if (id === this.newestId) this.onError();
        },
      )
      .then(() => {
        this.inFlight = false;
        const next = this.queued;
        this.queued = null;
        if (next !== null && next.id === this.newestId) {
          this.dispatch(next.req, next.id);
        }
      });
  }
}
