/** Framework-free session state machine.  The DOM layer renders the view
 * returned by `view()` verbatim and forwards clicks/keys to `choose()`;
 * everything observable lives here so tests can drive it headlessly. */

import { Api, PendingPair, StalePairError } from "./api.js";

export interface View {
  phase: "idle" | "loading" | "pending" | "done" | "error";
  pair: PendingPair | null;
  answered: number;
  ranking: string[] | null;
  errorMessage: string | null;
}

export class LabelController {
  private sessionId: string | null = null;
  private pair: PendingPair | null = null;
  private answered = 0;
  private ranking: string[] | null = null;
  private phase: View["phase"] = "idle";
  private errorMessage: string | null = null;
  private busy = false; // a submit is in flight: further choices are ignored
  private listeners: Array<() => void> = [];

  constructor(private api: Api) {}

  onChange(fn: () => void): void {
    this.listeners.push(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn();
  }

  view(): View {
    return {
      phase: this.phase,
      pair: this.pair,
      answered: this.answered,
      ranking: this.ranking,
      errorMessage: this.errorMessage,
    };
  }

  async start(items: string[], eps?: number): Promise<void> {
    this.phase = "loading";
    this.emit();
    try {
      this.sessionId = await this.api.createSession(items, eps);
      await this.refresh();
    } catch (err) {
      this.fail(err);
    }
  }

  /** Resume an existing session (e.g. after a reload). */
  async resume(sessionId: string): Promise<void> {
    this.sessionId = sessionId;
    this.phase = "loading";
    this.emit();
    try {
      const state = await this.api.state(sessionId);
      this.answered = state.answered;
      await this.refresh();
    } catch (err) {
      this.fail(err);
    }
  }

  private async refresh(): Promise<void> {
    if (!this.sessionId) return;
    const next = await this.api.next(this.sessionId);
    if ("done" in next && next.done) {
      this.phase = "done";
      this.pair = null;
      this.ranking = next.ranking;
    } else {
      this.phase = "pending";
      this.pair = next as PendingPair;
    }
    this.errorMessage = null;
    this.emit();
  }

  /** Submit the displayed pair.  Ignored unless a pair is showing and no
   * submit is already in flight (double-click protection). */
  async choose(side: "left" | "right"): Promise<void> {
    if (this.phase !== "pending" || this.busy || !this.pair || !this.sessionId) {
      return;
    }
    const { u, v } = this.pair;
    const preferred = side === "left" ? u : v;
    this.busy = true;
    try {
      await this.api.answer(this.sessionId, u, v, preferred);
      this.answered += 1;
      await this.refresh();
    } catch (err) {
      if (err instanceof StalePairError) {
        // the server moved on (e.g. another tab answered): silently resync
        await this.refresh().catch((e) => this.fail(e));
      } else {
        this.fail(err);
      }
    } finally {
      this.busy = false;
    }
  }

  /** Re-attempt after a network failure; session state is server-side, so
   * nothing is lost. */
  async retry(): Promise<void> {
    if (!this.sessionId) return;
    this.phase = "loading";
    this.emit();
    try {
      await this.refresh();
    } catch (err) {
      this.fail(err);
    }
  }

  private fail(err: unknown): void {
    this.phase = "error";
    this.errorMessage = err instanceof Error ? err.message : String(err);
    this.emit();
  }
}
