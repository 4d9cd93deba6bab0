// Session state machine. Every displayed number comes from an API
// response; edits_used is whatever the server last reported, and budget
// enforcement happens server-side (a 422 here just surfaces the message).

import { ApiClient, ApiError, Trace } from "./api.js";

export interface SessionView {
  task: string;
  session: string | null;
  original: string;
  edited: string;
  origReward: number | null;
  newReward: number | null;
  bestReward: number | null;
  editsUsed: number;
  budget: number;
  diagnostic: string;
  trace: Trace | null;
  loaded: boolean;
}

export function emptyView(): SessionView {
  return {
    task: "",
    session: null,
    original: "",
    edited: "",
    origReward: null,
    newReward: null,
    bestReward: null,
    editsUsed: 0,
    budget: 0,
    diagnostic: "",
    trace: null,
    loaded: false,
  };
}

export class SessionController {
  constructor(private api: ApiClient) {}

  async load(task: string, program: string, budget: number): Promise<SessionView> {
    const view = emptyView();
    view.task = task;
    view.original = program;
    view.edited = program;
    view.budget = budget;
    try {
      const started = await this.api.startSession(task, program, budget);
      view.session = started.session;
      view.origReward = started.orig_reward;
      view.newReward = started.orig_reward;
      view.bestReward = started.best_reward;
      view.trace = started;
      view.loaded = true;
    } catch (err) {
      view.diagnostic = describeError(err);
      view.loaded = false;
    }
    return view;
  }

  // On failure the previous rewards and trace are kept untouched; only the
  // diagnostic changes.
  async submit(view: SessionView, edited: string): Promise<SessionView> {
    if (!view.session) {
      return { ...view, diagnostic: "no session loaded" };
    }
    try {
      const result = await this.api.submit(view.session, edited);
      return {
        ...view,
        edited,
        newReward: result.reward,
        bestReward: result.best_so_far,
        editsUsed: result.distance,
        diagnostic: "",
        trace: result,
      };
    } catch (err) {
      return { ...view, edited, diagnostic: describeError(err) };
    }
  }
}

export function describeError(err: unknown): string {
  if (err instanceof ApiError) {
    if (err.detail.error === "syntax") {
      return `syntax error at token ${err.detail.index}: ${err.detail.message}`;
    }
    if (err.detail.error === "budget") {
      return err.detail.message;
    }
    return err.detail.message;
  }
  return `request failed: ${String(err)}`;
}
