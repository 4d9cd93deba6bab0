// Session state machine against a faked transport. The fake mirrors the
// server's status-code contract: 400 on syntax errors, 422 over budget.

import { describe, expect, it } from "vitest";
import { ApiClient, FetchLike } from "../src/api.js";
import { SessionController, describeError, emptyView } from "../src/session.js";
import { ApiError } from "../src/api.js";

const TRACE = {
  width: 4,
  height: 4,
  walls: [[true, true, true, true], [true, false, false, true],
          [true, false, false, true], [true, true, true, true]],
  frames: [
    { agent_row: 1, agent_col: 1, agent_dir: "east", markers: zeros(), action: null, node_id: null },
    { agent_row: 1, agent_col: 2, agent_dir: "east", markers: zeros(), action: "move", node_id: 0, token_span: [3, 4] as [number, number] },
  ],
  actions: ["move"],
  terminated: "program-end",
};

function zeros(): number[][] {
  return [[0, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]];
}

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

function fakeServer(): FetchLike {
  return async (url, init) => {
    const body = init?.body ? JSON.parse(String(init.body)) : {};
    if (url.endsWith("/session/start")) {
      return jsonResponse(200, {
        ...TRACE, session: "s1", orig_reward: 0.25, best_reward: 0.25,
        budget: body.budget,
      });
    }
    if (url.endsWith("/session/submit")) {
      if (body.edited.includes("WHILE move")) {
        return jsonResponse(400, {
          detail: { error: "syntax", index: 4, message: "expected 'c('" },
        });
      }
      if (body.edited.split(" ").length > 12) {
        return jsonResponse(422, {
          detail: { error: "budget", distance: 6, budget: 5,
                    message: "edit distance 6 exceeds the 5-statement budget" },
        });
      }
      return jsonResponse(200, {
        ...TRACE, reward: 1.0, distance: 3, within_budget: true,
        best_so_far: 1.0, orig_reward: 0.25,
      });
    }
    return jsonResponse(404, { detail: { error: "http", message: "not found" } });
  };
}

function controller(): SessionController {
  return new SessionController(new ApiClient("http://fake", fakeServer()));
}

describe("session lifecycle", () => {
  it("loads a session and shows the original reward", async () => {
    const view = await controller().load("FourCorner", "DEF run m( move m)", 5);
    expect(view.loaded).toBe(true);
    expect(view.origReward).toBe(0.25);
    expect(view.newReward).toBe(0.25);
    expect(view.bestReward).toBe(0.25);
    expect(view.editsUsed).toBe(0);
    expect(view.trace?.frames.length).toBe(view.trace!.actions.length + 1);
  });

  it("updates rewards and best on a successful submit", async () => {
    const c = controller();
    let view = await c.load("FourCorner", "DEF run m( move m)", 5);
    view = await c.submit(view, "DEF run m( move move m)");
    expect(view.newReward).toBe(1.0);
    expect(view.bestReward).toBe(1.0);
    expect(view.editsUsed).toBe(3);
    expect(view.diagnostic).toBe("");
  });

  it("keeps rewards untouched and surfaces budget rejections", async () => {
    const c = controller();
    let view = await c.load("FourCorner", "DEF run m( move m)", 5);
    const before = { ...view };
    view = await c.submit(view, "DEF run m( " + "move ".repeat(12) + "m)");
    expect(view.diagnostic).toContain("exceeds the 5-statement budget");
    expect(view.newReward).toBe(before.newReward);
    expect(view.bestReward).toBe(before.bestReward);
    expect(view.trace).toBe(before.trace);
  });

  it("keeps rewards untouched and surfaces syntax errors", async () => {
    const c = controller();
    let view = await c.load("FourCorner", "DEF run m( move m)", 5);
    view = await c.submit(view, "DEF run m( WHILE move m)");
    expect(view.diagnostic).toContain("syntax error at token 4");
    expect(view.newReward).toBe(0.25);
  });

  it("reports API failures on load instead of throwing", async () => {
    const failing: FetchLike = async () =>
      jsonResponse(500, { detail: { error: "http", message: "boom" } });
    const c = new SessionController(new ApiClient("http://fake", failing));
    const view = await c.load("Maze", "DEF run m( move m)", 3);
    expect(view.loaded).toBe(false);
    expect(view.diagnostic).toContain("boom");
  });
});

describe("error formatting", () => {
  it("formats syntax, budget, and generic errors", () => {
    expect(describeError(new ApiError(400, {
      error: "syntax", index: 2, message: "bad token",
    }))).toBe("syntax error at token 2: bad token");
    expect(describeError(new ApiError(422, {
      error: "budget", message: "over budget",
    }))).toBe("over budget");
    expect(describeError(new Error("socket closed"))).toContain("socket closed");
  });

  it("empty view starts blank", () => {
    const view = emptyView();
    expect(view.loaded).toBe(false);
    expect(view.origReward).toBeNull();
  });
});
