import { describe, expect, it } from "vitest";
import { Trace } from "../src/api.js";
import { Playback } from "../src/playback.js";

function trace(nActions: number): Trace {
  const frames = [];
  for (let i = 0; i <= nActions; i++) {
    frames.push({
      agent_row: 1,
      agent_col: 1 + i,
      agent_dir: "east" as const,
      markers: [[0]],
      action: i === 0 ? null : "move",
      node_id: i === 0 ? null : i - 1,
      token_span: i === 0 ? undefined : [3 + i, 4 + i] as [number, number],
    });
  }
  return {
    width: 8, height: 3, walls: [[false]], frames,
    actions: Array(nActions).fill("move"), terminated: "program-end",
  };
}

describe("playback", () => {
  it("has one more frame than actions", () => {
    const p = new Playback(trace(5));
    expect(p.length).toBe(6);
  });

  it("scrubbing to zero shows the initial grid", () => {
    const p = new Playback(trace(4));
    p.seek(3);
    const frame = p.seek(0);
    expect(frame.action).toBeNull();
    expect(frame.agent_col).toBe(1);
  });

  it("clamps seeks to the frame range", () => {
    const p = new Playback(trace(2));
    expect(p.seek(99).agent_col).toBe(3);
    expect(p.seek(-5).agent_col).toBe(1);
  });

  it("ticks through frames and stops at the end", () => {
    const p = new Playback(trace(3));
    p.play();
    const seen = [p.position];
    for (let i = 0; i < 10; i++) {
      p.tick();
      seen.push(p.position);
    }
    expect(seen).toContain(3);
    expect(p.playing).toBe(false);
    expect(p.position).toBe(3);
  });

  it("double speed skips every other frame", () => {
    const p = new Playback(trace(6));
    p.play(2);
    p.tick();
    expect(p.position).toBe(2);
    p.tick();
    expect(p.position).toBe(4);
  });

  it("exposes the emitting statement's token span per frame", () => {
    const p = new Playback(trace(2));
    expect(p.currentSpan()).toBeNull();
    p.seek(1);
    expect(p.currentSpan()).toEqual([4, 5]);
  });

  it("replays from the start when played at the end", () => {
    const p = new Playback(trace(2));
    p.seek(2);
    p.play();
    expect(p.position).toBe(0);
  });
});
