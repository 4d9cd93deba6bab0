// Rollout playback model: frame stepping, scrubbing, and speed control,
// kept free of DOM concerns so it can be driven by any timer.

import { Frame, Trace } from "./api.js";

export class Playback {
  private index = 0;
  playing = false;
  speed = 1; // frames advanced per tick

  constructor(private trace: Trace) {}

  get length(): number {
    return this.trace.frames.length;
  }

  get position(): number {
    return this.index;
  }

  current(): Frame {
    return this.trace.frames[this.index];
  }

  // The statement that produced the current frame's action, as a token
  // range into the program text; null on the initial frame.
  currentSpan(): [number, number] | null {
    return this.current().token_span ?? null;
  }

  seek(index: number): Frame {
    this.index = Math.max(0, Math.min(this.length - 1, Math.floor(index)));
    return this.current();
  }

  tick(): Frame {
    if (this.playing) {
      const next = this.index + this.speed;
      if (next >= this.length) {
        this.index = this.length - 1;
        this.playing = false;
      } else {
        this.index = next;
      }
    }
    return this.current();
  }

  play(speed = 1): void {
    this.speed = Math.max(1, Math.floor(speed));
    if (this.index >= this.length - 1) {
      this.index = 0;
    }
    this.playing = true;
  }

  pause(): void {
    this.playing = false;
  }
}
