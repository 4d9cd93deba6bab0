// DOM wiring: editor, reward boxes, diagnostics, and rollout playback.

import { ApiClient } from "./api.js";
import { renderFrame } from "./grid.js";
import { Playback } from "./playback.js";
import { SessionController, SessionView, emptyView } from "./session.js";

const api = new ApiClient("");
const controller = new SessionController(api);

const el = {
  task: document.getElementById("task") as HTMLSelectElement,
  program: document.getElementById("program") as HTMLTextAreaElement,
  budget: document.getElementById("budget") as HTMLSelectElement,
  load: document.getElementById("load") as HTMLButtonElement,
  submit: document.getElementById("submit") as HTMLButtonElement,
  origReward: document.getElementById("orig-reward") as HTMLElement,
  newReward: document.getElementById("new-reward") as HTMLElement,
  bestReward: document.getElementById("best-reward") as HTMLElement,
  edits: document.getElementById("edits") as HTMLElement,
  diagnostic: document.getElementById("diagnostic") as HTMLElement,
  canvas: document.getElementById("grid") as HTMLCanvasElement,
  play: document.getElementById("play") as HTMLButtonElement,
  scrub: document.getElementById("scrub") as HTMLInputElement,
  speed: document.getElementById("speed") as HTMLSelectElement,
  frameLabel: document.getElementById("frame-label") as HTMLElement,
  highlighted: document.getElementById("highlighted") as HTMLElement,
};

let view: SessionView = emptyView();
let playback: Playback | null = null;
let timer: number | null = null;

function fmt(x: number | null): string {
  return x === null ? "-" : x.toFixed(2);
}

function renderView(): void {
  el.origReward.textContent = fmt(view.origReward);
  el.newReward.textContent = fmt(view.newReward);
  el.bestReward.textContent = fmt(view.bestReward);
  el.edits.textContent = `${view.editsUsed} / ${view.budget}`;
  el.diagnostic.textContent = view.diagnostic || "none";
  el.diagnostic.classList.toggle("error", view.diagnostic !== "");
  el.submit.disabled = !view.loaded;
}

function renderPlayback(): void {
  if (!playback || !view.trace) return;
  const frame = playback.current();
  const ctx = el.canvas.getContext("2d");
  if (ctx) renderFrame(ctx, view.trace, frame);
  el.scrub.max = String(playback.length - 1);
  el.scrub.value = String(playback.position);
  el.frameLabel.textContent =
    `${playback.position}/${playback.length - 1}` +
    (frame.action ? ` ${frame.action}` : "");
  highlightTokens(playback.currentSpan());
}

function highlightTokens(span: [number, number] | null): void {
  const tokens = view.edited.trim().split(/\s+/);
  el.highlighted.innerHTML = "";
  tokens.forEach((tok, i) => {
    const node = document.createElement("span");
    node.textContent = tok + " ";
    if (span && i >= span[0] && i < span[1]) node.className = "active-token";
    el.highlighted.appendChild(node);
  });
}

function resetPlayback(): void {
  if (timer !== null) window.clearInterval(timer);
  playback = view.trace ? new Playback(view.trace) : null;
  if (playback) {
    timer = window.setInterval(() => {
      if (playback && playback.playing) {
        playback.tick();
        renderPlayback();
      }
    }, 120);
  }
  renderPlayback();
}

async function loadTasks(): Promise<void> {
  try {
    const tasks = await api.tasks();
    el.task.innerHTML = "";
    for (const t of tasks) {
      const option = document.createElement("option");
      option.value = t.kind;
      option.textContent = `${t.kind} (${t.height}x${t.width})`;
      el.task.appendChild(option);
    }
  } catch {
    view.diagnostic = "API unreachable; start the server and reload";
    renderView();
    el.load.disabled = true;
  }
}

el.load.addEventListener("click", async () => {
  el.load.disabled = true;
  view = await controller.load(
    el.task.value,
    el.program.value.trim(),
    parseInt(el.budget.value, 10),
  );
  el.load.disabled = false;
  renderView();
  resetPlayback();
});

el.submit.addEventListener("click", async () => {
  el.submit.disabled = true;
  const previousTrace = view.trace;
  view = await controller.submit(view, el.program.value.trim());
  el.submit.disabled = false;
  renderView();
  if (view.trace !== previousTrace) resetPlayback();
});

el.play.addEventListener("click", () => {
  if (!playback) return;
  if (playback.playing) {
    playback.pause();
    el.play.textContent = "play";
  } else {
    playback.play(parseInt(el.speed.value, 10));
    el.play.textContent = "pause";
  }
});

el.scrub.addEventListener("input", () => {
  if (!playback) return;
  playback.pause();
  el.play.textContent = "play";
  playback.seek(parseInt(el.scrub.value, 10));
  renderPlayback();
});

loadTasks();
renderView();
