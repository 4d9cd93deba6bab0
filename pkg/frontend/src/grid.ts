// Canvas renderer for one grid frame: walls, marker counts, agent heading.

import { Frame, Trace } from "./api.js";

const WALL = "#4a4a55";
const FLOOR = "#f4f1e8";
const GRID_LINE = "#d8d4c8";
const MARKER = "#2f855a";
const AGENT = "#c53030";

const HEADINGS: Record<string, number> = {
  north: -Math.PI / 2,
  east: 0,
  south: Math.PI / 2,
  west: Math.PI,
};

export function renderFrame(
  ctx: CanvasRenderingContext2D,
  trace: Trace,
  frame: Frame,
): void {
  const cell = Math.floor(Math.min(
    ctx.canvas.width / trace.width,
    ctx.canvas.height / trace.height,
  ));
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  for (let r = 0; r < trace.height; r++) {
    for (let c = 0; c < trace.width; c++) {
      ctx.fillStyle = trace.walls[r][c] ? WALL : FLOOR;
      ctx.fillRect(c * cell, r * cell, cell, cell);
      ctx.strokeStyle = GRID_LINE;
      ctx.strokeRect(c * cell, r * cell, cell, cell);
      const count = frame.markers[r][c];
      if (count > 0 && !trace.walls[r][c]) {
        ctx.fillStyle = MARKER;
        ctx.beginPath();
        ctx.arc((c + 0.5) * cell, (r + 0.5) * cell, cell * 0.28, 0, 2 * Math.PI);
        ctx.fill();
        if (count > 1) {
          ctx.fillStyle = "#fff";
          ctx.font = `${Math.max(8, cell * 0.4)}px sans-serif`;
          ctx.textAlign = "center";
          ctx.textBaseline = "middle";
          ctx.fillText(String(count), (c + 0.5) * cell, (r + 0.5) * cell);
        }
      }
    }
  }
  // agent as a triangle pointing along its heading
  const cx = (frame.agent_col + 0.5) * cell;
  const cy = (frame.agent_row + 0.5) * cell;
  const angle = HEADINGS[frame.agent_dir] ?? 0;
  ctx.save();
  ctx.translate(cx, cy);
  ctx.rotate(angle);
  ctx.fillStyle = AGENT;
  ctx.beginPath();
  ctx.moveTo(cell * 0.35, 0);
  ctx.lineTo(-cell * 0.25, cell * 0.25);
  ctx.lineTo(-cell * 0.25, -cell * 0.25);
  ctx.closePath();
  ctx.fill();
  ctx.restore();
}
