// Overlay state and rendering: tick, latency, interaction mode, recording
// badge and the last push outcome.

export interface HudState {
  tick: number;
  latencyMs: number | null;
  mode: string;
  recording: boolean;
  connection: "connecting" | "connected" | "reconnecting" | "error";
  lastOutcome: string | null;
  lastError: string | null;
}

export const initialHudState = (): HudState => ({
  tick: 0,
  latencyMs: null,
  mode: "push",
  recording: false,
  connection: "connecting",
  lastOutcome: null,
  lastError: null,
});

export function describeAck(ack: Record<string, unknown>): string | null {
  if (ack.cmd === "cmd_click" && "moved" in ack) {
    const d = typeof ack.displacement === "number" ? ack.displacement : 0;
    return ack.moved ? `moved ${d.toFixed(2)} m` : "did not move";
  }
  if (ack.cmd === "cmd_click" && "grasped" in ack) {
    return ack.grasped ? `grasped object ${ack.attached}` : "grasp missed";
  }
  if (ack.cmd === "cmd_click" && "released" in ack) {
    return "released";
  }
  return null;
}

export function hudLines(s: HudState): string[] {
  const lines = [
    `tick ${s.tick}`,
    s.latencyMs === null ? "latency --" : `latency ${s.latencyMs.toFixed(0)} ms`,
    `mode ${s.mode}`,
  ];
  if (s.connection !== "connected") lines.push(s.connection.toUpperCase());
  if (s.lastOutcome) lines.push(s.lastOutcome);
  if (s.lastError) lines.push(`! ${s.lastError}`);
  return lines;
}

export function drawHud(ctx: CanvasRenderingContext2D, s: HudState): void {
  ctx.save();
  ctx.font = "13px monospace";
  ctx.textBaseline = "top";
  let y = 6;
  for (const line of hudLines(s)) {
    ctx.fillStyle = "rgba(0,0,0,0.55)";
    ctx.fillRect(4, y - 2, ctx.measureText(line).width + 8, 17);
    ctx.fillStyle = "#e8e8e8";
    ctx.fillText(line, 8, y);
    y += 18;
  }
  if (s.recording) {
    ctx.fillStyle = "#d62828";
    ctx.beginPath();
    ctx.arc(ctx.canvas.width - 16, 16, 7, 0, Math.PI * 2);
    ctx.fill();
  }
  ctx.restore();
}
