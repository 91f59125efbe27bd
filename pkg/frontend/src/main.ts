// Browser entry point: wires the connection, input reducers, frame store and
// HUD onto the page canvas.

import { Connection } from "./connection.js";
import {
  DriveScheduler,
  initialInputState,
  reduceClick,
  reduceKeyDown,
  reduceKeyUp,
} from "./input.js";
import { describeAck, drawHud, initialHudState } from "./hud.js";
import { ClientMessage, FrameMessage } from "./protocol.js";
import { CanvasViewer, FrameStore } from "./viewer.js";

const canvas = document.getElementById("view") as HTMLCanvasElement;
const endpointInput = document.getElementById("endpoint") as HTMLInputElement;
const connectBtn = document.getElementById("connect") as HTMLButtonElement;
const hudCanvas = document.getElementById("hud") as HTMLCanvasElement;
const hudCtx = hudCanvas.getContext("2d")!;

let input = initialInputState();
const hud = initialHudState();
const frames = new FrameStore();
const viewer = new CanvasViewer(canvas);
const scheduler = new DriveScheduler(100);

let conn: Connection | null = null;
let width = 128;
let height = 128;
let lastSendTime: number | null = null;
let lastFrameWall = performance.now();

function send(msgs: ClientMessage[]): void {
  for (const m of msgs) {
    if (conn?.send(m)) lastSendTime = performance.now();
  }
}

function connect(): void {
  conn?.close();
  conn = new Connection(endpointInput.value, {
    onHello: (hello) => {
      width = hello.width;
      height = hello.height;
      canvas.width = width;
      canvas.height = height;
      hud.lastError = null;
    },
    onStatus: (status, detail) => {
      hud.connection = status === "error" ? "error" : status;
      if (detail) hud.lastError = detail;
    },
    onMessage: (msg) => {
      if (msg.type === "frame") {
        const frame = msg as FrameMessage;
        if (frames.accept(frame)) {
          hud.tick = frame.tick;
          hud.recording = frame.state.recording;
          lastFrameWall = performance.now();
          if (lastSendTime !== null) {
            hud.latencyMs = performance.now() - lastSendTime;
            lastSendTime = null;
          }
          viewer.show(frame);
        }
      } else if (msg.type === "ack") {
        const line = describeAck(msg as unknown as Record<string, unknown>);
        if (line) hud.lastOutcome = line;
      } else if (msg.type === "error") {
        hud.lastError = `${msg.code}: ${msg.detail}`; // non-fatal toast
      }
    },
  });
  conn.open();
}

connectBtn.addEventListener("click", connect);

window.addEventListener("keydown", (ev) => {
  if (ev.repeat) return;
  if (ev.key.toLowerCase() === "v") {
    viewer.showDepth = !viewer.showDepth;
    return;
  }
  const out = reduceKeyDown(input, ev.key);
  input = out.state;
  hud.mode = input.mode;
  send(out.messages);
  const drive = scheduler.poll(input.held, performance.now());
  if (drive) send([drive]);
});

window.addEventListener("keyup", (ev) => {
  const out = reduceKeyUp(input, ev.key);
  input = out.state;
  const drive = scheduler.poll(input.held, performance.now());
  if (drive) send([drive]);
});

canvas.addEventListener("click", (ev) => {
  const { u, v } = viewer.toFramePixel(ev, width, height);
  const out = reduceClick(input, u, v, width, height);
  send(out.messages);
});

setInterval(() => {
  const drive = scheduler.poll(input.held, performance.now());
  if (drive) send([drive]);
  if (performance.now() - lastFrameWall > 3000 && hud.connection === "connected") {
    hud.connection = "reconnecting"; // stale stream overlay
  }
  hudCtx.clearRect(0, 0, hudCanvas.width, hudCanvas.height);
  drawHud(hudCtx, hud);
}, 50);
