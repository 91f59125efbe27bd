// Wire protocol shared with the simulation server: JSON text frames over one
// long-lived websocket. The client may send exactly these message types.

export type ClickMode = "push" | "pull" | "pick" | "place";

export const CLICK_MODES: ClickMode[] = ["push", "pull", "pick", "place"];

export type ClientMessage =
  | { type: "cmd_drive"; forward: number; turn: number }
  | { type: "cmd_click"; u: number; v: number; mode: ClickMode }
  | { type: "cmd_gripper"; open: boolean }
  | { type: "record_start" }
  | { type: "record_stop" }
  | { type: "reset"; seed: number }
  | { type: "randomize"; axes: string[] };

export const CLIENT_TYPES = [
  "cmd_drive",
  "cmd_click",
  "cmd_gripper",
  "record_start",
  "record_stop",
  "reset",
  "randomize",
] as const;

const RANDOMIZE_AXES = new Set(["materials", "objects", "dynamics"]);

const isFiniteNumber = (v: unknown): v is number =>
  typeof v === "number" && Number.isFinite(v);

export function isClientMessage(msg: unknown): msg is ClientMessage {
  if (typeof msg !== "object" || msg === null) return false;
  const m = msg as Record<string, unknown>;
  switch (m.type) {
    case "cmd_drive":
      return (
        isFiniteNumber(m.forward) &&
        isFiniteNumber(m.turn) &&
        Math.abs(m.forward) <= 1 &&
        Math.abs(m.turn) <= 1
      );
    case "cmd_click":
      return (
        Number.isInteger(m.u) &&
        Number.isInteger(m.v) &&
        (m.u as number) >= 0 &&
        (m.v as number) >= 0 &&
        CLICK_MODES.includes(m.mode as ClickMode)
      );
    case "cmd_gripper":
      return typeof m.open === "boolean";
    case "record_start":
    case "record_stop":
      return true;
    case "reset":
      return Number.isInteger(m.seed);
    case "randomize":
      return (
        Array.isArray(m.axes) &&
        m.axes.every((a) => typeof a === "string" && RANDOMIZE_AXES.has(a))
      );
    default:
      return false;
  }
}

export interface HelloMessage {
  type: "hello";
  config_hash: string;
  scene_hash: string;
  seed: number;
  tick_rate_hz: number;
  width: number;
  height: number;
}

export interface FrameState {
  x: number;
  y: number;
  yaw: number;
  gripper_open: boolean;
  attached: number | null;
  recording: boolean;
}

export interface FrameMessage {
  type: "frame";
  tick: number;
  sim_time: number;
  rgb?: string; // base64 PNG
  depth?: string;
  state: FrameState;
}

export interface AckMessage {
  type: "ack";
  tick: number;
  cmd: string;
  [extra: string]: unknown;
}

export interface ErrorMessage {
  type: "error";
  code: string;
  detail: string;
}

export type ServerMessage = HelloMessage | FrameMessage | AckMessage | ErrorMessage;

export function parseServerMessage(raw: string): ServerMessage | null {
  let msg: unknown;
  try {
    msg = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof msg !== "object" || msg === null) return null;
  const t = (msg as { type?: unknown }).type;
  if (t === "hello" || t === "frame" || t === "ack" || t === "error") {
    return msg as ServerMessage;
  }
  return null;
}
