// Keyboard/pointer mapping to protocol messages. The reducers are pure so
// the fuzz tests can drive them without a DOM; main.ts wires real events.

import { ClickMode, ClientMessage } from "./protocol.js";

export interface InputState {
  held: Set<string>;
  mode: ClickMode;
  recording: boolean;
  gripperOpen: boolean;
  resetCount: number;
}

export const initialInputState = (): InputState => ({
  held: new Set(),
  mode: "push",
  recording: false,
  gripperOpen: true,
  resetCount: 0,
});

const MODE_KEYS: Record<string, ClickMode> = {
  "1": "push",
  "2": "pull",
  "3": "pick",
  "4": "place",
};

const DRIVE_KEYS = ["w", "a", "s", "d"];

export function driveFromHeld(held: Set<string>): { forward: number; turn: number } {
  const forward = (held.has("w") ? 1 : 0) + (held.has("s") ? -1 : 0);
  const turn = (held.has("a") ? 1 : 0) + (held.has("d") ? -1 : 0);
  return { forward, turn };
}

export interface Reduction {
  state: InputState;
  messages: ClientMessage[];
}

// Key events mutate the state; cmd_drive emission is owned entirely by the
// DriveScheduler so the 10 Hz bound holds no matter how keys are mashed.
export function reduceKeyDown(state: InputState, key: string): Reduction {
  const k = key.toLowerCase();
  const messages: ClientMessage[] = [];
  const next: InputState = { ...state, held: new Set(state.held) };
  if (DRIVE_KEYS.includes(k)) {
    next.held.add(k);
  } else if (k in MODE_KEYS) {
    next.mode = MODE_KEYS[k];
  } else if (k === "g") {
    next.gripperOpen = !next.gripperOpen;
    messages.push({ type: "cmd_gripper", open: next.gripperOpen });
  } else if (k === "r") {
    next.resetCount = next.resetCount + 1;
    messages.push({ type: "reset", seed: next.resetCount });
  } else if (k === " " || k === "space") {
    next.recording = !next.recording;
    messages.push({ type: next.recording ? "record_start" : "record_stop" });
  }
  // unbound keys are ignored
  return { state: next, messages };
}

export function reduceKeyUp(state: InputState, key: string): Reduction {
  const k = key.toLowerCase();
  const next: InputState = { ...state, held: new Set(state.held) };
  next.held.delete(k);
  return { state: next, messages: [] };
}

export function reduceClick(
  state: InputState,
  u: number,
  v: number,
  width: number,
  height: number,
): Reduction {
  const cu = Math.max(0, Math.min(width - 1, Math.round(u)));
  const cv = Math.max(0, Math.min(height - 1, Math.round(v)));
  return {
    state,
    messages: [{ type: "cmd_click", u: cu, v: cv, mode: state.mode }],
  };
}

// Changed drive values go out immediately; a held non-zero drive repeats at
// 10 Hz. Server-side last-writer-wins folding makes resends safe.
export class DriveScheduler {
  private lastSent: { forward: number; turn: number } | null = null;
  private lastTime = -Infinity;

  constructor(private minIntervalMs = 100) {}

  poll(held: Set<string>, nowMs: number): ClientMessage | null {
    const drive = driveFromHeld(held);
    const changed =
      this.lastSent === null ||
      drive.forward !== this.lastSent.forward ||
      drive.turn !== this.lastSent.turn;
    const idle = drive.forward === 0 && drive.turn === 0;
    const due = nowMs - this.lastTime >= this.minIntervalMs;
    if (changed || (!idle && due)) {
      this.lastSent = drive;
      this.lastTime = nowMs;
      return { type: "cmd_drive", ...drive };
    }
    return null;
  }
}
