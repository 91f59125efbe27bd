import { describe, expect, it } from "vitest";

import { FrameStore } from "../src/viewer.js";
import type { FrameMessage } from "../src/protocol.js";

const frame = (tick: number): FrameMessage => ({
  type: "frame",
  tick,
  sim_time: tick / 20,
  state: { x: 0, y: 0, yaw: 0, gripper_open: true, attached: null,
           recording: false },
});

describe("frame ordering", () => {
  it("accepts monotonically increasing ticks", () => {
    const store = new FrameStore();
    expect(store.accept(frame(1))).toBe(true);
    expect(store.accept(frame(2))).toBe(true);
    expect(store.accept(frame(5))).toBe(true);
    expect(store.lastTick).toBe(5);
    expect(store.dropped).toBe(0);
  });

  it("drops out-of-order and duplicate ticks", () => {
    const store = new FrameStore();
    store.accept(frame(3));
    expect(store.accept(frame(2))).toBe(false);
    expect(store.accept(frame(3))).toBe(false);
    expect(store.lastTick).toBe(3);
    expect(store.dropped).toBe(2);
    expect(store.latest?.tick).toBe(3);
  });
});
