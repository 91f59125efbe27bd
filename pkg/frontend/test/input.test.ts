import { describe, expect, it } from "vitest";

import {
  DriveScheduler,
  driveFromHeld,
  initialInputState,
  reduceClick,
  reduceKeyDown,
  reduceKeyUp,
} from "../src/input.js";

describe("key mapping", () => {
  it("maps W/S to forward and A/D to turn", () => {
    let s = initialInputState();
    s = reduceKeyDown(s, "w").state;
    expect(driveFromHeld(s.held)).toEqual({ forward: 1, turn: 0 });
    s = reduceKeyDown(s, "d").state;
    expect(driveFromHeld(s.held)).toEqual({ forward: 1, turn: -1 });
    s = reduceKeyUp(s, "w").state;
    s = reduceKeyDown(s, "s").state;
    expect(driveFromHeld(s.held)).toEqual({ forward: -1, turn: -1 });
    s = reduceKeyUp(s, "s").state;
    s = reduceKeyUp(s, "d").state;
    expect(driveFromHeld(s.held)).toEqual({ forward: 0, turn: 0 });
  });

  it("mode keys 1-4 select the click mode", () => {
    let s = initialInputState();
    for (const [key, mode] of [["1", "push"], ["2", "pull"], ["3", "pick"],
                               ["4", "place"]] as const) {
      s = reduceKeyDown(s, key).state;
      expect(s.mode).toBe(mode);
    }
  });

  it("space toggles recording with start/stop messages", () => {
    let s = initialInputState();
    const first = reduceKeyDown(s, " ");
    expect(first.messages).toEqual([{ type: "record_start" }]);
    const second = reduceKeyDown(first.state, " ");
    expect(second.messages).toEqual([{ type: "record_stop" }]);
  });

  it("gripper toggles open state", () => {
    const out = reduceKeyDown(initialInputState(), "g");
    expect(out.messages).toEqual([{ type: "cmd_gripper", open: false }]);
    const out2 = reduceKeyDown(out.state, "g");
    expect(out2.messages).toEqual([{ type: "cmd_gripper", open: true }]);
  });

  it("unbound keys are ignored", () => {
    const out = reduceKeyDown(initialInputState(), "q");
    expect(out.messages).toEqual([]);
  });

  it("clicks clamp to the frame and carry the current mode", () => {
    let s = reduceKeyDown(initialInputState(), "3").state;
    const out = reduceClick(s, 500.7, -3, 128, 128);
    expect(out.messages).toEqual([
      { type: "cmd_click", u: 127, v: 0, mode: "pick" },
    ]);
  });
});

describe("drive scheduler", () => {
  it("sends changes immediately and repeats held drives at 10 Hz", () => {
    const sched = new DriveScheduler(100);
    const held = new Set<string>();
    expect(sched.poll(held, 0)).toEqual({ type: "cmd_drive", forward: 0, turn: 0 });
    held.add("w");
    expect(sched.poll(held, 10)).toEqual({ type: "cmd_drive", forward: 1, turn: 0 });
    // held but not due yet: silent
    expect(sched.poll(held, 50)).toBeNull();
    expect(sched.poll(held, 111)).toEqual({ type: "cmd_drive", forward: 1, turn: 0 });
    // ~1 second of holding stays around 10 messages
    let count = 0;
    for (let t = 120; t <= 1120; t += 16) {
      if (sched.poll(held, t)) count++;
    }
    expect(count).toBeGreaterThanOrEqual(9);
    expect(count).toBeLessThanOrEqual(11);
    held.delete("w");
    expect(sched.poll(held, 1125)).toEqual({
      type: "cmd_drive",
      forward: 0,
      turn: 0,
    });
    // idle: no repeats
    expect(sched.poll(held, 5000)).toBeNull();
  });
});
