import { describe, expect, it } from "vitest";

import {
  Action,
  DECAY_RATE,
  KeyState,
  KeyTracker,
  RAMP_RATE,
  updateAction,
} from "../src/input.js";

const IDLE: KeyState = { left: false, right: false, up: false, down: false };

function hold(partial: Partial<KeyState>): KeyState {
  return { ...IDLE, ...partial };
}

function run(action: Action, keys: KeyState, seconds: number, dt = 0.1): Action {
  let out = action;
  for (let t = 0; t < Math.round(seconds / dt); t++) {
    out = updateAction(out, keys, dt);
  }
  return out;
}

describe("keyboard ramps", () => {
  it("right held 0.5 s from rest saturates steer at +1 (server sign)", () => {
    const out = run({ steer: 0, accel: 0 }, hold({ right: true }), 0.5);
    expect(out.steer).toBeCloseTo(RAMP_RATE * 0.5, 10);
    expect(out.steer).toBe(1.0);
    expect(out.accel).toBe(0);
  });

  it("left held ramps negative", () => {
    const out = run({ steer: 0, accel: 0 }, hold({ left: true }), 0.25, 0.05);
    expect(out.steer).toBeCloseTo(-0.5, 10);
  });

  it("released keys decay to exactly zero", () => {
    let out: Action = { steer: 1.0, accel: -1.0 };
    out = run(out, IDLE, 1.0);
    expect(out.steer).toBe(0);
    expect(out.accel).toBe(0);
    // decay rate: 1.0 -> 0 takes 1/DECAY_RATE seconds
    const partial = run({ steer: 1.0, accel: 0 }, IDLE, 0.2);
    expect(partial.steer).toBeCloseTo(1.0 - DECAY_RATE * 0.2, 10);
  });

  it("conflicting keys hold the current value", () => {
    const start: Action = { steer: 0.4, accel: -0.3 };
    const out = updateAction(start, hold({ up: true, down: true, left: true,
                                           right: true }), 0.1);
    expect(out).toEqual(start);
  });

  it("up/down drive the acceleration axis", () => {
    const up = run({ steer: 0, accel: 0 }, hold({ up: true }), 0.2);
    expect(up.accel).toBeCloseTo(0.4, 10);
    const down = run({ steer: 0, accel: 0 }, hold({ down: true }), 0.2);
    expect(down.accel).toBeCloseTo(-0.4, 10);
  });

  it("values never leave [-1, 1]", () => {
    const out = run({ steer: 0, accel: 0 }, hold({ right: true, up: true }), 3);
    expect(out.steer).toBe(1.0);
    expect(out.accel).toBe(1.0);
  });
});

describe("key tracker", () => {
  it("maps arrows and wasd, ignores others", () => {
    const t = new KeyTracker();
    expect(t.handle({ key: "ArrowRight" }, true)).toBe(true);
    expect(t.state.right).toBe(true);
    expect(t.handle({ key: "d" }, false)).toBe(true);
    expect(t.state.right).toBe(false);
    expect(t.handle({ key: "x" }, true)).toBe(false);
  });
});
