/** Keyboard-to-control mapping with smooth ramps.
 *
 * Held arrows ramp the axis toward +-1 at RAMP_RATE units/s; a released
 * axis decays toward 0 at DECAY_RATE units/s. Right arrow means positive
 * steer (the server's sign convention); up means positive acceleration.
 * Conflicting keys on one axis hold the current value. One control message
 * is derived per received state message.
 */
export const RAMP_RATE = 2.0;
export const DECAY_RATE = 3.0;
function clip(x) {
    return Math.min(1.0, Math.max(-1.0, x));
}
function rampAxis(value, negative, positive, dt) {
    if (negative && positive) {
        return value; // conflicting keys cancel: hold
    }
    if (positive) {
        return clip(value + RAMP_RATE * dt);
    }
    if (negative) {
        return clip(value - RAMP_RATE * dt);
    }
    // decay toward zero without overshooting it
    if (value > 0) {
        return Math.max(0, value - DECAY_RATE * dt);
    }
    if (value < 0) {
        return Math.min(0, value + DECAY_RATE * dt);
    }
    return 0;
}
export function updateAction(prev, keys, dt) {
    return {
        steer: rampAxis(prev.steer, keys.left, keys.right, dt),
        accel: rampAxis(prev.accel, keys.down, keys.up, dt),
    };
}
const KEY_MAP = {
    ArrowLeft: "left",
    ArrowRight: "right",
    ArrowUp: "up",
    ArrowDown: "down",
    a: "left",
    d: "right",
    w: "up",
    s: "down",
};
/** Tracks the held-key set from DOM keyboard events. */
export class KeyTracker {
    constructor() {
        this.state = { left: false, right: false, up: false, down: false };
    }
    handle(ev, pressed) {
        const axis = KEY_MAP[ev.key];
        if (axis === undefined) {
            return false;
        }
        this.state[axis] = pressed;
        return true;
    }
}
