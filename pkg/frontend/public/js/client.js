/** Teleop session client: rate-coupled control, bird-view rendering and the
 * review overlay. One control message goes out per received state message,
 * integrating the keyboard ramps over the inter-state interval. */
import { KeyTracker, updateAction } from "./input.js";
import { parseServerMsg, } from "./protocol.js";
import { buildReview } from "./review.js";
import { drawHud, drawScene, drawState, hudLines, makeTransform, } from "./view.js";
export class TeleopClient {
    constructor(canvas, ctx, catalog, hooks) {
        this.canvas = canvas;
        this.ctx = ctx;
        this.catalog = catalog;
        this.hooks = hooks;
        this.ws = null;
        this.action = { steer: 0, accel: 0 };
        this.keys = new KeyTracker();
        this.lastStateAt = null;
        this.scene = null;
        this.lastStart = null;
        this.recording = false;
        this.transform = makeTransform(canvas.width, canvas.height, 36);
    }
    attachKeyboard(target) {
        target.addEventListener("keydown", (ev) => {
            if (this.keys.handle(ev, true)) {
                ev.preventDefault?.();
            }
        });
        target.addEventListener("keyup", (ev) => this.keys.handle(ev, false));
    }
    connect(url) {
        this.ws = new WebSocket(url);
        this.ws.onopen = () => this.hooks.onStatus("connected");
        this.ws.onclose = () => this.hooks.onStatus("disconnected");
        this.ws.onmessage = (ev) => this.handleMessage(String(ev.data));
    }
    start(msg) {
        this.lastStart = msg;
        this.scene =
            this.catalog.scenes.find((s) => s.scene_id === msg.scene) ?? null;
        this.action = { steer: 0, accel: 0 };
        this.lastStateAt = null;
        this.recording = msg.mode !== "spectate";
        this.hooks.clearReview();
        this.ws?.send(JSON.stringify(msg));
    }
    restart() {
        if (this.lastStart) {
            this.start({ ...this.lastStart, seed: this.lastStart.seed + 1 });
        }
    }
    handleMessage(raw) {
        const msg = parseServerMsg(raw);
        if (msg === null) {
            return;
        }
        if (msg.type === "error") {
            this.hooks.onStatus(`server error: ${msg.reason}`);
            return;
        }
        if (msg.type === "episode_end") {
            this.showReview(msg);
            return;
        }
        this.onState(msg);
    }
    onState(state) {
        const now = performance.now() / 1000;
        let dt = 0.1;
        if (this.lastStateAt !== null) {
            dt = Math.min(0.3, Math.max(0.02, now - this.lastStateAt));
        }
        this.lastStateAt = now;
        // control is coupled to state receipt: exactly one message back
        this.action = updateAction(this.action, this.keys.state, dt);
        this.ws?.send(JSON.stringify({
            type: "control",
            steer: this.action.steer,
            accel: this.action.accel,
        }));
        this.render(state);
    }
    render(state) {
        if (this.scene !== null) {
            drawScene(this.ctx, this.transform, this.scene, this.canvas.width, this.canvas.height);
        }
        drawState(this.ctx, this.transform, state);
        drawHud(this.ctx, hudLines(state, this.action, this.recording));
    }
    showReview(msg) {
        try {
            this.hooks.onReview(buildReview(msg));
        }
        catch (e) {
            this.hooks.onStatus(`malformed episode summary: ${e}`);
            this.restart();
        }
    }
}
