/** Teleop session client: rate-coupled control, bird-view rendering and the
 * review overlay. One control message goes out per received state message,
 * integrating the keyboard ramps over the inter-state interval. */

import { Action, KeyTracker, updateAction } from "./input.js";
import {
  Catalog,
  CatalogScene,
  EpisodeEndMsg,
  StartMsg,
  StateMsg,
  parseServerMsg,
} from "./protocol.js";
import { buildReview, ReviewModel } from "./review.js";
import {
  Ctx2D,
  drawHud,
  drawScene,
  drawState,
  hudLines,
  makeTransform,
  Transform,
} from "./view.js";

export interface ClientHooks {
  onReview(model: ReviewModel): void;
  onStatus(text: string): void;
  clearReview(): void;
}

export class TeleopClient {
  private ws: WebSocket | null = null;
  private action: Action = { steer: 0, accel: 0 };
  private keys = new KeyTracker();
  private lastStateAt: number | null = null;
  private scene: CatalogScene | null = null;
  private transform: Transform;
  private lastStart: StartMsg | null = null;
  private recording = false;

  constructor(
    private readonly canvas: { width: number; height: number },
    private readonly ctx: Ctx2D,
    private readonly catalog: Catalog,
    private readonly hooks: ClientHooks,
  ) {
    this.transform = makeTransform(canvas.width, canvas.height, 36);
  }

  attachKeyboard(target: {
    addEventListener(type: string, cb: (ev: KeyboardEvent) => void): void;
  }): void {
    target.addEventListener("keydown", (ev) => {
      if (this.keys.handle(ev, true)) {
        ev.preventDefault?.();
      }
    });
    target.addEventListener("keyup", (ev) => this.keys.handle(ev, false));
  }

  connect(url: string): void {
    this.ws = new WebSocket(url);
    this.ws.onopen = () => this.hooks.onStatus("connected");
    this.ws.onclose = () => this.hooks.onStatus("disconnected");
    this.ws.onmessage = (ev) => this.handleMessage(String(ev.data));
  }

  start(msg: StartMsg): void {
    this.lastStart = msg;
    this.scene =
      this.catalog.scenes.find((s) => s.scene_id === msg.scene) ?? null;
    this.action = { steer: 0, accel: 0 };
    this.lastStateAt = null;
    this.recording = msg.mode !== "spectate";
    this.hooks.clearReview();
    this.ws?.send(JSON.stringify(msg));
  }

  restart(): void {
    if (this.lastStart) {
      this.start({ ...this.lastStart, seed: this.lastStart.seed + 1 });
    }
  }

  private handleMessage(raw: string): void {
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

  private onState(state: StateMsg): void {
    const now = performance.now() / 1000;
    let dt = 0.1;
    if (this.lastStateAt !== null) {
      dt = Math.min(0.3, Math.max(0.02, now - this.lastStateAt));
    }
    this.lastStateAt = now;
    // control is coupled to state receipt: exactly one message back
    this.action = updateAction(this.action, this.keys.state, dt);
    this.ws?.send(
      JSON.stringify({
        type: "control",
        steer: this.action.steer,
        accel: this.action.accel,
      }),
    );
    this.render(state);
  }

  private render(state: StateMsg): void {
    if (this.scene !== null) {
      drawScene(this.ctx, this.transform, this.scene, this.canvas.width,
                this.canvas.height);
    }
    drawState(this.ctx, this.transform, state);
    drawHud(this.ctx, hudLines(state, this.action, this.recording));
  }

  private showReview(msg: EpisodeEndMsg): void {
    try {
      this.hooks.onReview(buildReview(msg));
    } catch (e) {
      this.hooks.onStatus(`malformed episode summary: ${e}`);
      this.restart();
    }
  }
}
