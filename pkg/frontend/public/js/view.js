/** Bird-view canvas rendering.
 *
 * World coordinates map directly onto the canvas (x right, y down), scaled
 * and centered on the intersection. Rendering is a pure function of the
 * latest state message plus static catalog geometry; nothing here mutates
 * the authoritative state.
 */
export function makeTransform(canvasW, canvasH, viewRadius) {
    return {
        scale: Math.min(canvasW, canvasH) / (2 * viewRadius),
        cx: canvasW / 2,
        cy: canvasH / 2,
    };
}
export function worldToScreen(t, x, y) {
    return [t.cx + x * t.scale, t.cy + y * t.scale];
}
const ROAD = "#3c3f44";
const APRON = "#45484e";
const MARKING = "#d8d8cf";
const CROSSWALK = "#b9bdc4";
const ROUTE = "#3da5ff";
const EGO = "#ffd23f";
const PED = "#7ee081";
const PED_DISRUPTED = "#ff8c42";
export function drawScene(ctx, t, scene, canvasW, canvasH) {
    ctx.fillStyle = "#20241f";
    ctx.fillRect(0, 0, canvasW, canvasH);
    const hw = scene.road_half_width * t.scale;
    const arm = scene.arm_length * t.scale;
    const box = scene.box_half * t.scale;
    ctx.fillStyle = ROAD;
    ctx.fillRect(t.cx - hw, t.cy - arm, 2 * hw, 2 * arm);
    ctx.fillRect(t.cx - arm, t.cy - hw, 2 * arm, 2 * hw);
    ctx.fillStyle = APRON;
    ctx.fillRect(t.cx - box, t.cy - box, 2 * box, 2 * box);
    ctx.strokeStyle = MARKING;
    ctx.lineWidth = Math.max(1, 0.25 * t.scale);
    for (let k = 0; k <= scene.lanes_per_direction; k++) {
        const off = k * scene.lane_width * t.scale;
        for (const sign of k === 0 ? [0] : [-1, 1]) {
            const o = sign * off;
            ctx.beginPath();
            ctx.moveTo(t.cx + o, t.cy - arm);
            ctx.lineTo(t.cx + o, t.cy - box);
            ctx.moveTo(t.cx + o, t.cy + box);
            ctx.lineTo(t.cx + o, t.cy + arm);
            ctx.moveTo(t.cx - arm, t.cy + o);
            ctx.lineTo(t.cx - box, t.cy + o);
            ctx.moveTo(t.cx + box, t.cy + o);
            ctx.lineTo(t.cx + arm, t.cy + o);
            ctx.stroke();
        }
    }
    ctx.fillStyle = CROSSWALK;
    for (const cw of scene.crosswalks) {
        const [ax, ay] = cw.a;
        const [bx, by] = cw.b;
        const len = Math.hypot(bx - ax, by - ay);
        const ux = (bx - ax) / len;
        const uy = (by - ay) / len;
        const stripes = Math.floor(len / 1.0);
        for (let i = 0; i < stripes; i += 2) {
            const sx = ax + ux * i;
            const sy = ay + uy * i;
            ctx.save();
            const [px, py] = worldToScreen(t, sx, sy);
            ctx.translate(px, py);
            ctx.rotate(Math.atan2(uy, ux));
            ctx.fillRect(0, -cw.width * t.scale * 0.5, 1.0 * t.scale, cw.width * t.scale);
            ctx.restore();
        }
    }
}
export function drawState(ctx, t, state) {
    ctx.strokeStyle = ROUTE;
    ctx.lineWidth = Math.max(1, 0.3 * t.scale);
    ctx.beginPath();
    state.route.forEach(([x, y], i) => {
        const [px, py] = worldToScreen(t, x, y);
        if (i === 0) {
            ctx.moveTo(px, py);
        }
        else {
            ctx.lineTo(px, py);
        }
    });
    ctx.stroke();
    const goal = state.route[state.route.length - 1];
    const [gx, gy] = worldToScreen(t, goal[0], goal[1]);
    ctx.fillStyle = ROUTE;
    ctx.beginPath();
    ctx.arc(gx, gy, 0.8 * t.scale, 0, 2 * Math.PI);
    ctx.fill();
    for (const p of state.pedestrians) {
        const [px, py] = worldToScreen(t, p.x, p.y);
        ctx.fillStyle = p.disrupted ? PED_DISRUPTED : PED;
        ctx.beginPath();
        ctx.arc(px, py, Math.max(2, 0.35 * t.scale), 0, 2 * Math.PI);
        ctx.fill();
    }
    const ego = state.ego;
    const [ex, ey] = worldToScreen(t, ego.x, ego.y);
    ctx.save();
    ctx.translate(ex, ey);
    ctx.rotate(ego.heading);
    ctx.fillStyle = EGO;
    ctx.fillRect(-2.2 * t.scale, -0.95 * t.scale, 4.4 * t.scale, 1.9 * t.scale);
    ctx.fillStyle = "#2b2b2b";
    ctx.fillRect(1.2 * t.scale, -0.7 * t.scale, 0.8 * t.scale, 1.4 * t.scale);
    ctx.restore();
}
export function hudLines(state, action, recording) {
    return [
        `tick ${state.tick}   speed ${(state.ego.speed * 3.6).toFixed(1)} km/h`,
        `commands: ${state.cmds.lat} / ${state.cmds.lon}`,
        `steer ${action.steer.toFixed(2)}  accel ${action.accel.toFixed(2)}`,
        recording ? "REC" : "",
    ].filter((s) => s.length > 0);
}
export function drawHud(ctx, lines) {
    ctx.font = "14px monospace";
    ctx.fillStyle = "#f2f2e9";
    lines.forEach((line, i) => ctx.fillText(line, 12, 22 + 18 * i));
}
