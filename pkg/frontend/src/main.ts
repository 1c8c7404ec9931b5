/** Page bootstrap: load the catalog, wire the form, canvas and keyboard. */

import { TeleopClient } from "./client.js";
import { Catalog } from "./protocol.js";
import { ReviewModel } from "./review.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

async function boot(): Promise<void> {
  const catalog: Catalog = await (await fetch("catalog.json")).json();

  const canvas = el<HTMLCanvasElement>("world");
  const ctx = canvas.getContext("2d");
  if (!ctx) {
    throw new Error("no 2d context");
  }

  const status = el<HTMLSpanElement>("status");
  const review = el<HTMLDivElement>("review");
  const banner = el<HTMLDivElement>("banner");
  const table = el<HTMLTableElement>("metrics");
  const keepNote = el<HTMLParagraphElement>("keep-note");

  const sceneSel = el<HTMLSelectElement>("scene");
  const routeSel = el<HTMLSelectElement>("route");
  const weatherSel = el<HTMLSelectElement>("weather");
  const seedInput = el<HTMLInputElement>("seed");
  const modeSel = el<HTMLSelectElement>("mode");

  for (const s of catalog.scenes) {
    const opt = document.createElement("option");
    opt.value = String(s.scene_id);
    opt.textContent = `scene ${s.scene_id} (${s.split})`;
    sceneSel.appendChild(opt);
  }
  const fillRoutes = () => {
    routeSel.innerHTML = "";
    const scene = catalog.scenes.find(
      (s) => s.scene_id === Number(sceneSel.value),
    );
    for (const r of scene?.routes ?? []) {
      const opt = document.createElement("option");
      opt.value = String(r.route_id);
      opt.textContent = `route ${r.route_id} (${r.mission})`;
      routeSel.appendChild(opt);
    }
  };
  sceneSel.addEventListener("change", fillRoutes);
  fillRoutes();
  for (const w of catalog.weathers) {
    const opt = document.createElement("option");
    opt.value = w.name;
    opt.textContent = `${w.name} (${w.split})`;
    weatherSel.appendChild(opt);
  }

  const client = new TeleopClient(canvas, ctx, catalog, {
    onStatus: (text) => {
      status.textContent = text;
    },
    clearReview: () => {
      review.style.display = "none";
    },
    onReview: (model: ReviewModel) => {
      banner.textContent = model.success
        ? `Success${model.recorded ? " (recorded)" : ""}`
        : model.terminal;
      banner.className = model.bannerClass;
      table.innerHTML = "";
      for (const row of model.rows) {
        const tr = document.createElement("tr");
        const name = document.createElement("td");
        name.textContent = row.label;
        const value = document.createElement("td");
        value.textContent = row.value;
        tr.append(name, value);
        table.appendChild(tr);
      }
      keepNote.style.display = model.keepShown ? "block" : "none";
      review.style.display = "block";
    },
  });

  client.attachKeyboard(window);
  const wsUrl = `ws://${location.hostname}:8700`;
  client.connect(wsUrl);

  el<HTMLButtonElement>("start").addEventListener("click", () => {
    client.start({
      type: "start",
      scene: Number(sceneSel.value),
      route: Number(routeSel.value),
      weather: weatherSel.value,
      seed: Number(seedInput.value) || 0,
      mode: modeSel.value as "human-drive" | "spectate",
    });
    canvas.focus();
  });
  el<HTMLButtonElement>("restart").addEventListener("click", () =>
    client.restart(),
  );
}

boot().catch((e) => {
  document.body.textContent = `failed to start: ${e}`;
});
