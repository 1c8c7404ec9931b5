/** Wire protocol types shared with the session server (JSON text frames). */

export interface EgoFrame {
  x: number;
  y: number;
  heading: number;
  speed: number;
}

export interface PedestrianFrame {
  id: number;
  x: number;
  y: number;
  disrupted: boolean;
}

export interface StateMsg {
  type: "state";
  tick: number;
  ego: EgoFrame;
  pedestrians: PedestrianFrame[];
  cmds: { lat: string; lon: string };
  route: number[][];
}

/** Metric keys exactly as the benchmark report JSON spells them. */
export const METRIC_KEYS = [
  "ego_jerk",
  "other_jerk",
  "dev_waypoint",
  "dev_destination",
  "heading_dev",
  "total_steps",
] as const;

export type MetricKey = (typeof METRIC_KEYS)[number];

export interface EpisodeEndMsg {
  type: "episode_end";
  terminal: string;
  metrics: Record<MetricKey, number>;
  recorded?: boolean;
}

export interface ErrorMsg {
  type: "error";
  reason: string;
}

export type ServerMsg = StateMsg | EpisodeEndMsg | ErrorMsg;

export interface ControlMsg {
  type: "control";
  steer: number;
  accel: number;
}

export interface StartMsg {
  type: "start";
  scene: number;
  route: number;
  weather: string;
  seed: number;
  mode?: "human-drive" | "spectate";
}

export function parseServerMsg(raw: string): ServerMsg | null {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null || !("type" in doc)) {
    return null;
  }
  const t = (doc as { type: string }).type;
  if (t === "state" || t === "episode_end" || t === "error") {
    return doc as ServerMsg;
  }
  return null;
}

/** Scene geometry from the exported catalog JSON. */
export interface CatalogCrosswalk {
  id: number;
  a: number[];
  b: number[];
  width: number;
}

export interface CatalogRoute {
  route_id: number;
  mission: string;
  waypoints: number[][];
  goal: number[];
  goal_lane_direction: number;
}

export interface CatalogScene {
  scene_id: number;
  split: string;
  lane_width: number;
  lanes_per_direction: number;
  road_half_width: number;
  box_half: number;
  arm_length: number;
  crosswalks: CatalogCrosswalk[];
  routes: CatalogRoute[];
}

export interface Catalog {
  version: number;
  scenes: CatalogScene[];
  weathers: { name: string; split: string }[];
}
