/** Post-episode review screen model.
 *
 * The server's quality gate decides what is stored; the keep/discard
 * affordance here is display only.
 */

import { EpisodeEndMsg, METRIC_KEYS, MetricKey } from "./protocol.js";

export interface ReviewRow {
  key: MetricKey;
  label: string;
  value: string;
}

export interface ReviewModel {
  terminal: string;
  success: boolean;
  bannerClass: "banner-success" | "banner-failure";
  rows: ReviewRow[];
  keepShown: boolean;
  recorded: boolean;
}

const LABELS: Record<MetricKey, string> = {
  ego_jerk: "Ego jerk (#)",
  other_jerk: "Other jerk (#)",
  dev_waypoint: "Waypoint deviation (m)",
  dev_destination: "Destination deviation (m)",
  heading_dev: "Heading deviation (deg)",
  total_steps: "Total steps (#)",
};

export class MalformedEpisodeEnd extends Error {}

export function buildReview(msg: EpisodeEndMsg): ReviewModel {
  if (msg.type !== "episode_end" || typeof msg.terminal !== "string") {
    throw new MalformedEpisodeEnd("not an episode_end message");
  }
  const metrics = msg.metrics ?? ({} as Record<MetricKey, number>);
  for (const key of METRIC_KEYS) {
    if (typeof metrics[key] !== "number" || !isFinite(metrics[key])) {
      throw new MalformedEpisodeEnd(`missing or bad metric ${key}`);
    }
  }
  const extras = Object.keys(metrics).filter(
    (k) => !(METRIC_KEYS as readonly string[]).includes(k),
  );
  if (extras.length > 0) {
    throw new MalformedEpisodeEnd(`unexpected metric keys: ${extras}`);
  }
  const success = msg.terminal === "Success";
  return {
    terminal: msg.terminal,
    success,
    bannerClass: success ? "banner-success" : "banner-failure",
    rows: METRIC_KEYS.map((key) => ({
      key,
      label: LABELS[key],
      value: metrics[key].toFixed(3),
    })),
    keepShown: success,
    recorded: msg.recorded === true,
  };
}
