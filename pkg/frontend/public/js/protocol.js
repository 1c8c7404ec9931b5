/** Wire protocol types shared with the session server (JSON text frames). */
/** Metric keys exactly as the benchmark report JSON spells them. */
export const METRIC_KEYS = [
    "ego_jerk",
    "other_jerk",
    "dev_waypoint",
    "dev_destination",
    "heading_dev",
    "total_steps",
];
export function parseServerMsg(raw) {
    let doc;
    try {
        doc = JSON.parse(raw);
    }
    catch {
        return null;
    }
    if (typeof doc !== "object" || doc === null || !("type" in doc)) {
        return null;
    }
    const t = doc.type;
    if (t === "state" || t === "episode_end" || t === "error") {
        return doc;
    }
    return null;
}
