"""Planar geometry primitives shared by the simulator, expert and metrics.

World frame: x grows to the right of the screen, y grows downward (canvas
convention). Headings are radians in (-pi, pi] measured from +x toward +y,
so a positive heading rate turns the vehicle clockwise on screen, i.e. to
the driver's right. Positive steering therefore means "steer right".
"""

from __future__ import annotations

import math
from dataclasses import dataclass

TAU = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    r = a % TAU
    if r > math.pi:
        r -= TAU
    return r


@dataclass(frozen=True, slots=True)
class Vec2:
    x: float
    y: float

    def __add__(self, o: "Vec2") -> "Vec2":
        return Vec2(self.x + o.x, self.y + o.y)

    def __sub__(self, o: "Vec2") -> "Vec2":
        return Vec2(self.x - o.x, self.y - o.y)

    def scaled(self, k: float) -> "Vec2":
        return Vec2(self.x * k, self.y * k)

    def dot(self, o: "Vec2") -> float:
        return self.x * o.x + self.y * o.y

    def cross(self, o: "Vec2") -> float:
        return self.x * o.y - self.y * o.x

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def dist(self, o: "Vec2") -> float:
        return math.hypot(self.x - o.x, self.y - o.y)

    def is_finite(self) -> bool:
        return math.isfinite(self.x) and math.isfinite(self.y)


def heading_to_dir(heading: float) -> Vec2:
    return Vec2(math.cos(heading), math.sin(heading))


def right_of(d: Vec2) -> Vec2:
    """Unit vector to the driver's right for travel direction d."""
    return Vec2(-d.y, d.x)


@dataclass(frozen=True, slots=True)
class Pose2D:
    position: Vec2
    heading: float

    def __post_init__(self):
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    def to_local(self, p: Vec2) -> Vec2:
        """World point -> this pose's frame (x forward, y to the right)."""
        d = p - self.position
        c, s = math.cos(self.heading), math.sin(self.heading)
        return Vec2(d.x * c + d.y * s, -d.x * s + d.y * c)

    def from_local(self, p: Vec2) -> Vec2:
        c, s = math.cos(self.heading), math.sin(self.heading)
        return Vec2(self.position.x + p.x * c - p.y * s,
                    self.position.y + p.x * s + p.y * c)


def point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> float:
    ab = b - a
    denom = ab.dot(ab)
    if denom <= 0.0:
        return p.dist(a)
    t = max(0.0, min(1.0, (p - a).dot(ab) / denom))
    return p.dist(a + ab.scaled(t))


def cumulative_lengths(points: list[Vec2]) -> list[float]:
    out = [0.0]
    for i in range(1, len(points)):
        out.append(out[-1] + points[i].dist(points[i - 1]))
    return out


def nearest_arc_position(p: Vec2, points: list[Vec2],
                         cum: list[float]) -> tuple[float, float]:
    """Arc-length coordinate of the closest point on a polyline.

    Returns (arc position, distance to the polyline).
    """
    best_s = 0.0
    best_d = math.inf
    for i in range(len(points) - 1):
        a, b = points[i], points[i + 1]
        ab = b - a
        denom = ab.dot(ab)
        t = 0.0 if denom <= 0.0 else max(0.0, min(1.0, (p - a).dot(ab) / denom))
        q = a + ab.scaled(t)
        d = p.dist(q)
        if d < best_d:
            best_d = d
            best_s = cum[i] + math.sqrt(denom) * t
    return best_s, best_d


def point_at_arc(points: list[Vec2], cum: list[float], s: float) -> Vec2:
    if s <= 0.0:
        return points[0]
    if s >= cum[-1]:
        return points[-1]
    # cum is sorted; linear scan is fine at route sizes
    for i in range(1, len(cum)):
        if cum[i] >= s:
            seg = cum[i] - cum[i - 1]
            t = 0.0 if seg <= 0.0 else (s - cum[i - 1]) / seg
            return points[i - 1] + (points[i] - points[i - 1]).scaled(t)
    return points[-1]


def polyline_window(points: list[Vec2], cum: list[float],
                    s0: float, s1: float) -> list[Vec2]:
    """Sub-polyline covering arc positions [s0, s1], endpoints interpolated."""
    s0 = max(0.0, min(s0, cum[-1]))
    s1 = max(s0, min(s1, cum[-1]))
    out = [point_at_arc(points, cum, s0)]
    for i, c in enumerate(cum):
        if s0 < c < s1:
            out.append(points[i])
    out.append(point_at_arc(points, cum, s1))
    return out


def min_distance_to_polyline(p: Vec2, points: list[Vec2]) -> float:
    if len(points) == 1:
        return p.dist(points[0])
    return min(point_segment_distance(p, points[i], points[i + 1])
               for i in range(len(points) - 1))


def resample_polyline(points: list[Vec2], spacing: float) -> list[Vec2]:
    """Even re-sampling by arc length; endpoints preserved exactly."""
    cum = cumulative_lengths(points)
    total = cum[-1]
    n = max(1, round(total / spacing))
    out = [points[0]]
    for k in range(1, n):
        out.append(point_at_arc(points, cum, total * k / n))
    out.append(points[-1])
    return out


def quadratic_bezier(p0: Vec2, c: Vec2, p2: Vec2, samples: int) -> list[Vec2]:
    pts = []
    for k in range(samples + 1):
        t = k / samples
        u = 1.0 - t
        pts.append(Vec2(
            u * u * p0.x + 2 * u * t * c.x + t * t * p2.x,
            u * u * p0.y + 2 * u * t * c.y + t * t * p2.y,
        ))
    return pts
