"""Independent reference implementations used to cross-check the library.

Each oracle here deliberately takes a different computational route from the
code under test (rasterization instead of closed-form distance, exhaustive
enumeration instead of vectorized scans) so agreement is meaningful.
"""

from __future__ import annotations

import math

import numpy as np

from inclab.geometry import Ball, Tube


def raster_ball_tube(p: Ball, t: Tube, n: int = 400) -> bool:
    """Rasterization test: does any point of an n x n grid inside the ball
    lie in the tube's rectangle?  One-sided: may miss very thin overlaps."""
    xs = np.linspace(p.cx - p.r, p.cx + p.r, n)
    ys = np.linspace(p.cy - p.r, p.cy + p.r, n)
    gx, gy = np.meshgrid(xs, ys)
    inside_ball = (gx - p.cx) ** 2 + (gy - p.cy) ** 2 <= p.r ** 2
    ux, uy = math.cos(t.theta), math.sin(t.theta)
    dx, dy = gx - t.cx, gy - t.cy
    along = np.abs(dx * ux + dy * uy)
    across = np.abs(-dx * uy + dy * ux)
    in_rect = (along <= t.length / 2) & (across <= t.width / 2)
    return bool(np.any(inside_ball & in_rect))


def frame_change_ball_tube(p: Ball, t: Tube) -> bool:
    """Closed-form check done in the tube frame with explicit rotation
    matrices (independent of the library's clamped-distance formulation)."""
    c, s = math.cos(-t.theta), math.sin(-t.theta)
    rx = c * (p.cx - t.cx) - s * (p.cy - t.cy)
    ry = s * (p.cx - t.cx) + c * (p.cy - t.cy)
    # Nearest rectangle point to (rx, ry) in the rotated frame.
    qx = min(max(rx, -t.length / 2), t.length / 2)
    qy = min(max(ry, -t.width / 2), t.width / 2)
    return math.hypot(rx - qx, ry - qy) <= p.r * (1 + 1e-12)


def overlap_by_rasterization(s: Tube, t: Tube, n: int = 1200) -> float:
    """Monte-Carlo-free area ratio: rasterize t's rectangle on an n-per-side
    grid in t's own frame and test membership in s.  Accuracy ~ perimeter/n."""
    us = np.linspace(-t.length / 2, t.length / 2, n, endpoint=False) + t.length / n / 2
    vs = np.linspace(-t.width / 2, t.width / 2, n, endpoint=False) + t.width / n / 2
    gu, gv = np.meshgrid(us, vs)
    ct, st = math.cos(t.theta), math.sin(t.theta)
    gx = t.cx + gu * ct - gv * st
    gy = t.cy + gu * st + gv * ct
    cs, ss = math.cos(s.theta), math.sin(s.theta)
    dx, dy = gx - s.cx, gy - s.cy
    along = np.abs(dx * cs + dy * ss)
    across = np.abs(-dx * ss + dy * cs)
    inside = (along <= s.length / 2) & (across <= s.width / 2)
    return float(np.mean(inside))


def exhaustive_ball_degree(centers: np.ndarray, r: float) -> int:
    """Max number of balls meeting any one ball (self included), O(n^2)."""
    best = 0
    n = len(centers)
    for i in range(n):
        deg = 0
        for j in range(n):
            dx = centers[i, 0] - centers[j, 0]
            dy = centers[i, 1] - centers[j, 1]
            if dx * dx + dy * dy <= (2 * r * (1 + 1e-12)) ** 2:
                deg += 1
        best = max(best, deg)
    return best


def exhaustive_ball_count_in_ball(centers: np.ndarray, r: float, cx: float,
                                  cy: float, R: float) -> int:
    """Number of balls contained in the closed ball B((cx, cy), R)."""
    count = 0
    for x, y in centers:
        if math.hypot(x - cx, y - cy) <= (R - r) * (1 + 1e-12):
            count += 1
    return count


def exact_max_ball_count(centers: np.ndarray, r: float, R: float) -> int:
    """Exact max of exhaustive_ball_count_in_ball over ALL positions of the
    query ball, not only data-anchored ones.

    An optimal closed disk of radius rho = R - r can be translated until two
    covered centers lie on its boundary (or one center coincides with it, or
    it covers everything), so it suffices to scan the data centers plus every
    intersection point of pairs of radius-rho circles around data centers.
    """
    rho = R - r
    if rho < 0:
        return 0
    pts = [tuple(c) for c in centers]
    n = len(centers)
    for i in range(n):
        for j in range(i + 1, n):
            x1, y1 = centers[i]
            x2, y2 = centers[j]
            d = math.hypot(x2 - x1, y2 - y1)
            if d > 2 * rho or d == 0:
                continue
            mx, my = (x1 + x2) / 2, (y1 + y2) / 2
            h = math.sqrt(max(rho * rho - (d / 2) ** 2, 0.0))
            ox, oy = -(y2 - y1) / d * h, (x2 - x1) / d * h
            pts.append((mx + ox, my + oy))
            pts.append((mx - ox, my - oy))
    best = 0
    arr = np.asarray(centers, dtype=float)
    for (px, py) in pts:
        d2 = (arr[:, 0] - px) ** 2 + (arr[:, 1] - py) ** 2
        best = max(best, int(np.sum(d2 <= (rho * (1 + 1e-9)) ** 2)))
    return best


def minimal_interval_cover(segments: list[tuple[float, float]], length: float) -> int:
    """Minimum number of length-`length` closed intervals covering the union
    of the given closed segments (greedy sweep, provably optimal)."""
    if not segments:
        return 0
    segs = sorted(segments)
    merged = [list(segs[0])]
    for a, b in segs[1:]:
        if a <= merged[-1][1] + 1e-15:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    count = 0
    for a, b in merged:
        span = b - a
        count += max(1, math.ceil(span / length - 1e-12))
    return count
