"""Planar primitives: balls, tubes, scales, and the exact predicates on them.

Everything downstream (spacing certification, incidence counting, the
generators) is built on the handful of predicates in this module.  All
comparisons against thresholds use a small *relative* tolerance so that
boundary-tangent pairs placed at exact dyadic offsets are decided
deterministically; generated data keeps its margins far above the tolerance
window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from numpy.typing import NDArray

# Relative predicate tolerance.  Generated configurations keep every decision
# margin at least a few orders of magnitude above this, so flipping TOL within
# [1e-14, 1e-10] never changes a decision on generated data.
TOL = 1e-12

# Desk-scale ceiling on the scale exponent; 2^-24 keeps squared dyadic
# distances exactly representable in float64.
MAX_K = 24


class ScaleError(ValueError):
    """Raised for scale exponents outside the supported range."""


class GuardExceeded(RuntimeError):
    """Raised when an operation would exceed its object-count guard."""


@dataclass(frozen=True)
class Scale:
    """Dyadic working scale delta = 2^-k."""

    k: int

    def __post_init__(self) -> None:
        if not isinstance(self.k, int) or not (1 <= self.k <= MAX_K):
            raise ScaleError(f"scale exponent k must be an integer in [1, {MAX_K}], got {self.k!r}")

    @property
    def delta(self) -> float:
        return 2.0 ** -self.k

    @property
    def D(self) -> int:
        return 2 ** self.k


@dataclass(frozen=True)
class Ball:
    """Closed disk; radius is the working delta unless thickened."""

    cx: float
    cy: float
    r: float

    def __post_init__(self) -> None:
        if not self.r > 0:
            raise ValueError(f"ball radius must be positive, got {self.r}")


@dataclass(frozen=True)
class Tube:
    """Closed width x length rectangle; theta is the long-side direction mod pi."""

    cx: float
    cy: float
    theta: float
    width: float
    length: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.theta < math.pi):
            raise ValueError(f"tube direction must lie in [0, pi), got {self.theta}")
        if self.width > self.length * (1.0 + TOL):
            raise ValueError(f"tube width {self.width} exceeds length {self.length}")

    def axis(self) -> tuple[float, float]:
        return math.cos(self.theta), math.sin(self.theta)

    def corners(self) -> NDArray[np.float64]:
        """The four vertices, counterclockwise."""
        ux, uy = self.axis()
        vx, vy = -uy, ux
        hl, hw = self.length / 2.0, self.width / 2.0
        c = np.array([self.cx, self.cy])
        along = np.array([ux, uy]) * hl
        across = np.array([vx, vy]) * hw
        return np.array([c + along + across, c - along + across,
                         c - along - across, c + along - across])


@dataclass
class Configuration:
    """A scale together with ball centers and tube midline parameters.

    Geometry is stored columnar: ``balls`` is an (N, 2) array of centers with
    a shared radius ``ball_r``; ``tubes`` is an (M, 3) array of
    (cx, cy, theta) with shared width ``tube_width``.  Heterogeneous lengths
    (query tubes, dual tubes) go in ``tube_lengths``; None means unit length.
    """

    scale: Scale
    balls: NDArray[np.float64]
    tubes: NDArray[np.float64]
    ball_r: float
    tube_width: float
    tube_lengths: NDArray[np.float64] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.balls = np.asarray(self.balls, dtype=np.float64).reshape(-1, 2)
        self.tubes = np.asarray(self.tubes, dtype=np.float64).reshape(-1, 3)
        if self.tube_lengths is not None:
            self.tube_lengths = np.asarray(self.tube_lengths, dtype=np.float64).reshape(-1)
            if self.tube_lengths.shape[0] != self.tubes.shape[0]:
                raise ValueError("tube_lengths must match the number of tubes")

    @property
    def n_balls(self) -> int:
        return self.balls.shape[0]

    @property
    def n_tubes(self) -> int:
        return self.tubes.shape[0]

    def ball_at(self, i: int) -> Ball:
        return Ball(float(self.balls[i, 0]), float(self.balls[i, 1]), self.ball_r)

    def tube_at(self, i: int) -> Tube:
        length = 1.0 if self.tube_lengths is None else float(self.tube_lengths[i])
        return Tube(float(self.tubes[i, 0]), float(self.tubes[i, 1]),
                    float(self.tubes[i, 2]), self.tube_width, length)

    def iter_balls(self) -> Iterator[Ball]:
        return (self.ball_at(i) for i in range(self.n_balls))

    def iter_tubes(self) -> Iterator[Tube]:
        return (self.tube_at(i) for i in range(self.n_tubes))

    def to_json_dict(self, include_meta: bool = True) -> dict:
        """Frozen JSON schema: k/alpha/beta/construction plus object lists."""
        meta = dict(self.meta)
        out = {
            "k": self.scale.k,
            "alpha": meta.pop("alpha", None),
            "beta": meta.pop("beta", None),
            "construction": meta.pop("construction", None),
            "balls": [{"cx": float(x), "cy": float(y)} for x, y in self.balls],
            "tubes": [],
        }
        for i in range(self.n_tubes):
            entry = {"cx": float(self.tubes[i, 0]), "cy": float(self.tubes[i, 1]),
                     "theta": float(self.tubes[i, 2])}
            if self.tube_lengths is not None and self.tube_lengths[i] != 1.0:
                entry["length"] = float(self.tube_lengths[i])
            out["tubes"].append(entry)
        out["meta"] = meta if include_meta else {}
        if self.ball_r != self.scale.delta:
            out["meta"]["ball_r"] = self.ball_r
        if self.tube_width != self.scale.delta:
            out["meta"]["tube_width"] = self.tube_width
        return out

    @classmethod
    def from_json_dict(cls, data: dict) -> "Configuration":
        scale = Scale(int(data["k"]))
        meta = dict(data.get("meta") or {})
        for key in ("construction", "alpha", "beta"):
            if data.get(key) is not None:
                meta[key] = data[key]
        ball_r = float(meta.pop("ball_r", scale.delta))
        tube_width = float(meta.pop("tube_width", scale.delta))
        balls = np.array([[b["cx"], b["cy"]] for b in data.get("balls", [])],
                         dtype=np.float64).reshape(-1, 2)
        tube_list = data.get("tubes", [])
        tubes = np.array([[t["cx"], t["cy"], t["theta"]] for t in tube_list],
                         dtype=np.float64).reshape(-1, 3)
        lengths = None
        if any("length" in t for t in tube_list):
            lengths = np.array([float(t.get("length", 1.0)) for t in tube_list])
        return cls(scale, balls, tubes, ball_r, tube_width, lengths, meta)


# ---------------------------------------------------------------------------
# predicates
# ---------------------------------------------------------------------------

def points_tube_dist2(points: NDArray[np.float64], cx: float, cy: float,
                      theta: float, width: float, length: float) -> NDArray[np.float64]:
    """Squared distance from each point to the closed rectangle of a tube.

    Shared by the scalar predicate, the counting engines, and the generators'
    self-checks so that every consumer decides incidence identically.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    ux, uy = math.cos(theta), math.sin(theta)
    dx = points[:, 0] - cx
    dy = points[:, 1] - cy
    along = dx * ux + dy * uy
    across = -dx * uy + dy * ux
    ea = np.abs(along) - length / 2.0
    ec = np.abs(across) - width / 2.0
    np.clip(ea, 0.0, None, out=ea)
    np.clip(ec, 0.0, None, out=ec)
    return ea * ea + ec * ec


def ball_tube_intersects(p: Ball, t: Tube, tol: float = TOL) -> bool:
    """Whether the closed disk meets the closed rectangle."""
    d2 = points_tube_dist2(np.array([[p.cx, p.cy]]), t.cx, t.cy, t.theta, t.width, t.length)
    thr = p.r * (1.0 + tol)
    return bool(d2[0] <= thr * thr)


def tube_angle(s: Tube, t: Tube) -> float:
    """Acute angle between directions, in [0, pi/2]."""
    d = abs(s.theta - t.theta) % math.pi
    return min(d, math.pi - d)


def angle_between(theta_a: NDArray[np.float64] | float, theta_b: float) -> NDArray[np.float64]:
    """Vectorized acute angle between direction arrays (mod pi)."""
    d = np.abs(np.asarray(theta_a, dtype=np.float64) - theta_b) % math.pi
    return np.minimum(d, math.pi - d)


def tube_in_query_tube(t: Tube, T: Tube, tol: float = TOL) -> bool:
    """Whether all four corners of t lie in the closed rectangle of T."""
    ux, uy = T.axis()
    corners = t.corners()
    dx = corners[:, 0] - T.cx
    dy = corners[:, 1] - T.cy
    along = np.abs(dx * ux + dy * uy)
    across = np.abs(-dx * uy + dy * ux)
    return bool(np.all(along <= (T.length / 2.0) * (1.0 + tol))
                and np.all(across <= (T.width / 2.0) * (1.0 + tol)))


def ball_in_ball(p: Ball, B: Ball, tol: float = TOL) -> bool:
    """Closed-disk containment: p inside B."""
    dx, dy = p.cx - B.cx, p.cy - B.cy
    slack = B.r - p.r
    if slack < -tol * B.r:
        return False
    thr = slack + tol * B.r
    return dx * dx + dy * dy <= thr * thr


def ball_in_square(p: Ball, x0: float, y0: float, side: float, tol: float = TOL) -> bool:
    """Closed containment of the disk in the axis-aligned square at (x0, y0)."""
    m = p.r * (1.0 - tol)
    return (p.cx - x0 >= m and x0 + side - p.cx >= m
            and p.cy - y0 >= m and y0 + side - p.cy >= m)


def tubes_intersect(s: Tube, t: Tube, tol: float = TOL) -> bool:
    """Whether two closed rectangles meet (separating-axis test)."""
    for a, b in ((s, t), (t, s)):
        ux, uy = a.axis()
        for axis, half in (((ux, uy), a.length / 2.0), ((-uy, ux), a.width / 2.0)):
            proj = b.corners() @ np.array(axis)
            center = a.cx * axis[0] + a.cy * axis[1]
            reach = half * (1.0 + tol) + tol * max(a.length, b.length)
            if proj.min() > center + reach or proj.max() < center - reach:
                return False
    return True


def _clip_polygon(poly: list[tuple[float, float]], px: float, py: float,
                  nx: float, ny: float) -> list[tuple[float, float]]:
    """Sutherland-Hodgman clip of a convex polygon by the half-plane
    {(x, y) : (x - px, y - py) . (nx, ny) <= 0}."""
    out: list[tuple[float, float]] = []
    n = len(poly)
    for i in range(n):
        ax, ay = poly[i]
        bx, by = poly[(i + 1) % n]
        da = (ax - px) * nx + (ay - py) * ny
        db = (bx - px) * nx + (by - py) * ny
        if da <= 0:
            out.append((ax, ay))
            if db > 0:
                s = da / (da - db)
                out.append((ax + s * (bx - ax), ay + s * (by - ay)))
        elif db <= 0:
            s = da / (da - db)
            out.append((ax + s * (bx - ax), ay + s * (by - ay)))
    return out


def essential_overlap(s: Tube, t: Tube) -> float:
    """area(s intersect t) / area(t), by rectangle clipping."""
    poly = [tuple(c) for c in s.corners()]
    ux, uy = t.axis()
    vx, vy = -uy, ux
    hl, hw = t.length / 2.0, t.width / 2.0
    for nx, ny, h in ((ux, uy, hl), (-ux, -uy, hl), (vx, vy, hw), (-vx, -vy, hw)):
        px, py = t.cx + nx * h, t.cy + ny * h
        poly = _clip_polygon(poly, px, py, nx, ny)
        if not poly:
            return 0.0
    area = 0.0
    for i in range(len(poly)):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % len(poly)]
        area += x1 * y2 - x2 * y1
    return abs(area) / 2.0 / (t.width * t.length)


def normalize_angle(theta: NDArray[np.float64] | float):
    """Reduce direction(s) into [0, pi)."""
    out = np.asarray(theta, dtype=np.float64) % math.pi
    # A value that rounds up to pi itself must wrap to 0.
    out = np.where(out >= math.pi, 0.0, out)
    return float(out) if np.isscalar(theta) else out


def make_configuration(k: int, balls: Sequence | NDArray, tubes: Sequence | NDArray,
                       tube_lengths: NDArray | None = None, **meta) -> Configuration:
    """Convenience constructor for delta-uniform configurations."""
    scale = Scale(k)
    return Configuration(scale, np.asarray(balls, dtype=np.float64).reshape(-1, 2),
                         np.asarray(tubes, dtype=np.float64).reshape(-1, 3),
                         scale.delta, scale.delta, tube_lengths, dict(meta))
