"""Generators for extremal ball/tube configurations.

Four families cover the exponent quadrant [0, 2]^2:

1. ``construct1`` - bundles of tubes through short ball cores, arranged on an
   anisotropic grid; covers the general-position region (alpha < beta + 1,
   beta < alpha + 1, alpha + beta < 3).
2. ``construct2`` - fans of tubes through apex balls on a horizontal segment;
   covers alpha >= beta + 1 (tube-dominated).
3. ``construct3`` - full ball columns crossed by a subset of vertical tubes;
   covers beta >= alpha + 1 (ball-dominated).
4. ``construct4`` - the fan family of construct2 over an ambient ball grid;
   covers alpha + beta >= 3 (both sides large).

All generators are deterministic, keep object counts within a factor 32 of
D^alpha tubes and D^beta balls, keep every ball meeting the unit square, and
bound mutual overlaps: no tube essentially overlaps (>= 1/2 of its area)
more than one other tube, and no ball meets more than ten others.

``furstenberg_product`` / ``furstenberg_config`` build the Cantor-fiber sets
for the point-count lower bound, and ``regularize`` rewrites a ball set so
that no dyadic square is denser than its global spacing constant allows.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from inclab.cantor import DiscreteCantor, build_Pw, cantor_generate
from inclab.geometry import (
    Configuration,
    GuardExceeded,
    Scale,
    normalize_angle,
)

# Default ceiling on generated balls or tubes; override via the environment.
DEFAULT_MAX_OBJECTS = 1_000_000


def max_objects() -> int:
    value = os.environ.get("INCLAB_MAX_OBJECTS")
    return int(value) if value else DEFAULT_MAX_OBJECTS


class ConstructionRegionError(ValueError):
    """Raised when (alpha, beta) lies outside a generator's region."""


def _check_counts(n_balls: int, n_tubes: int) -> None:
    limit = max_objects()
    if n_balls > limit or n_tubes > limit:
        raise GuardExceeded(
            f"configuration would hold {n_balls} balls / {n_tubes} tubes, "
            f"exceeding the guard of {limit} (set INCLAB_MAX_OBJECTS to raise it)")


def _check_exponent(name: str, value: float) -> None:
    if not (0.0 <= value <= 2.0):
        raise ConstructionRegionError(f"{name} must lie in [0, 2], got {value}")


def _rounded_power(D: int, exponent: float) -> int:
    return max(1, round(D ** exponent))


# ---------------------------------------------------------------------------
# construction 1: tube bundles through ball cores on an anisotropic grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Construction1Params:
    """Derived exponents for the bundle construction.

    gamma splits each incidence bundle between its tube fan and its ball
    core; kappa is the bundle-count exponent; lam in [0, min(gamma, 1-gamma)]
    splits kappa between the two grid axes.  The feasibility conditions below
    are exactly what the per-level spacing computation of the construction
    needs; the default lam = min(gamma, 1 - gamma) satisfies them throughout
    the open region.
    """

    alpha: float
    beta: float
    lam: float | None = None

    @property
    def a(self) -> float:
        return min(self.alpha, 1.0)

    @property
    def b(self) -> float:
        return min(self.beta, 1.0)

    @property
    def gamma(self) -> float:
        if self.a + self.b == 0:
            return 0.5
        return (self.a - self.alpha + self.beta) / (self.a + self.b)

    @property
    def kappa(self) -> float:
        return self.alpha - (1.0 - self.gamma) * self.a

    @property
    def lam_value(self) -> float:
        if self.lam is not None:
            return self.lam
        return min(self.gamma, 1.0 - self.gamma)

    def validate(self) -> None:
        _check_exponent("alpha", self.alpha)
        _check_exponent("beta", self.beta)
        alpha, beta = self.alpha, self.beta
        if alpha >= beta + 1 or beta >= alpha + 1 or alpha + beta >= 3:
            raise ConstructionRegionError(
                f"(alpha, beta) = ({alpha}, {beta}) lies outside the open region "
                "alpha < beta + 1, beta < alpha + 1, alpha + beta < 3")
        a, b, g, kap, lam = self.a, self.b, self.gamma, self.kappa, self.lam_value
        m = max(lam, 1.0 - lam)
        tol = 1e-9
        if not (0.0 - tol <= lam <= min(g, 1.0 - g) + tol):
            raise ConstructionRegionError(
                f"lambda = {lam} must lie in [0, min(gamma, 1-gamma)] = "
                f"[0, {min(g, 1 - g)}]")
        if (1.0 - g) * a * (a + 1.0 - alpha) + m * kap > a + tol:
            raise ConstructionRegionError(
                f"tube-side spacing condition fails for lambda = {lam}")
        if g * b * (b + 1.0 - beta) + m * kap > b + tol:
            raise ConstructionRegionError(
                f"ball-side spacing condition fails for lambda = {lam}")
        if g + (1.0 - g) * min(a, b) < m * kap - tol:
            raise ConstructionRegionError(
                f"bundle separation condition fails for lambda = {lam}")


def _fan_shifts(n_t: int, delta: float) -> tuple[NDArray, NDArray]:
    """Per-tube axial and lateral shifts that keep essential overlaps of
    nearby fan members strictly below 1/2.

    Alternating +-1/4 axial shifts leave angle-2delta pairs at exactly half
    overlap, so a period-4 lateral +-delta/2 pattern breaks the tie: adjacent
    pairs land at <= 3/8, distance-2 pairs at about 1/4, and farther pairs
    decay like 1/gap, all with margin >= 1/8 of the tube area.
    """
    m = np.arange(n_t)
    axial = 0.25 * np.where(m % 2 == 1, 1.0, -1.0)
    lateral = (delta / 2.0) * np.where(m % 4 < 2, 1.0, -1.0)
    return axial, lateral


def _build_fan(apexes: NDArray[np.float64], n_t: int, astep: float,
               delta: float, base_theta: float | NDArray = math.pi / 2,
               shifted: bool = True) -> NDArray[np.float64]:
    """Tubes of an n_t-fan with angle step astep through each apex point.

    Returns an (n_apexes * n_t, 3) array.  Shift offsets are applied along
    each tube's own frame when the fan is dense enough to need them.
    """
    thetas = (np.asarray(base_theta, dtype=np.float64).reshape(-1, 1)
              + (np.arange(n_t) - (n_t - 1) / 2.0) * astep)
    if thetas.shape[0] == 1:
        thetas = np.broadcast_to(thetas, (apexes.shape[0], n_t))
    ux, uy = np.cos(thetas), np.sin(thetas)
    if shifted and n_t >= 3 and astep < 2.5 * delta:
        axial, lateral = _fan_shifts(n_t, delta)
    else:
        axial = np.zeros(n_t)
        lateral = np.zeros(n_t)
    cx = apexes[:, None, 0] + axial * ux + lateral * (-uy)
    cy = apexes[:, None, 1] + axial * uy + lateral * ux
    theta = normalize_angle(np.broadcast_to(thetas, cx.shape))
    return np.stack([cx.ravel(), cy.ravel(), theta.ravel()], axis=-1)


def construct1(k: int, alpha: float, beta: float,
               lam: float | None = None) -> Configuration:
    """Bundle construction for the general-position region."""
    scale = Scale(k)
    params = Construction1Params(alpha, beta, lam)
    if alpha == 0.0 and beta == 0.0:
        balls = np.array([[0.5, 0.5]])
        tubes = np.array([[0.5, 0.5, math.pi / 2]])
        return Configuration(scale, balls, tubes, scale.delta, scale.delta,
                             meta={"construction": 1, "alpha": alpha, "beta": beta,
                                   "gamma": 0.5, "kappa": 0.0, "lambda": 0.0, "seed": 0})
    params.validate()
    D, delta = scale.D, scale.delta
    g, kap, lam_v = params.gamma, params.kappa, params.lam_value
    a, b = params.a, params.b

    sx = delta ** ((1.0 - lam_v) * kap)   # column spacing
    sy = delta ** (lam_v * kap)           # row spacing = per-row rotation
    n_cols = max(1, min(_rounded_power(D, (1.0 - lam_v) * kap), math.floor(1.0 / sx + 1e-9)))
    n_rows_cap = max(1, math.floor(1.0 / sy + 1e-9))
    n_bun = max(1, min(_rounded_power(D, kap), n_cols * n_rows_cap))

    n_t = _rounded_power(D, (1.0 - g) * a)
    n_b = _rounded_power(D, g * b)
    _check_counts(n_bun * n_b, n_bun * n_t)

    astep = delta ** (g + (1.0 - g) * a)      # fan angle step
    bspace = delta ** (1.0 - g + g * b)       # ball spacing along the core

    bi = np.arange(n_bun)
    col, row = bi % n_cols, bi // n_cols
    centers = np.stack([(col + 0.5) * sx, (row + 0.5) * sy], axis=1)
    base_theta = normalize_angle(math.pi / 2 + row * sy)

    tubes = _build_fan(centers, n_t, astep, delta, base_theta)

    offs = (np.arange(n_b) - (n_b - 1) / 2.0) * bspace
    ex = np.cos(base_theta)[:, None]
    ey = np.sin(base_theta)[:, None]
    balls = np.stack([(centers[:, 0:1] + offs * ex).ravel(),
                      (centers[:, 1:2] + offs * ey).ravel()], axis=1)

    meta = {"construction": 1, "alpha": alpha, "beta": beta, "gamma": g,
            "kappa": kap, "lambda": lam_v, "seed": 0,
            "n_bundles": n_bun, "tubes_per_bundle": n_t, "balls_per_bundle": n_b}
    return Configuration(scale, balls, tubes, delta, delta, meta=meta)


# ---------------------------------------------------------------------------
# construction 2: apex fans on a segment (tube-dominated regime)
# ---------------------------------------------------------------------------

def _segment_apexes(D: int, alpha: float) -> tuple[NDArray[np.float64], float]:
    """Fan apexes evenly spaced by delta^(alpha-1) on the middle half of the
    horizontal midline."""
    spacing = float(D) ** (1.0 - alpha)
    n_bun = max(1, round(D ** (alpha - 1.0) / 2.0))
    xs = 0.5 + (np.arange(n_bun) - (n_bun - 1) / 2.0) * spacing
    return np.stack([xs, np.full(n_bun, 0.5)], axis=1), spacing


def construct2(k: int, alpha: float, beta: float) -> Configuration:
    """Fans through collinear apex balls, for alpha >= beta + 1."""
    scale = Scale(k)
    _check_exponent("alpha", alpha)
    _check_exponent("beta", beta)
    if alpha < beta + 1.0:
        raise ConstructionRegionError(
            f"construct2 needs alpha >= beta + 1, got ({alpha}, {beta})")
    D, delta = scale.D, scale.delta
    apexes, _ = _segment_apexes(D, alpha)
    n_bun = apexes.shape[0]
    n_t = max(1, round(D / 4))
    n_balls = max(1, round(D ** beta / 2.0))
    _check_counts(n_balls, n_bun * n_t)
    tubes = _build_fan(apexes, n_t, delta, delta)
    idx = np.floor((np.arange(n_balls) + 0.5) * n_bun / n_balls).astype(int)
    idx = np.clip(idx, 0, n_bun - 1)
    balls = apexes[idx]
    meta = {"construction": 2, "alpha": alpha, "beta": beta, "seed": 0,
            "n_bundles": n_bun, "tubes_per_bundle": n_t}
    return Configuration(scale, balls, tubes, delta, delta, meta=meta)


# ---------------------------------------------------------------------------
# construction 3: ball columns under vertical tubes (ball-dominated regime)
# ---------------------------------------------------------------------------

def construct3(k: int, alpha: float, beta: float) -> Configuration:
    """Full ball columns, a delta^alpha-separated subset carrying tubes;
    for beta >= alpha + 1."""
    scale = Scale(k)
    _check_exponent("alpha", alpha)
    _check_exponent("beta", beta)
    if beta < alpha + 1.0:
        raise ConstructionRegionError(
            f"construct3 needs beta >= alpha + 1, got ({alpha}, {beta})")
    D, delta = scale.D, scale.delta
    colspace = float(D) ** (1.0 - beta)
    n_cols = max(1, min(round(D ** (beta - 1.0)), math.floor(1.0 / colspace + 1e-9)))
    n_tubes = max(1, min(round(D ** alpha), n_cols))
    _check_counts(n_cols * D, n_tubes)
    col_x = (np.arange(n_cols) + 0.5) * colspace
    ys = (np.arange(D) + 0.5) * delta
    balls = np.stack([np.repeat(col_x, D), np.tile(ys, n_cols)], axis=1)
    t_idx = np.floor((np.arange(n_tubes) + 0.5) * n_cols / n_tubes).astype(int)
    tubes = np.stack([col_x[np.clip(t_idx, 0, n_cols - 1)],
                      np.full(n_tubes, 0.5),
                      np.full(n_tubes, math.pi / 2)], axis=1)
    meta = {"construction": 3, "alpha": alpha, "beta": beta, "seed": 0,
            "n_columns": n_cols}
    return Configuration(scale, balls, tubes, delta, delta, meta=meta)


# ---------------------------------------------------------------------------
# construction 4: apex fans over an ambient ball grid (both sides large)
# ---------------------------------------------------------------------------

def construct4(k: int, alpha: float, beta: float) -> Configuration:
    """Fans of construct2 over a square ball grid, for alpha + beta >= 3."""
    scale = Scale(k)
    _check_exponent("alpha", alpha)
    _check_exponent("beta", beta)
    if alpha + beta < 3.0:
        raise ConstructionRegionError(
            f"construct4 needs alpha + beta >= 3, got ({alpha}, {beta})")
    D, delta = scale.D, scale.delta
    gspace = max(delta ** (beta / 2.0), 1.75 * delta)
    m_side = max(1, round(0.5 / gspace))
    apexes, _ = _segment_apexes(D, alpha)
    n_t = max(1, round(D / 4))
    _check_counts(m_side * m_side, apexes.shape[0] * n_t)
    tubes = _build_fan(apexes, n_t, delta, delta)
    gx = 0.25 + (np.arange(m_side) + 0.5) * gspace
    balls = np.stack(np.meshgrid(gx, gx), axis=-1).reshape(-1, 2)
    meta = {"construction": 4, "alpha": alpha, "beta": beta, "seed": 0,
            "n_bundles": apexes.shape[0], "tubes_per_bundle": n_t,
            "grid_side": m_side}
    return Configuration(scale, balls, tubes, delta, delta, meta=meta)


CONSTRUCTORS = {1: construct1, 2: construct2, 3: construct3, 4: construct4}


def generate(construction: int, k: int, alpha: float, beta: float,
             lam: float | None = None) -> Configuration:
    """Dispatch to the numbered construction."""
    if construction not in CONSTRUCTORS:
        raise ValueError(f"unknown construction {construction!r}; choose 1-4")
    if construction == 1:
        return construct1(k, alpha, beta, lam)
    return CONSTRUCTORS[construction](k, alpha, beta)


# ---------------------------------------------------------------------------
# Furstenberg-type sets
# ---------------------------------------------------------------------------

def furstenberg_product(k: int, u: float) -> Configuration:
    """Balls covering (Cantor set with exponent u) x [0, 1]."""
    scale = Scale(k)
    D, delta = scale.D, scale.delta
    cantor = cantor_generate(k, u)
    xs = cantor.points * delta
    ys = np.arange(D + 1) * delta
    _check_counts(len(xs) * len(ys), 0)
    balls = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1).reshape(-1, 2)
    meta = {"construction": "furstenberg_product", "alpha": None, "beta": None,
            "u": u, "seed": 0}
    return Configuration(scale, balls, np.empty((0, 3)), delta, delta, meta=meta)


@dataclass
class FurstenbergConfig:
    """A tube family with a Cantor-type point set on each tube.

    ``config`` holds the union ball set and the tubes; ``per_tube[i]`` indexes
    the balls lying on tube i (each tube carries ~ D^u of them).
    """

    u: float
    v: float
    config: Configuration
    per_tube: list[NDArray[np.int64]] = field(default_factory=list)

    @property
    def n_points(self) -> int:
        return self.config.n_balls


def furstenberg_config(k: int, u: float, v: float) -> FurstenbergConfig:
    """Build ~D^v tubes each carrying a Cantor fiber of ~D^u delta-balls.

    For v <= 1 the tubes are parallel verticals spaced delta^v; for v > 1
    a fan of ~D^(v-1) directions crosses D offsets.  Fiber points sit at the
    centers of the delta-cells met by the tube midline at Cantor heights, so
    every listed ball meets its tube with margin >= delta/4.
    """
    scale = Scale(k)
    if not (0.0 <= u <= 1.0):
        raise ValueError(f"u must lie in [0, 1], got {u}")
    if not (0.0 <= v <= 2.0):
        raise ValueError(f"v must lie in [0, 2], got {v}")
    D, delta = scale.D, scale.delta
    if v <= 1.0:
        spacing = float(D) ** -v
        n_tubes = max(1, min(round(D ** v), math.floor(1.0 / spacing + 1e-9)))
        xs = (np.arange(n_tubes) + 0.5) * spacing
        tubes = np.stack([xs, np.full(n_tubes, 0.5),
                          np.full(n_tubes, math.pi / 2)], axis=1)
    else:
        n_ang = max(1, round(D ** (v - 1.0)))
        angles = math.pi / 2 + (np.arange(n_ang) - (n_ang - 1) / 2.0) * delta
        xs = (np.arange(D) + 0.5) * delta
        gx, ga = np.meshgrid(xs, angles, indexing="ij")
        tubes = np.stack([gx.ravel(), np.full(gx.size, 0.5),
                          normalize_angle(ga.ravel())], axis=1)
    n_tubes = tubes.shape[0]
    cantor = cantor_generate(k, u)
    heights = cantor.points * delta  # positions along each midline from its start
    # The union of fibers cannot exceed one ball per delta-cell, but the
    # per-tube index table always holds one entry per (tube, height) pair.
    fiber_entries = n_tubes * len(heights)
    _check_counts(min(fiber_entries, D * D), n_tubes)
    entry_limit = 16 * max_objects()
    if fiber_entries > entry_limit:
        raise GuardExceeded(
            f"fiber table would hold {fiber_entries} entries, exceeding "
            f"{entry_limit} (set INCLAB_MAX_OBJECTS to raise it)")

    # Clamp the along-axis offset half a cell inside the tube ends so that the
    # snapped cell center always lies within distance delta of the rectangle.
    along = np.clip(heights - 0.5, -0.5 + delta / 2.0, 0.5 - delta / 2.0)

    def tube_cell_keys(rows: NDArray[np.float64]) -> NDArray[np.int64]:
        """Cell key per (tube, height); -1 where the point leaves the square."""
        ux = np.cos(rows[:, 2])[:, None]
        uy = np.sin(rows[:, 2])[:, None]
        px = rows[:, 0][:, None] + along * ux
        py = rows[:, 1][:, None] + along * uy
        ix = np.floor(px / delta).astype(np.int64)
        iy = np.floor(py / delta).astype(np.int64)
        keys = ix * D + iy
        valid = (ix >= 0) & (ix < D) & (iy >= 0) & (iy < D)
        return np.where(valid, keys, -1)

    chunk = max(1, (1 << 22) // max(1, len(heights)))
    uniq_parts = []
    for s in range(0, n_tubes, chunk):
        part = np.unique(tube_cell_keys(tubes[s:s + chunk]))
        uniq_parts.append(part[part >= 0])
    uniq = np.unique(np.concatenate(uniq_parts))
    per_tube: list[NDArray[np.int64]] = []
    for s in range(0, n_tubes, chunk):
        keys = tube_cell_keys(tubes[s:s + chunk])
        for row in keys:
            u_row = np.unique(row)
            if u_row.size and u_row[0] < 0:
                u_row = u_row[1:]
            per_tube.append(np.searchsorted(uniq, u_row))
    balls = np.stack([((uniq // D) + 0.5) * delta, ((uniq % D) + 0.5) * delta],
                     axis=1)
    meta = {"construction": "furstenberg", "alpha": None, "beta": None,
            "u": u, "v": v, "seed": 0}
    cfg = Configuration(scale, balls, tubes, delta, delta, meta=meta)
    return FurstenbergConfig(u, v, cfg, per_tube)


# ---------------------------------------------------------------------------
# regularization
# ---------------------------------------------------------------------------

def heavy_squares(centers: NDArray[np.float64], k: int, beta: float,
                  K_beta: float) -> list[tuple[int, int, int]]:
    """Maximal dyadic squares (n, ix, iy) of side w = 2^-n, delta < w < 1,
    holding at least K_beta (w/delta)^(beta+1) ball centers."""
    centers = np.asarray(centers, dtype=np.float64).reshape(-1, 2)
    chosen: set[tuple[int, int, int]] = set()
    out: list[tuple[int, int, int]] = []
    for n in range(1, k):
        w = 2.0 ** -n
        threshold = K_beta * (w * 2.0 ** k) ** (beta + 1.0)
        ix = np.floor(centers[:, 0] / w).astype(np.int64)
        iy = np.floor(centers[:, 1] / w).astype(np.int64)
        keys, counts = np.unique(ix * (2 ** n) + iy, return_counts=True)
        for key, cnt in zip(keys.tolist(), counts.tolist()):
            if cnt < threshold:
                continue
            qx, qy = divmod(key, 2 ** n)
            covered = any((pn, qx >> (n - pn), qy >> (n - pn)) in chosen
                          for pn in range(1, n))
            if not covered:
                chosen.add((n, qx, qy))
                out.append((n, qx, qy))
    return out


def regularize(centers: NDArray[np.float64], k: int, beta: float,
               K_beta: float) -> NDArray[np.float64]:
    """Replace over-dense dyadic squares by standard product sets.

    Every maximal square of side w holding >= K_beta (w/delta)^(beta+1)
    centers is emptied and refilled with round(K_beta) superposed copies of
    the side-w product set anchored at the square's corner.  Centers must lie
    on the delta (2Z+1) lattice.  A set with no over-dense square is returned
    unchanged.
    """
    scale = Scale(k)
    delta = scale.delta
    centers = np.asarray(centers, dtype=np.float64).reshape(-1, 2)
    if K_beta < 1.0:
        raise ValueError(f"K_beta must be at least 1, got {K_beta}")
    lattice = centers / delta
    near = np.round(lattice)
    if not (np.allclose(lattice, near, atol=1e-9) and np.all(near.astype(np.int64) % 2 == 1)):
        raise ValueError("ball centers must lie on the delta (2Z+1) lattice")
    squares = heavy_squares(centers, k, beta, K_beta)
    if not squares:
        return centers.copy()
    copies = int(round(K_beta))
    keep = np.ones(len(centers), dtype=bool)
    pieces = []
    for n, qx, qy in squares:
        w = 2.0 ** -n
        inside = ((centers[:, 0] >= qx * w) & (centers[:, 0] < (qx + 1) * w)
                  & (centers[:, 1] >= qy * w) & (centers[:, 1] < (qy + 1) * w))
        keep &= ~inside
        pw = build_Pw(k, w, beta)
        if pw.n_balls:
            block = pw.translated(qx * w, qy * w)
            pieces.extend([block] * copies)
    pieces.insert(0, centers[keep])
    return np.concatenate(pieces, axis=0)
