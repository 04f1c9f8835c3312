"""Exact incidence counting and the operators built on top of it.

A ball and a tube are *incident* when the closed disk meets the closed
rectangle.  ``count_brute`` tests every pair; ``count_grid`` buckets ball
centers into cells of side max(4 delta, 2^-10) and tests only the balls in
cells adjacent to each tube's spine.  Both engines evaluate the identical
predicate expression on float64, so their reports agree bit for bit.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from inclab.geometry import (
    TOL,
    Configuration,
    GuardExceeded,
    Tube,
    angle_between,
    essential_overlap,
    normalize_angle,
    points_tube_dist2,
    tubes_intersect,
)

# Pair guard for the all-pairs engine.
BRUTE_PAIR_GUARD = 10 ** 8

# Cell-key packing base; grid indices stay far below 2^20 for k <= 24.
_KB = 1 << 21
_KOFF = 1 << 20


@dataclass
class IncidenceReport:
    """Exact incidence count with per-object tallies."""

    count: int
    per_tube: NDArray[np.int64]
    per_ball: NDArray[np.int64]
    method: str
    seconds: float

    def to_dict(self, include_vectors: bool = False) -> dict:
        out = {"count": self.count, "method": self.method, "seconds": self.seconds,
               "n_balls": len(self.per_ball), "n_tubes": len(self.per_tube)}
        if include_vectors:
            out["per_tube"] = self.per_tube.tolist()
            out["per_ball"] = self.per_ball.tolist()
        return out


def _tube_length(cfg: Configuration, i: int) -> float:
    return 1.0 if cfg.tube_lengths is None else float(cfg.tube_lengths[i])


def _incident_mask(cfg: Configuration, i: int,
                   ball_idx: NDArray[np.int64] | None = None) -> NDArray[np.bool_]:
    pts = cfg.balls if ball_idx is None else cfg.balls[ball_idx]
    cx, cy, theta = cfg.tubes[i]
    d2 = points_tube_dist2(pts, cx, cy, theta, cfg.tube_width, _tube_length(cfg, i))
    thr = cfg.ball_r * (1.0 + TOL)
    return d2 <= thr * thr


def incident_ball_indices(cfg: Configuration, i: int) -> NDArray[np.int64]:
    """Indices of the balls incident to tube i."""
    return np.nonzero(_incident_mask(cfg, i))[0]


def count_brute(cfg: Configuration, threads: int = 1) -> IncidenceReport:
    """All-pairs incidence count; guarded at 10^8 ball-tube pairs."""
    pairs = cfg.n_balls * cfg.n_tubes
    if pairs > BRUTE_PAIR_GUARD:
        raise GuardExceeded(
            f"{cfg.n_balls} x {cfg.n_tubes} pairs exceeds the brute guard "
            f"{BRUTE_PAIR_GUARD}; use count_grid")
    started = time.perf_counter()
    per_tube = np.zeros(cfg.n_tubes, dtype=np.int64)
    per_ball = np.zeros(cfg.n_balls, dtype=np.int64)

    def run(chunk: range) -> tuple[range, NDArray, NDArray]:
        pt = np.zeros(len(chunk), dtype=np.int64)
        pb = np.zeros(cfg.n_balls, dtype=np.int64)
        for pos, i in enumerate(chunk):
            mask = _incident_mask(cfg, i)
            pt[pos] = int(mask.sum())
            pb += mask
        return chunk, pt, pb

    for chunk, pt, pb in _over_tube_chunks(cfg.n_tubes, threads, run):
        per_tube[chunk.start:chunk.stop] = pt
        per_ball += pb
    return IncidenceReport(int(per_tube.sum()), per_tube, per_ball, "brute",
                           time.perf_counter() - started)


class _BallGrid:
    """Cell buckets over ball centers, CSR layout for vectorized gathering."""

    def __init__(self, balls: NDArray[np.float64], cell: float):
        self.cell = cell
        ix = np.floor(balls[:, 0] / cell).astype(np.int64) + _KOFF
        iy = np.floor(balls[:, 1] / cell).astype(np.int64) + _KOFF
        keys = ix * _KB + iy
        self.order = np.argsort(keys, kind="stable")
        skeys = keys[self.order]
        self.uniq, self.starts = np.unique(skeys, return_index=True)
        self.ends = np.append(self.starts[1:], len(skeys))
        ring = np.arange(-1, 2, dtype=np.int64)
        self.ring = (ring[:, None] * _KB + ring[None, :]).ravel()

    def candidates(self, cx: float, cy: float, theta: float, length: float) -> NDArray[np.int64]:
        """Ball indices in cells within one ring of the tube spine."""
        g = self.cell
        n_samp = int(math.ceil(2.0 * length / g)) + 1
        if n_samp > 1:
            ts = np.linspace(-length / 2.0, length / 2.0, n_samp)
        else:
            ts = np.zeros(1)
        px = cx + ts * math.cos(theta)
        py = cy + ts * math.sin(theta)
        base = ((np.floor(px / g).astype(np.int64) + _KOFF) * _KB
                + np.floor(py / g).astype(np.int64) + _KOFF)
        cand = np.unique(base[:, None] + self.ring[None, :])
        pos = np.searchsorted(self.uniq, cand)
        valid = pos < len(self.uniq)
        pos = pos[valid]
        pos = pos[self.uniq[pos] == cand[valid]]
        if pos.size == 0:
            return np.empty(0, dtype=np.int64)
        ss, ee = self.starts[pos], self.ends[pos]
        counts = ee - ss
        total = int(counts.sum())
        take = (np.arange(total, dtype=np.int64)
                - np.repeat(np.cumsum(counts) - counts, counts)
                + np.repeat(ss, counts))
        return self.order[take]


def grid_cell_size(delta: float) -> float:
    return max(4.0 * delta, 2.0 ** -10)


def count_grid(cfg: Configuration, threads: int = 1) -> IncidenceReport:
    """Grid-accelerated incidence count; identical results to count_brute."""
    started = time.perf_counter()
    grid = _BallGrid(cfg.balls, grid_cell_size(cfg.scale.delta)) if cfg.n_balls else None
    per_tube = np.zeros(cfg.n_tubes, dtype=np.int64)
    per_ball = np.zeros(cfg.n_balls, dtype=np.int64)

    def run(chunk: range) -> tuple[range, NDArray, NDArray]:
        pt = np.zeros(len(chunk), dtype=np.int64)
        hits: list[NDArray] = []
        for pos, i in enumerate(chunk):
            cx, cy, theta = cfg.tubes[i]
            cand = grid.candidates(cx, cy, theta, _tube_length(cfg, i))
            if cand.size == 0:
                continue
            mask = _incident_mask(cfg, i, cand)
            pt[pos] = int(mask.sum())
            hits.append(cand[mask])
        pb = (np.bincount(np.concatenate(hits), minlength=cfg.n_balls)
              if hits else np.zeros(cfg.n_balls, dtype=np.int64))
        return chunk, pt, pb.astype(np.int64)

    if grid is not None:
        for chunk, pt, pb in _over_tube_chunks(cfg.n_tubes, threads, run):
            per_tube[chunk.start:chunk.stop] = pt
            per_ball += pb
    return IncidenceReport(int(per_tube.sum()), per_tube, per_ball, "grid",
                           time.perf_counter() - started)


def _over_tube_chunks(n_tubes: int, threads: int, run):
    threads = max(1, int(threads))
    if threads == 1 or n_tubes < 256:
        yield run(range(n_tubes))
        return
    size = max(64, -(-n_tubes // threads))
    chunks = [range(lo, min(lo + size, n_tubes)) for lo in range(0, n_tubes, size)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        yield from pool.map(run, chunks)


def count(cfg: Configuration, method: str = "grid", threads: int = 1) -> IncidenceReport:
    """Count incidences with the chosen engine."""
    if method == "brute":
        return count_brute(cfg, threads)
    if method == "grid":
        return count_grid(cfg, threads)
    raise ValueError(f"unknown counting method {method!r}")


# ---------------------------------------------------------------------------
# angle buckets and moments
# ---------------------------------------------------------------------------

def tubes_at_angle(cfg: Configuration, t_index: int, w: float) -> NDArray[np.int64]:
    """Indices of tubes meeting tube t whose direction gap falls in the
    dyadic band of w: [0, 2 delta] when w = delta, else (w, 2w].

    The bands partition [0, pi/2] as w runs over delta, 2 delta, 4 delta, ...
    """
    delta = cfg.scale.delta
    if w < delta * (1 - TOL):
        raise ValueError(f"band width {w} is below delta = {delta}")
    t = cfg.tube_at(t_index)
    gaps = angle_between(cfg.tubes[:, 2], t.theta)
    if abs(w - delta) <= TOL * delta:
        mask = gaps <= 2.0 * delta * (1.0 + TOL)
    else:
        mask = (gaps > w * (1.0 + TOL)) & (gaps <= 2.0 * w * (1.0 + TOL))
    out = []
    for j in np.nonzero(mask)[0]:
        if tubes_intersect(cfg.tube_at(int(j)), t):
            out.append(int(j))
    return np.array(out, dtype=np.int64)


def moment_J(cfg: Configuration, alpha: float, b: float,
             report: IncidenceReport | None = None) -> float:
    """sum over balls of |T(p)|^((b + alpha)/alpha)."""
    if alpha <= 0:
        raise ValueError("moment exponent needs alpha > 0")
    if report is None:
        report = count_grid(cfg)
    counts = report.per_ball.astype(np.float64)
    return float(np.sum(counts ** ((b + alpha) / alpha)))


def moment_j(cfg: Configuration, t_index: int, alpha: float, b: float,
             report: IncidenceReport | None = None) -> float:
    """sum over balls incident to tube t of |T(p)|^(b/alpha)."""
    if alpha <= 0:
        raise ValueError("moment exponent needs alpha > 0")
    if report is None:
        report = count_grid(cfg)
    idx = incident_ball_indices(cfg, t_index)
    counts = report.per_ball[idx].astype(np.float64)
    return float(np.sum(counts ** (b / alpha)))


# ---------------------------------------------------------------------------
# thickening, coloring, duality
# ---------------------------------------------------------------------------

def thicken(cfg: Configuration, S: int) -> Configuration:
    """Inflate balls and tubes to the coarser scale S delta."""
    if not (isinstance(S, int) and S >= 1):
        raise ValueError(f"thickening factor must be a positive integer, got {S}")
    if S * cfg.scale.delta > 1.0:
        raise ValueError(f"thickened width {S * cfg.scale.delta} exceeds 1")
    meta = dict(cfg.meta)
    meta["thicken_S"] = S * meta.get("thicken_S", 1)
    return Configuration(cfg.scale, cfg.balls.copy(), cfg.tubes.copy(),
                         cfg.ball_r * S, cfg.tube_width * S,
                         None if cfg.tube_lengths is None else cfg.tube_lengths.copy(),
                         meta)


def color_balls(cfg: Configuration) -> NDArray[np.int64]:
    """Greedy proper coloring; balls conflict when their disks meet."""
    n = cfg.n_balls
    labels = np.full(n, -1, dtype=np.int64)
    if n == 0:
        return labels
    r = cfg.ball_r
    cell = 2.0 * r
    buckets: dict[tuple[int, int], list[int]] = {}
    thr = (2.0 * r * (1.0 + TOL)) ** 2
    for i in range(n):
        cx, cy = cfg.balls[i]
        ci, cj = int(math.floor(cx / cell)), int(math.floor(cy / cell))
        used = set()
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                for j in buckets.get((ci + di, cj + dj), ()):
                    dx, dy = cx - cfg.balls[j, 0], cy - cfg.balls[j, 1]
                    if dx * dx + dy * dy <= thr:
                        used.add(int(labels[j]))
        color = 0
        while color in used:
            color += 1
        labels[i] = color
        buckets.setdefault((ci, cj), []).append(i)
    return labels


def color_tubes(cfg: Configuration) -> NDArray[np.int64]:
    """Greedy proper coloring; tubes conflict when either essential overlap
    reaches 1/2."""
    n = cfg.n_tubes
    labels = np.full(n, -1, dtype=np.int64)
    if n == 0:
        return labels
    objs = [cfg.tube_at(i) for i in range(n)]
    lengths = np.array([t.length for t in objs])
    theta = cfg.tubes[:, 2]
    w = cfg.tube_width
    sin_window = min(1.0, 4.0 * w / float(lengths.min()))
    for i in range(n):
        gaps = angle_between(theta[:i], theta[i])
        dx = cfg.tubes[:i, 0] - cfg.tubes[i, 0]
        dy = cfg.tubes[:i, 1] - cfg.tubes[i, 1]
        near = ((np.sin(gaps) <= sin_window)
                & (dx * dx + dy * dy <= ((lengths[:i] + lengths[i]) / 2 + 2 * w) ** 2))
        used = set()
        for j in np.nonzero(near)[0]:
            if (essential_overlap(objs[int(j)], objs[i]) >= 0.5 * (1 - TOL)
                    or essential_overlap(objs[i], objs[int(j)]) >= 0.5 * (1 - TOL)):
                used.add(int(labels[j]))
        color = 0
        while color in used:
            color += 1
        labels[i] = color
    return labels


def dualize(cfg: Configuration) -> Configuration:
    """Swap balls and tubes through point-line duality.

    A tube with midline y = m x + q (|m| <= 1 required) maps to the ball at
    (m, q); a ball at (p, q) maps to the tube with midline y = -p x + q over
    the window x in [-1, 1].  Applying dualize twice restores the midline
    parameters to within 1e-12 (the angle encoding costs one tan/arctan pair);
    the second pass flips both sign conventions (tracked by meta["dual"]).
    """
    dual_flag = bool(cfg.meta.get("dual", False))
    sign = -1.0 if not dual_flag else 1.0
    theta = cfg.tubes[:, 2]
    slopes = np.tan(theta)
    if np.any(np.abs(slopes) > 1.0 + 1e-9):
        raise ValueError("dualize requires every tube slope |tan theta| <= 1")
    q_t = cfg.tubes[:, 1] - slopes * cfg.tubes[:, 0]
    new_balls = np.stack([-sign * slopes, q_t], axis=1)

    p = cfg.balls[:, 0]
    q_b = cfg.balls[:, 1]
    dir_theta = normalize_angle(np.arctan2(sign * p, np.ones_like(p)))
    new_tubes = np.stack([np.zeros_like(p), q_b, dir_theta], axis=1)
    new_lengths = 2.0 * np.hypot(1.0, p)
    meta = dict(cfg.meta)
    meta["dual"] = not dual_flag
    return Configuration(cfg.scale, new_balls, new_tubes, cfg.ball_r,
                         cfg.tube_width, new_lengths, meta)
