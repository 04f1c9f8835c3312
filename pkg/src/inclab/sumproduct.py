"""Sum-product experiment: arithmetic-progression and Cantor inputs on a
line, covered sumset/product-set axes, and the tube family y = c x - b c.

Everything is built in the window [1, 4]^2 and mapped into the unit square by
dividing by 4, so the standard incidence engine applies unchanged; widths and
radii scale along (the working scale becomes k + 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .cantor import cantor_generate
from .constructions import max_objects
from .geometry import Configuration, GuardExceeded, Scale, points_tube_dist2
from .spacing import ball_profile_dyadic, tube_profile

WINDOW_LO, WINDOW_HI = 1.0, 4.0
FRAME = WINDOW_HI  # divide-by-4 map into the unit square
_REL = 1e-9


@dataclass(frozen=True)
class LineSet:
    """A 1D family of disjoint delta-balls on [1, 2] with its declared
    spacing exponent s and constant K."""

    centers: NDArray[np.float64]
    s: float
    K: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "centers",
                           np.sort(np.asarray(self.centers, dtype=np.float64).ravel()))

    def __len__(self) -> int:
        return len(self.centers)


def ap_line(k: int) -> LineSet:
    """Full arithmetic progression of step 2.5 delta: a (delta, 1, 2.5)-set."""
    delta = Scale(k).delta
    step = 2.5 * delta
    n = math.floor(1.0 / step) + 1
    return LineSet(1.0 + step * np.arange(n), 1.0, 2.5)


def cantor_line(k: int, s: float) -> LineSet:
    """Mass-splitting Cantor set rescaled onto [1, 2] with spacing 4 delta:
    a (delta, s, 4)-set."""
    if k < 3:
        raise ValueError("cantor_line needs k >= 3")
    delta = Scale(k).delta
    pts = cantor_generate(k - 2, s).points
    return LineSet(1.0 + pts * (4.0 * delta), s, 4.0)


def minimal_cover(values: NDArray[np.float64], delta: float,
                  hi: float | None = None) -> NDArray[np.float64]:
    """Greedy minimal centers of radius-delta intervals covering the union of
    [v - delta, v + delta]; optimal for 1D interval unions.

    When ``hi`` is given the last center is pulled back to it, which never
    changes the count: a center only lands past ``hi`` when every remaining
    interval already fits under the pulled-back ball.
    """
    vals = np.unique(np.asarray(values, dtype=np.float64).ravel())
    centers: list[float] = []
    covered = -math.inf
    for v in vals:
        if v + delta <= covered + delta * _REL:
            continue
        start = max(v - delta, covered)
        c = start + delta
        if hi is not None and c > hi:
            c = hi
        centers.append(c)
        covered = c + delta
    return np.array(centers, dtype=np.float64)


def assign_cover(centers: NDArray[np.float64], values: NDArray[np.float64],
                 delta: float) -> NDArray[np.int64]:
    """Index of the covering center for each value (nearest center)."""
    values = np.asarray(values, dtype=np.float64)
    if len(centers) == 1:
        pick = np.zeros(len(values), dtype=np.int64)
    else:
        pos = np.clip(np.searchsorted(centers, values), 1, len(centers) - 1)
        left = pos - 1
        pick = np.where(np.abs(centers[left] - values)
                        <= np.abs(centers[pos] - values), left, pos)
    gap = np.abs(centers[pick] - values)
    if gap.size and gap.max() > delta * (1 + _REL):
        raise AssertionError(
            f"cover misses a value by {gap.max():.3e} > delta = {delta:.3e}")
    return pick


@dataclass
class SumProductInstance:
    """Inputs A, B, C with the derived covers X, Y, the product ball set F,
    and one tube per (b, c) pair carrying its fiber F_bc (ball indices)."""

    k: int
    A: LineSet
    B: LineSet
    C: LineSet
    X: NDArray[np.float64]
    Y: NDArray[np.float64]
    config: Configuration
    per_tube: list[NDArray[np.int64]] = field(default_factory=list)

    @property
    def lhs(self) -> float:
        """max(|A+B|_delta, |A.C|_delta)."""
        return float(max(len(self.X), len(self.Y)))

    @property
    def c_exponent(self) -> float:
        return 1.0 / max(self.A.s + self.B.s + self.C.s, 2.0)

    @property
    def rhs(self) -> float:
        """Lower-bound expression with constant 1 and epsilon 0."""
        c = self.c_exponent
        e = c / (2.0 * (1.0 - c))
        D = float(2 ** self.k)
        return (self.A.K ** -e * self.B.K ** -e * D ** -e
                * len(self.B) ** e * len(self.C) ** e
                * len(self.A) ** (1.0 / (2.0 * (1.0 - c))))

    def to_json_dict(self) -> dict:
        return {
            "k": self.k,
            "dims": [self.A.s, self.B.s, self.C.s],
            "Ks": [self.A.K, self.B.K, self.C.K],
            "sizes": {"A": len(self.A), "B": len(self.B), "C": len(self.C),
                      "X": len(self.X), "Y": len(self.Y),
                      "F": self.config.n_balls, "tubes": self.config.n_tubes},
            "lhs": self.lhs,
            "rhs": self.rhs,
            "config": self.config.to_json_dict(),
        }


def _validate_line(name: str, line: LineSet, delta: float) -> None:
    c = line.centers
    if c.size == 0:
        raise ValueError(f"{name} must hold at least one ball")
    if c.min() < 1.0 - _REL or c.max() > 2.0 + _REL:
        raise ValueError(f"{name} centers must lie in [1, 2]")
    if c.size > 1 and np.diff(c).min() < 2.0 * delta * (1 - _REL):
        raise ValueError(f"{name} balls must be disjoint "
                         f"(min gap {np.diff(c).min():.3e} < 2 delta)")
    if not (0.0 <= line.s <= 1.0):
        raise ValueError(f"{name} exponent must lie in [0, 1], got {line.s}")
    if line.K < 1.0:
        raise ValueError(f"{name} constant must be >= 1, got {line.K}")


def build_instance(k: int, A: LineSet, B: LineSet, C: LineSet) -> SumProductInstance:
    """Assemble covers, product balls, tubes, and fibers from line inputs."""
    scale = Scale(k)
    delta = scale.delta
    for name, line in (("A", A), ("B", B), ("C", C)):
        _validate_line(name, line, delta)
    if B.s + C.s <= 1.0:
        raise ValueError(
            f"need v + v' > 1 for the lower bound, got {B.s} + {C.s}")

    a, b, c_ = A.centers, B.centers, C.centers
    sums = np.add.outer(b, a).ravel()
    prods = np.multiply.outer(c_, a).ravel()
    X = minimal_cover(sums, delta, hi=WINDOW_HI)
    Y = minimal_cover(prods, delta, hi=WINDOW_HI)

    n_tubes = len(b) * len(c_)
    n_balls = len(X) * len(Y)
    if max(n_balls, n_tubes) > max_objects():
        raise GuardExceeded(
            f"{n_balls} balls / {n_tubes} tubes exceed the object guard "
            f"{max_objects()} (set INCLAB_MAX_OBJECTS to raise it)")

    # Working frame: divide by 4, radius and width delta/4 at scale k + 2.
    fine = Scale(k + 2)
    fx, fy = np.meshgrid(X, Y, indexing="ij")
    balls = np.stack([fx.ravel(), fy.ravel()], axis=1) / FRAME

    bb = np.repeat(b, len(c_))
    cc = np.tile(c_, len(b))
    mid_x = (WINDOW_LO + WINDOW_HI) / 2.0
    tubes = np.stack([np.full(n_tubes, mid_x / FRAME),
                      (cc * mid_x - bb * cc) / FRAME,
                      np.arctan(cc)], axis=1)
    lengths = (WINDOW_HI - WINDOW_LO) * np.hypot(1.0, cc) / FRAME

    per_tube: list[NDArray[np.int64]] = []
    ix_by_b = {float(bv): assign_cover(X, a + bv, delta) for bv in b}
    iy_by_c = {float(cv): assign_cover(Y, a * cv, delta) for cv in c_}
    m = len(Y)
    for bv, cv in zip(bb.tolist(), cc.tolist()):
        keys = np.unique(ix_by_b[bv] * m + iy_by_c[cv])
        per_tube.append(keys)

    meta = {"construction": "sumproduct", "alpha": None, "beta": None,
            "base_k": k, "window": [WINDOW_LO, WINDOW_HI], "frame": FRAME,
            "dims": [A.s, B.s, C.s], "Ks": [A.K, B.K, C.K], "seed": 0}
    cfg = Configuration(fine, balls, tubes, fine.delta, fine.delta,
                        tube_lengths=lengths, meta=meta)
    return SumProductInstance(k, A, B, C, X, Y, cfg, per_tube)


@dataclass
class SumProductReport:
    """Structural and slope-level verification results."""

    tube_count_ok: bool
    fibers_incident: bool
    worst_fiber_gap: float
    fiber_K_max: float
    fiber_K_bound: float
    fibers_valid: bool
    tube_K: float
    lhs: float
    rhs: float
    ratio: float

    @property
    def all_ok(self) -> bool:
        return bool(self.tube_count_ok and self.fibers_incident
                    and self.fibers_valid)

    def to_dict(self) -> dict:
        return {
            "tube_count_ok": self.tube_count_ok,
            "fibers_incident": self.fibers_incident,
            "worst_fiber_gap": self.worst_fiber_gap,
            "fiber_K_max": self.fiber_K_max,
            "fiber_K_bound": self.fiber_K_bound,
            "fibers_valid": self.fibers_valid,
            "tube_K": self.tube_K,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "ratio": self.ratio,
            "all_ok": self.all_ok,
        }


def verify_instance(inst: SumProductInstance,
                    fiber_profiles: bool = True) -> SumProductReport:
    """Check the structural facts exactly and evaluate the slope-level
    inequality with constant 1.

    Structural: the tube count equals |B||C|; every tube meets every ball of
    its fiber; with ``fiber_profiles`` each fiber passes ball validation at
    exponent u within 4 * 64 * K_u.
    """
    cfg = inst.config
    tube_count_ok = cfg.n_tubes == len(inst.B) * len(inst.C)

    thr = cfg.ball_r * (1.0 + 1e-12)
    worst = 0.0
    incident = True
    for i, idx in enumerate(inst.per_tube):
        d2 = points_tube_dist2(cfg.balls[idx], cfg.tubes[i, 0],
                               cfg.tubes[i, 1], cfg.tubes[i, 2],
                               cfg.tube_width, float(cfg.tube_lengths[i]))
        gap = float(np.sqrt(d2.max())) if d2.size else 0.0
        worst = max(worst, gap)
        if gap > thr:
            incident = False

    k_fine = inst.k + 2
    bound = 4.0 * 64.0 * inst.A.K
    k_max = 0.0
    if fiber_profiles:
        for idx in inst.per_tube:
            prof = ball_profile_dyadic(cfg.balls[idx], cfg.ball_r, k_fine,
                                       inst.A.s)
            k_max = max(k_max, prof.implied_K)
    fibers_valid = (not fiber_profiles) or k_max <= bound

    tube_K = tube_profile(cfg.tubes, cfg.tube_width, k_fine,
                          inst.B.s + inst.C.s, mode="net",
                          lengths=cfg.tube_lengths).implied_K

    lhs, rhs = inst.lhs, inst.rhs
    return SumProductReport(tube_count_ok, incident, worst, k_max, bound,
                            fibers_valid, tube_K, lhs, rhs, lhs / rhs)


def standard_instance(kind: str, k: int, s: float = 0.8) -> SumProductInstance:
    """The two stock inputs: 'ap' (u = v = v' = 1) and 'cantor' (u = v = v' = s)."""
    if kind == "ap":
        line = ap_line(k)
    elif kind == "cantor":
        line = cantor_line(k, s)
    else:
        raise ValueError(f"unknown sum-product input kind {kind!r}")
    return build_instance(k, line, line, line)


def sweep_sumproduct(kind: str, k_min: int, k_max: int,
                     s: float = 0.8) -> dict:
    """LHS and RHS across scales with fitted log2 slopes (structure checked
    once at the smallest scale; covers and sizes recomputed at every scale)."""
    if k_max - k_min + 1 < 2:
        raise ValueError("sweep needs at least two scales")
    rows = []
    for k in range(k_min, k_max + 1):
        inst = standard_instance(kind, k, s)
        rows.append({"k": k, "n_A": len(inst.A), "n_tubes": inst.config.n_tubes,
                     "n_X": len(inst.X), "n_Y": len(inst.Y),
                     "lhs": inst.lhs, "rhs": inst.rhs})
    ks = np.array([r["k"] for r in rows], dtype=np.float64)
    lhs_slope = float(np.polyfit(ks, np.log2([r["lhs"] for r in rows]), 1)[0])
    rhs_slope = float(np.polyfit(ks, np.log2([r["rhs"] for r in rows]), 1)[0])
    return {"kind": kind, "rows": rows, "lhs_slope": lhs_slope,
            "rhs_slope": rhs_slope, "margin": lhs_slope - rhs_slope}
