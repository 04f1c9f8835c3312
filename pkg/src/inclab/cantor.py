"""Discrete Cantor-type sets with prescribed branching exponent.

``cantor_generate`` distributes an integer mass T ~ D^s down a depth-k binary
tree, capping every node at level j by ceil(2^((k-j)s)) and always filling the
left child first.  The leaves carrying mass are the points of the set; the
right endpoint D is appended so the set spans [0, D].  The construction gives
exact window counts: every dyadic window of length d holds at most
ceil((d/delta)^s) + 1 points, and each prefix window holds at least
min((d/delta)^s, T) of them.

``build_Pw`` crosses such a set with the full column/row grid to produce the
planar product sets used by the regularization step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from inclab.geometry import Scale, Tube, points_tube_dist2


def _ceil_power(k_times_s: float) -> int:
    """ceil(2^x) robust to float error for near-integer exponents."""
    x = 2.0 ** k_times_s
    return int(math.ceil(x - max(1e-9, x * 1e-12)))


def _check_s(s: float) -> None:
    if not (0.0 <= s <= 1.0):
        raise ValueError(f"branching exponent s must lie in [0, 1], got {s}")


@dataclass(frozen=True)
class DiscreteCantor:
    """Integer point set in [0, D], D = 2^k, with branching exponent s."""

    k: int
    s: float
    points: NDArray[np.int64]

    @property
    def D(self) -> int:
        return 2 ** self.k

    @property
    def T(self) -> int:
        """The distributed mass; the set has T + 1 points."""
        return len(self.points) - 1

    def prefix_count(self, d_cells: int) -> int:
        """Number of points in the prefix window [0, d_cells)."""
        return int(np.searchsorted(self.points, d_cells))


def cantor_generate(k: int, s: float) -> DiscreteCantor:
    """Generate the depth-k discrete Cantor set with exponent s.

    s = 0 yields the two endpoints {0, D}; s = 1 yields all of {0, ..., D}.
    """
    Scale(k)  # validates the range
    _check_s(s)
    T = _ceil_power(k * s)
    caps = [_ceil_power((k - j) * s) for j in range(k + 1)]
    # (cell index, mass) pairs at the current level; left-biased splitting
    # keeps every mass within its level cap (cap_j <= 2 cap_{j+1}).
    nodes: list[tuple[int, int]] = [(0, T)]
    for j in range(k):
        cap = caps[j + 1]
        nxt: list[tuple[int, int]] = []
        for m, mass in nodes:
            left = min(cap, mass)
            right = mass - left
            if left:
                nxt.append((2 * m, left))
            if right:
                nxt.append((2 * m + 1, right))
        nodes = nxt
    points = np.array(sorted(m for m, _ in nodes) + [2 ** k], dtype=np.int64)
    return DiscreteCantor(k, s, points)


@dataclass(frozen=True)
class ProductSet:
    """Grid of delta-balls in [0, w]^2 concentrated on Cantor columns/rows.

    Balls sit at (m delta, n delta) for 1 <= m, n < w/delta with m or n an
    interior point of the generating Cantor set; centers are in the global
    frame anchored at the square's corner (0, 0).
    """

    k: int          # global scale; delta = 2^-k
    w: float        # square side
    s: float
    balls: NDArray[np.float64]
    cantor: DiscreteCantor

    @property
    def n_balls(self) -> int:
        return self.balls.shape[0]

    def translated(self, x0: float, y0: float) -> NDArray[np.float64]:
        return self.balls + np.array([x0, y0])


def build_Pw(k: int, w: float, s: float) -> ProductSet:
    """Build the product set on the side-w square at global scale k.

    w must be a power-of-two multiple of 2 delta so the square subdivides
    dyadically down to delta.
    """
    _check_s(s)
    delta = 2.0 ** -k
    ratio = w / delta
    kw = round(math.log2(ratio)) if ratio > 0 else 0
    if not (1 <= kw <= k) or 2 ** kw != round(ratio) or abs(ratio - round(ratio)) > 1e-9:
        raise ValueError(
            f"square side {w} must be a power-of-two multiple of 2*delta={2 * delta}")
    cantor = cantor_generate(kw, s)
    Dw = 2 ** kw
    interior = cantor.points[(cantor.points >= 1) & (cantor.points < Dw)]
    if interior.size == 0:
        return ProductSet(k, w, s, np.empty((0, 2)), cantor)
    mask = np.zeros((Dw - 1, Dw - 1), dtype=bool)
    mask[interior - 1, :] = True
    mask[:, interior - 1] = True
    mi, ni = np.nonzero(mask)
    balls = np.stack([(mi + 1) * delta, (ni + 1) * delta], axis=1)
    return ProductSet(k, w, s, balls, cantor)


def tube_hits_Pw(t: Tube, pw: ProductSet) -> int:
    """Number of product-set balls the tube meets."""
    if pw.n_balls == 0:
        return 0
    delta = 2.0 ** -pw.k
    d2 = points_tube_dist2(pw.balls, t.cx, t.cy, t.theta, t.width, t.length)
    thr = delta * (1.0 + 1e-12)
    return int(np.sum(d2 <= thr * thr))
