"""Spacing certification: non-concentration profiles and overlap degrees.

A set of delta-balls is *(delta, s, K)-spaced* when every ball of radius
w >= delta contains at most K (w/delta)^s of them; tubes are measured the same
way against width-w query tubes.  The profiles below certify the best K a
data set achieves, level by level, together with a witness query realizing
the maximum at each level.

Two regimes are offered per object type:

* ``dyadic``/``net`` - queries drawn from fixed dyadic grids and direction
  nets only.  Fast, deterministic, and within a bounded factor of the true
  maximum (see ``ball_profile_dyadic``).
* ``brute`` - additionally anchors queries on the data objects themselves
  and includes the w = delta level.  Quadratic, guarded at 10^4 objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from inclab.geometry import TOL, GuardExceeded, essential_overlap, Tube

# Brute-force profiles and degree scans are quadratic in the object count.
BRUTE_GUARD = 10_000

# Query tubes are longer than the unit square's diameter plus any data tube's
# reach, so longitudinal containment never truncates a max count.
QUERY_TUBE_LENGTH = 4.0


@dataclass(frozen=True)
class LevelRecord:
    """One dyadic level of a spacing profile."""

    n: int            # level exponent, w = 2^-n
    w: float
    max_count: int
    implied_K: float  # max_count / (w / delta)^s
    witness: str      # query realizing max_count

    def row(self) -> list:
        return [self.n, self.w, self.max_count, self.implied_K, self.witness]


@dataclass
class SpacingProfile:
    """Per-level maximum counts for one data set at one exponent s."""

    kind: str  # ball-dyadic | ball-brute | tube-net | tube-brute
    k: int
    s: float
    levels: list[LevelRecord] = field(default_factory=list)

    @property
    def implied_K(self) -> float:
        """The certified spacing constant: worst level ratio."""
        if not self.levels:
            return 0.0
        return max(rec.implied_K for rec in self.levels)

    def level(self, n: int) -> LevelRecord:
        for rec in self.levels:
            if rec.n == n:
                return rec
        raise KeyError(f"no level n={n} in profile")

    def max_counts(self) -> dict[int, int]:
        return {rec.n: rec.max_count for rec in self.levels}

    def to_rows(self) -> list[list]:
        return [rec.row() for rec in self.levels]


def _check_exponent(s: float) -> None:
    if not (0.0 <= s <= 2.0):
        raise ValueError(f"spacing exponent s must lie in [0, 2], got {s}")


def _implied(count: int, w: float, delta: float, s: float) -> float:
    return count / (w / delta) ** s


# ---------------------------------------------------------------------------
# ball profiles
# ---------------------------------------------------------------------------

def ball_profile_dyadic(centers: NDArray[np.float64], r: float, k: int,
                        s: float) -> SpacingProfile:
    """Certify ball spacing against the dyadic squares of side w, 2delta <= w <= 1.

    A ball counts toward a square when contained in it (closed comparisons).
    The dyadic maximum sandwiches the true over-all-queries maximum: any
    radius-w ball is covered by at most four dyadic squares of side 2w, and a
    data ball on the standard centered lattice is contained in its own dyadic
    square at each level, so K_true <= 64 K_dyadic for s <= 2.
    """
    _check_exponent(s)
    delta = 2.0 ** -k
    centers = np.asarray(centers, dtype=np.float64).reshape(-1, 2)
    profile = SpacingProfile("ball-dyadic", k, s)
    for n in range(k - 1, -1, -1):
        w = 2.0 ** -n
        ncells = 2 ** n
        ix = np.clip(np.floor(centers[:, 0] / w).astype(np.int64), 0, ncells - 1)
        iy = np.clip(np.floor(centers[:, 1] / w).astype(np.int64), 0, ncells - 1)
        m = r * (1.0 - TOL)
        contained = ((centers[:, 0] - ix * w >= m) & ((ix + 1) * w - centers[:, 0] >= m)
                     & (centers[:, 1] - iy * w >= m) & ((iy + 1) * w - centers[:, 1] >= m))
        witness = "none"
        best = 0
        if np.any(contained):
            keys = ix[contained] * ncells + iy[contained]
            uniq, counts = np.unique(keys, return_counts=True)
            at = int(np.argmax(counts))
            best = int(counts[at])
            wx, wy = divmod(int(uniq[at]), ncells)
            witness = f"square x0={wx * w:.17g} y0={wy * w:.17g}"
        profile.levels.append(LevelRecord(n, w, best, _implied(best, w, delta, s), witness))
    profile.levels.sort(key=lambda rec: rec.w)
    return profile


def ball_profile_brute(centers: NDArray[np.float64], r: float, k: int,
                       s: float) -> SpacingProfile:
    """Certify ball spacing against radius-w balls anchored at every data
    center, for delta <= w <= 1.  Quadratic; guarded at 10^4 balls."""
    _check_exponent(s)
    centers = np.asarray(centers, dtype=np.float64).reshape(-1, 2)
    N = centers.shape[0]
    if N > BRUTE_GUARD:
        raise GuardExceeded(
            f"brute ball profile is quadratic; {N} balls exceeds {BRUTE_GUARD} "
            "(use ball_profile_dyadic)")
    delta = 2.0 ** -k
    levels = list(range(k, -1, -1))
    best = {n: 0 for n in levels}
    best_at = {n: -1 for n in levels}
    chunk = 512
    for lo in range(0, N, chunk):
        hi = min(lo + chunk, N)
        dx = centers[lo:hi, None, 0] - centers[None, :, 0]
        dy = centers[lo:hi, None, 1] - centers[None, :, 1]
        d2 = dx * dx + dy * dy
        for n in levels:
            w = 2.0 ** -n
            slack = w - r
            if slack < 0:
                continue
            thr = (slack + TOL * w) ** 2
            counts = np.sum(d2 <= thr, axis=1)
            at = int(np.argmax(counts))
            if int(counts[at]) > best[n]:
                best[n] = int(counts[at])
                best_at[n] = lo + at
    profile = SpacingProfile("ball-brute", k, s)
    for n in levels:
        w = 2.0 ** -n
        witness = "none"
        if best_at[n] >= 0:
            cx, cy = centers[best_at[n]]
            witness = f"ball cx={cx:.17g} cy={cy:.17g}"
        profile.levels.append(LevelRecord(n, w, best[n], _implied(best[n], w, delta, s), witness))
    profile.levels.sort(key=lambda rec: rec.w)
    return profile


# ---------------------------------------------------------------------------
# tube profiles
# ---------------------------------------------------------------------------

def _tube_corners(tubes: NDArray[np.float64], width: float,
                  lengths: NDArray[np.float64]) -> NDArray[np.float64]:
    """(M, 4, 2) corner array for midline parameters (cx, cy, theta)."""
    ux = np.cos(tubes[:, 2])
    uy = np.sin(tubes[:, 2])
    hl = lengths / 2.0
    hw = width / 2.0
    along = np.stack([ux * hl, uy * hl], axis=1)
    across = np.stack([-uy * hw, ux * hw], axis=1)
    c = tubes[:, :2]
    return np.stack([c + along + across, c - along + across,
                     c - along - across, c + along - across], axis=1)


# Packing bases for (direction index, offset index) keys.  With w >= 2 delta
# and delta >= 2^-24, |j| <= pi / halfw < 2^27 and |s| <= 3 / halfw < 2^27.
_KEY_BASE = 1 << 27


def _net_level_counts(corners: NDArray[np.float64], theta: NDArray[np.float64],
                      w: float, width: float, min_len: float) -> dict[tuple[int, int], int]:
    """Counts of data tubes contained in each net query tube at width w.

    The net consists of directions pi/2 + j (w/2) and signed lateral offsets
    s (w/2); a query is the width-w, length-4 tube whose midline has lateral
    offset s (w/2) in frame j, anchored longitudinally at the projection of
    the square center (1/2, 1/2).
    """
    halfw = w / 2.0
    j0 = np.round((theta - math.pi / 2) / halfw).astype(np.int64)
    # A contained tube's corner spread L sin(gap) + width cos(gap) is at most
    # 2 halfw, bounding the direction gap; add net-rounding slack.
    gap = math.asin(min(1.0, (w + width) / min_len))
    dj_max = int(math.ceil(gap / halfw + 0.5)) + 1
    out: dict[tuple[int, int], int] = {}
    keys_parts = []
    for dj in range(-dj_max, dj_max + 1):
        j = j0 + dj
        tq = math.pi / 2 + j * halfw
        ux, uy = np.cos(tq), np.sin(tq)
        # Corner coordinates in each tube's own candidate frame.
        lat = -corners[:, :, 0] * uy[:, None] + corners[:, :, 1] * ux[:, None]
        lon = corners[:, :, 0] * ux[:, None] + corners[:, :, 1] * uy[:, None]
        p = 0.5 * (ux + uy)  # longitudinal anchor
        lon_ok = np.all(np.abs(lon - p[:, None]) <= (QUERY_TUBE_LENGTH / 2) * (1 + TOL), axis=1)
        lo = lat.min(axis=1)
        hi = lat.max(axis=1)
        # Containment at offset s halfw needs s in [hi/halfw - 1, lo/halfw + 1],
        # an interval of length <= 2 holding at most three integers.
        s_min = np.ceil(hi / halfw - 1.0 - 1e-6).astype(np.int64)
        for ds in range(3):
            sc = s_min + ds
            off = sc * halfw
            fits = np.all(np.abs(lat - off[:, None]) <= halfw * (1 + TOL), axis=1) & lon_ok
            if np.any(fits):
                keys_parts.append((j[fits] + _KEY_BASE) * (2 * _KEY_BASE) + (sc[fits] + _KEY_BASE))
    if keys_parts:
        allkeys = np.concatenate(keys_parts)
        uniq, counts = np.unique(allkeys, return_counts=True)
        for key, cnt in zip(uniq.tolist(), counts.tolist()):
            j, sc = divmod(key, 2 * _KEY_BASE)
            out[(int(j - _KEY_BASE), int(sc - _KEY_BASE))] = int(cnt)
    return out


def tube_profile(tubes: NDArray[np.float64], width: float, k: int, s: float,
                 mode: str = "net",
                 lengths: NDArray[np.float64] | None = None) -> SpacingProfile:
    """Certify tube spacing against width-w query tubes.

    ``net`` mode scans the canonical direction/offset net at dyadic levels
    2delta <= w <= 1.  ``brute`` mode additionally anchors a query on every
    data tube (same direction and center) and includes the w = delta level;
    it is guarded at 10^4 tubes.
    """
    _check_exponent(s)
    if mode not in ("net", "brute"):
        raise ValueError(f"unknown tube profile mode {mode!r}")
    tubes = np.asarray(tubes, dtype=np.float64).reshape(-1, 3)
    M = tubes.shape[0]
    delta = 2.0 ** -k
    if lengths is None:
        lengths = np.ones(M)
    lengths = np.asarray(lengths, dtype=np.float64).reshape(-1)
    if mode == "brute" and M > BRUTE_GUARD:
        raise GuardExceeded(
            f"brute tube profile is quadratic; {M} tubes exceeds {BRUTE_GUARD} "
            "(use the net mode)")
    corners = _tube_corners(tubes, width, lengths)
    theta = tubes[:, 2]
    profile = SpacingProfile(f"tube-{mode}", k, s)
    level_lo = k if mode == "brute" else k - 1
    for n in range(level_lo, -1, -1):
        w = 2.0 ** -n
        if w < width * (1 - TOL):
            continue
        best, witness = 0, "none"
        if M:
            counts = _net_level_counts(corners, theta, w, width, float(lengths.min()))
            if counts:
                (j, sc), best = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))
                tq = math.pi / 2 + j * (w / 2)
                witness = f"net theta={tq:.17g} offset={sc * (w / 2):.17g}"
            if mode == "brute":
                anchored_best, anchored_at = _anchored_level_max(
                    tubes, corners, theta, lengths, width, w)
                if anchored_best > best:
                    best = anchored_best
                    cx, cy = tubes[anchored_at, 0], tubes[anchored_at, 1]
                    witness = (f"tube cx={cx:.17g} cy={cy:.17g} "
                               f"theta={theta[anchored_at]:.17g}")
        profile.levels.append(LevelRecord(n, w, best, _implied(best, w, delta, s), witness))
    profile.levels.sort(key=lambda rec: rec.w)
    return profile


def _anchored_level_max(tubes, corners, theta, lengths, width, w):
    """Max count over query tubes anchored at each data tube, one level."""
    M = tubes.shape[0]
    halfw = w / 2.0
    # Containment in a width-w query forces the direction gap under
    # asin((w + data width) / data length); pad the window by 2x.
    min_len = float(lengths.min())
    window = min(math.pi / 2, 2.0 * math.asin(min(1.0, (w + width) / min_len)))
    order = np.argsort(theta, kind="stable")
    ts = theta[order]
    ext = np.concatenate([ts - math.pi, ts, ts + math.pi])
    ext_idx = np.concatenate([order, order, order])
    best, best_at = 0, 0
    for qi in range(M):
        lo = np.searchsorted(ext, theta[qi] - window)
        hi = np.searchsorted(ext, theta[qi] + window)
        cand = ext_idx[lo:hi]
        if cand.size == 0:
            continue
        ux, uy = math.cos(theta[qi]), math.sin(theta[qi])
        dx = corners[cand, :, 0] - tubes[qi, 0]
        dy = corners[cand, :, 1] - tubes[qi, 1]
        lat = -dx * uy + dy * ux
        lon = dx * ux + dy * uy
        inside = (np.all(np.abs(lat) <= halfw * (1 + TOL), axis=1)
                  & np.all(np.abs(lon) <= (QUERY_TUBE_LENGTH / 2) * (1 + TOL), axis=1))
        cnt = int(inside.sum())
        if cnt > best:
            best, best_at = cnt, qi
    return best, best_at


# ---------------------------------------------------------------------------
# overlap degrees
# ---------------------------------------------------------------------------

def max_intersect_degree_balls(centers: NDArray[np.float64], r: float) -> int:
    """Max number of balls any one ball meets, counting itself."""
    centers = np.asarray(centers, dtype=np.float64).reshape(-1, 2)
    N = centers.shape[0]
    if N == 0:
        return 0
    if N > BRUTE_GUARD:
        raise GuardExceeded(f"{N} balls exceeds the degree-scan guard {BRUTE_GUARD}")
    thr = (2 * r * (1 + TOL)) ** 2
    best = 0
    chunk = 512
    for lo in range(0, N, chunk):
        hi = min(lo + chunk, N)
        dx = centers[lo:hi, None, 0] - centers[None, :, 0]
        dy = centers[lo:hi, None, 1] - centers[None, :, 1]
        counts = np.sum(dx * dx + dy * dy <= thr, axis=1)
        best = max(best, int(counts.max()))
    return best


def max_overlap_degree_tubes(tubes: NDArray[np.float64], width: float,
                             lengths: NDArray[np.float64] | None = None) -> int:
    """Max number of tubes whose essential overlap with any one tube is at
    least 1/2, counting the tube itself."""
    tubes = np.asarray(tubes, dtype=np.float64).reshape(-1, 3)
    M = tubes.shape[0]
    if M == 0:
        return 0
    if M > BRUTE_GUARD:
        raise GuardExceeded(f"{M} tubes exceeds the degree-scan guard {BRUTE_GUARD}")
    if lengths is None:
        lengths = np.ones(M)
    lengths = np.asarray(lengths, dtype=np.float64).reshape(-1)
    objs = [Tube(float(t[0]), float(t[1]), float(t[2]), width, float(L))
            for t, L in zip(tubes, lengths)]
    theta = tubes[:, 2]
    best = 0
    for i in range(M):
        # Overlap >= 1/2 forces nearby centers and nearly equal directions:
        # area(s & t) <= width^2 / sin(angle), so ratio >= 1/2 needs
        # sin(angle) <= 2 width / length.  Pad both prefilters generously.
        gap = np.abs(theta - theta[i]) % math.pi
        gap = np.minimum(gap, math.pi - gap)
        ang_ok = np.sin(gap) <= min(1.0, 4.0 * width / float(lengths.min()))
        dx = tubes[:, 0] - tubes[i, 0]
        dy = tubes[:, 1] - tubes[i, 1]
        near = dx * dx + dy * dy <= ((lengths + lengths[i]) / 2 + 2 * width) ** 2
        deg = 0
        for j in np.nonzero(ang_ok & near)[0]:
            if essential_overlap(objs[j], objs[i]) >= 0.5 * (1 - TOL):
                deg += 1
        best = max(best, deg)
    return best
