"""End-to-end acceptance checks, one test per stated criterion.

Each test asserts the criterion at its stated tolerance and prints one
summary line on success; ``pytest -v`` renders one pass/fail line per
criterion.
"""

import math
import time

import numpy as np
import pytest
from scipy.spatial import cKDTree

from inclab.cantor import cantor_generate
from inclab.constructions import generate, heavy_squares, regularize
from inclab.experiments import (
    applicable_bounds,
    f_surface,
    fit_slope,
    furstenberg_check,
    sweep,
    sweep_check_upper,
)
from inclab.geometry import Configuration, Scale, essential_overlap, points_tube_dist2
from inclab.incidence import color_balls, color_tubes, count
from inclab.spacing import ball_profile_dyadic, tube_profile
from inclab.sumproduct import standard_instance, sweep_sumproduct, verify_instance

# construction -> (alpha, beta, k_min, k_max, expected slope, tolerance)
SWEEP_CASES = {
    1: (1.0, 1.0, 6, 11, 1.50, 0.08),
    2: (1.8, 0.5, 6, 11, 1.50, 0.10),
    3: (0.5, 1.8, 6, 11, 1.50, 0.10),
    4: (1.7, 1.6, 5, 8, 2.30, 0.10),
}


@pytest.fixture(scope="module")
def sweeps():
    """The four slope sweeps, each individually timed; shared by the
    sharpness, upper-bound, and spacing criteria."""
    out = {}
    for c, (a, b, k0, k1, _, _) in SWEEP_CASES.items():
        started = time.perf_counter()
        result = sweep(c, a, b, k0, k1)
        out[c] = (result, time.perf_counter() - started)
    return out


def _random_instance(rng, k: int, n_balls: int, n_tubes: int) -> Configuration:
    scale = Scale(k)
    balls = rng.uniform(0.0, 1.0, size=(n_balls, 2))
    tubes = np.column_stack([
        rng.uniform(0.0, 1.0, size=n_tubes),
        rng.uniform(0.0, 1.0, size=n_tubes),
        rng.uniform(0.0, math.pi, size=n_tubes),
    ])
    return Configuration(scale, balls, tubes, scale.delta, scale.delta)


def test_criterion_01_engine_oracle_equivalence():
    rng = np.random.default_rng(1001)
    started = time.perf_counter()
    for _ in range(100):
        k = int(rng.integers(5, 9))
        cfg = _random_instance(rng, k, int(rng.integers(10, 2001)),
                               int(rng.integers(10, 2001)))
        fast = count(cfg, method="grid")
        slow = count(cfg, method="brute")
        assert fast.count == slow.count
        np.testing.assert_array_equal(fast.per_tube, slow.per_tube)
        np.testing.assert_array_equal(fast.per_ball, slow.per_ball)
    elapsed = time.perf_counter() - started
    assert elapsed < 60.0
    print(f"criterion 1 PASS: grid == brute on 100 instances "
          f"({elapsed:.1f}s < 60s)")


def test_criterion_02_sharpness_slopes(sweeps):
    lines = []
    for c, (a, b, k0, k1, want, tol) in SWEEP_CASES.items():
        result, seconds = sweeps[c]
        assert seconds < 120.0, f"construction {c} sweep took {seconds:.0f}s"
        assert abs(result.slope - want) <= tol, (
            f"construction {c} slope {result.slope:.4f} outside "
            f"{want} +- {tol}")
        lines.append(f"c{c}:{result.slope:.3f}")
    print(f"criterion 2 PASS: slopes {' '.join(lines)} all within tolerance")


def test_criterion_03_upper_bound_ratios(sweeps):
    expected_bounds = {1: {"balls_dom", "tubes_dom", "high_dim"},
                       2: {"tubes_dom"}, 3: {"balls_dom"}, 4: {"high_dim"}}
    lines = []
    for c, (result, _) in sweeps.items():
        checks = sweep_check_upper(result)
        assert set(checks) == expected_bounds[c]
        for name, info in checks.items():
            assert info["slope"] <= 0.1, (
                f"construction {c} bound {name} ratio slope "
                f"{info['slope']:.3f} > 0.1")
            lines.append(f"c{c}/{name}:{info['slope']:.3f}")
    print(f"criterion 3 PASS: ratio slopes {' '.join(lines)} all <= 0.1")


def test_criterion_04_spacing_certification(sweeps):
    for c, (a, b, _, _, _, _) in SWEEP_CASES.items():
        result, _ = sweeps[c]
        by_k = {r.k: (r.K_alpha, r.K_beta) for r in result.rows}
        for k in range(6, 11):
            if k not in by_k:
                cfg = generate(c, k, a, b)
                Ka = tube_profile(cfg.tubes, cfg.tube_width, k, a,
                                  mode="net",
                                  lengths=cfg.tube_lengths).implied_K
                Kb = ball_profile_dyadic(cfg.balls, cfg.ball_r, k,
                                         b).implied_K
                by_k[k] = (Ka, Kb)
        assert by_k[8][0] <= 2.0 ** 7 and by_k[8][1] <= 2.0 ** 7, (
            f"construction {c} k=8 constants {by_k[8]} exceed 2^7")
        for k in range(6, 10):
            assert by_k[k + 1][0] <= 2.0 * by_k[k][0], (
                f"construction {c} tube constant doubled at k={k + 1}")
            assert by_k[k + 1][1] <= 2.0 * by_k[k][1], (
                f"construction {c} ball constant doubled at k={k + 1}")
        # strictest reading: total growth over the whole range also <= x2
        assert by_k[10][0] <= 2.0 * by_k[6][0]
        assert by_k[10][1] <= 2.0 * by_k[6][1]
    print("criterion 4 PASS: k=8 constants <= 2^7 and growth <= x2 "
          "(per step and in total) over k=6..10 for all four constructions")


def _exact_max_ball_count(centers: np.ndarray, r: float, R: float) -> int:
    """Exact maximum number of radius-r balls inside a radius-R ball placed
    anywhere: an optimal disk of radius rho = R - r can be translated until
    two covered centers pin its boundary, so scanning the data centers plus
    all pairwise circle intersections is exhaustive."""
    rho = R - r
    if rho < 0:
        return 0
    cands = [centers]
    n = len(centers)
    if n >= 2 and rho > 0:
        iu, ju = np.triu_indices(n, 1)
        dx = centers[ju, 0] - centers[iu, 0]
        dy = centers[ju, 1] - centers[iu, 1]
        d = np.hypot(dx, dy)
        keep = (d <= 2 * rho) & (d > 0)
        if keep.any():
            iu, ju = iu[keep], ju[keep]
            dx, dy, d = dx[keep], dy[keep], d[keep]
            mx = (centers[iu, 0] + centers[ju, 0]) / 2
            my = (centers[iu, 1] + centers[ju, 1]) / 2
            h = np.sqrt(np.maximum(rho * rho - (d / 2) ** 2, 0.0))
            ox, oy = -dy / d * h, dx / d * h
            cands.append(np.stack([mx + ox, my + oy], axis=1))
            cands.append(np.stack([mx - ox, my - oy], axis=1))
    tree = cKDTree(centers)
    counts = tree.query_ball_point(np.concatenate(cands, axis=0),
                                   r=rho * (1 + 1e-9), return_length=True)
    return int(counts.max())


def test_criterion_05_dyadic_sandwich():
    k = 6
    delta = 2.0 ** -k
    half = 2 ** (k - 1)
    rng = np.random.default_rng(1005)
    for _ in range(50):
        n = int(rng.integers(5, 501))
        idx = rng.choice(half * half, size=n, replace=False)
        ix, iy = divmod(idx, half)
        pts = np.stack([(2 * ix + 1) * delta, (2 * iy + 1) * delta], axis=1)
        s = float(rng.choice([0.5, 1.0, 1.5, 2.0]))
        K_dyadic = ball_profile_dyadic(pts, delta, k, s).implied_K
        K_brute = 0.0
        for level in range(k, -1, -1):
            w = 2.0 ** -level
            cnt = _exact_max_ball_count(pts, delta, w)
            K_brute = max(K_brute, cnt / (w / delta) ** s)
        assert K_dyadic <= K_brute <= 64.0 * K_dyadic
    print("criterion 5 PASS: K_dyadic <= K_brute <= 64 K_dyadic exact on "
          "50 lattice ball sets")


def _conflict_edges_balls(cfg):
    thr = (2.0 * cfg.ball_r * (1 + 1e-12)) ** 2
    out = []
    for i in range(cfg.n_balls):
        d = cfg.balls[i + 1:] - cfg.balls[i]
        for j in np.nonzero((d * d).sum(axis=1) <= thr)[0]:
            out.append((i, i + 1 + int(j)))
    return out


def _conflict_edges_tubes(cfg):
    objs = [cfg.tube_at(i) for i in range(cfg.n_tubes)]
    lim = 0.5 * (1 - 1e-12)
    out = []
    for i in range(len(objs)):
        for j in range(i + 1, len(objs)):
            if (essential_overlap(objs[i], objs[j]) >= lim
                    or essential_overlap(objs[j], objs[i]) >= lim):
                out.append((i, j))
    return out


def _max_degree(n, edges):
    deg = np.zeros(n, dtype=int)
    for i, j in edges:
        deg[i] += 1
        deg[j] += 1
    return int(deg.max()) if n else 0


def test_criterion_06_coloring_partition():
    rng = np.random.default_rng(1006)
    for _ in range(50):
        k = int(rng.integers(5, 8))
        cfg = _random_instance(rng, k, int(rng.integers(20, 221)),
                               int(rng.integers(20, 101)))
        ball_labels = color_balls(cfg)
        edges = _conflict_edges_balls(cfg)
        assert all(ball_labels[i] != ball_labels[j] for i, j in edges)
        assert ball_labels.max() + 1 <= _max_degree(cfg.n_balls, edges) + 1
        tube_labels = color_tubes(cfg)
        edges = _conflict_edges_tubes(cfg)
        assert all(tube_labels[i] != tube_labels[j] for i, j in edges)
        assert tube_labels.max() + 1 <= _max_degree(cfg.n_tubes, edges) + 1
    print("criterion 6 PASS: proper colorings with <= maxdeg+1 classes on "
          "50 instances")


def test_criterion_07_cantor_frostman():
    k = 10
    for s in (0.3, 0.5, 0.8):
        c = cantor_generate(k, s)
        pts = c.points
        D = 2 ** k
        # endpoints survive
        assert pts[0] == 0 and pts[-1] == D
        # cardinality window
        assert 0.5 * D ** s <= len(pts) <= 4.0 * D ** s
        # every dyadic interval of length d holds <= 4 (d/delta)^s points;
        # every prefix [0, d] holds >= (d/delta)^s / 4
        interior = pts[:-1]
        for j in range(k + 1):
            width = 2 ** (k - j)
            counts = np.bincount(np.clip(interior // width, 0, 2 ** j - 1),
                                 minlength=2 ** j)
            assert counts.max() <= 4.0 * width ** s
            assert c.prefix_count(width) >= width ** s / 4.0
    for s in (0.3, 0.5, 0.8):
        ks = np.arange(5, 12)
        sizes = [len(cantor_generate(int(k), s).points) for k in ks]
        slope, _, _ = fit_slope(ks, np.log2(sizes))
        assert abs(slope - s) <= 0.1, f"box-count slope {slope:.3f} for s={s}"
    print("criterion 7 PASS: all four discrete-Cantor invariants exact at "
          "k=10 and box-count slopes within 0.1 for s in {0.3, 0.5, 0.8}")


def test_criterion_08_furstenberg():
    out = furstenberg_check(0.8, 1.5, 6, 9, product_k_max=10)
    assert abs(out["product_slope"] - 1.8) <= 0.05, (
        f"product slope {out['product_slope']:.4f} outside 1.8 +- 0.05")
    assert out["config_slope"] >= 1.65, (
        f"configuration slope {out['config_slope']:.4f} < 1.65")
    print(f"criterion 8 PASS: product slope {out['product_slope']:.3f} "
          f"(1.8 +- 0.05), configuration slope {out['config_slope']:.3f} "
          f">= 1.65")


def test_criterion_09_sum_product():
    for kind in ("ap", "cantor"):
        report = verify_instance(standard_instance(kind, 7))
        assert report.tube_count_ok, f"{kind}: tube count != |B||C|"
        assert report.fibers_incident, f"{kind}: some tube misses a fiber ball"
        assert report.fibers_valid, (
            f"{kind}: fiber constant {report.fiber_K_max:.3f} over bound "
            f"{report.fiber_K_bound:.3f}")
    margins = {}
    for kind in ("ap", "cantor"):
        margins[kind] = sweep_sumproduct(kind, 6, 9)["margin"]
        assert margins[kind] >= -0.1, (
            f"{kind}: slope margin {margins[kind]:.3f} < -0.1")
    print(f"criterion 9 PASS: structural checks exact at k=7; margins "
          f"ap={margins['ap']:.3f} cantor={margins['cantor']:.3f} >= -0.1")


def _full_odd_grid(k: int, side: float) -> np.ndarray:
    delta = 2.0 ** -k
    n = int(side / (2 * delta))
    xs = (2 * np.arange(n) + 1) * delta
    return np.stack(np.meshgrid(xs, xs, indexing="ij"), axis=-1).reshape(-1, 2)


def test_criterion_10_regularization():
    k = 7
    delta = 2.0 ** -k
    # fixed point on an already-regular set
    rng = np.random.default_rng(1010)
    half = 2 ** (k - 1)
    idx = rng.choice(half * half, size=60, replace=False)
    regular = np.stack([(2 * (idx // half) + 1) * delta,
                        (2 * (idx % half) + 1) * delta], axis=1)
    assert heavy_squares(regular, k, 1.0, 1.0) == []
    assert np.array_equal(regularize(regular, k, 1.0, 1.0), regular)

    # heavy-square example: a quarter-square full grid claimed at beta = 0.5
    P = _full_odd_grid(k, 0.25)
    P2 = regularize(P, k, 0.5, 1.0)
    prof = ball_profile_dyadic(P2, delta, k, 0.5 + 1.0)
    assert prof.implied_K <= 64.0 * 64.0 * 1.0, (
        f"replacement constant {prof.implied_K:.1f} over 64*64")

    xs = np.unique(P[:, 0])
    tube_family = [(float(x), 0.5, math.pi / 2) for x in xs]
    tube_family.append((0.125, 0.125, math.pi / 4))
    thr = (delta * (1 + 1e-12)) ** 2

    def family_total(points):
        total = 0
        for cx, cy, theta in tube_family:
            d2 = points_tube_dist2(points, cx, cy, theta, delta, 1.0)
            total += int(np.sum(d2 <= thr))
        return total

    kept, original = family_total(P2), family_total(P)
    assert kept >= 0.25 * original, (
        f"restricted counts {kept} < 1/4 of {original}")
    print(f"criterion 10 PASS: fixed point exact; replacement constant "
          f"{prof.implied_K:.2f} <= 4096 and tube-restricted counts "
          f"{kept}/{original} >= 1/4")


def test_criterion_11_exponent_surface():
    grid = np.linspace(0.0, 2.0, 200)
    worst_high = 0.0
    worst_balls = 0.0
    n_high = n_balls_checked = 0
    for a in grid:
        for b in grid:
            a_f, b_f = float(a), float(b)
            f = f_surface(a_f, b_f)
            if a_f >= 1.0 and b_f >= 1.0:
                c = 1.0 / max(a_f + b_f - 1.0, 2.0)
                worst_high = max(worst_high,
                                 abs(f - (c + (1.0 - c) * (a_f + b_f))))
                n_high += 1
            bb = min(b_f, 1.0)
            if a_f > 0.0 and bb >= a_f and b_f < a_f + 1.0:
                ident = (a_f * bb + bb * b_f + a_f * a_f) / (a_f + bb)
                worst_balls = max(worst_balls, abs(f - ident))
                n_balls_checked += 1
    assert n_high > 5000 and n_balls_checked > 5000
    assert worst_high <= 1e-12, f"high-range identity off by {worst_high:.2e}"
    assert worst_balls <= 1e-12, (
        f"ball-dominated identity off by {worst_balls:.2e}")

    eps = 1e-13
    ts = np.linspace(0.0, 1.0, 200)
    worst_jump = 0.0
    for t in ts:
        t_f = float(t)
        for (a, b, da, db) in (
                (t_f + 1.0, t_f, -1.0, 0.0),      # alpha = beta + 1
                (t_f, t_f + 1.0, 0.0, -1.0),      # beta = alpha + 1
                (1.0 + t_f, 2.0 - t_f, -1.0, -1.0),  # alpha + beta = 3
                (1.0, t_f, -1.0, 0.0),            # alpha = 1 kink
                (t_f, 1.0, 0.0, -1.0),            # beta = 1 kink
        ):
            jump = abs(f_surface(a + eps * da, b + eps * db)
                       - f_surface(a, b))
            worst_jump = max(worst_jump, jump)
    assert worst_jump <= 1e-12, f"continuity jump {worst_jump:.2e}"
    print(f"criterion 11 PASS: identities within {max(worst_high, worst_balls):.1e} "
          f"on 200x200 grid; crease jumps within {worst_jump:.1e}")
