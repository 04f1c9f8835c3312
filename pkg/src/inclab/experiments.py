"""Empirical exponent experiments: the incidence exponent surface, scale
sweeps over the extremal constructions, least-squares slope fits, and
ratio checks against the proven upper bounds."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .constructions import furstenberg_config, furstenberg_product, generate
from .incidence import count
from .spacing import ball_profile_dyadic, tube_profile

SURFACE_TOL = 1e-12


def f_surface(alpha: float, beta: float) -> float:
    """Sharp incidence exponent: I ~ D^f(alpha,beta) for extremal pairs.

    Piecewise: beta+1 once tubes saturate (alpha >= beta+1), alpha+1 once
    balls saturate (beta >= alpha+1), alpha+beta-1 in the dense corner
    (alpha+beta >= 3), and the bilinear interior formula otherwise.
    """
    if not (0.0 <= alpha <= 2.0 and 0.0 <= beta <= 2.0):
        raise ValueError(f"surface domain is [0,2]^2, got ({alpha}, {beta})")
    if alpha == 0.0 and beta == 0.0:
        return 0.0
    if alpha >= beta + 1.0:
        return beta + 1.0
    if beta >= alpha + 1.0:
        return alpha + 1.0
    if alpha + beta >= 3.0:
        return alpha + beta - 1.0
    a, b = min(alpha, 1.0), min(beta, 1.0)
    return (a * alpha + b * beta + a * b) / (a + b)


def fit_slope(xs, ys) -> tuple[float, float, float]:
    """Least squares fit of ys against xs: (slope, intercept, R^2)."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.size < 2:
        raise ValueError("fit needs at least two points")
    slope, intercept = np.polyfit(xs, ys, 1)
    pred = slope * xs + intercept
    ss_res = float(np.sum((ys - pred) ** 2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), r2


@dataclass
class SweepRow:
    k: int
    D: int
    alpha: float
    beta: float
    n_balls: int
    n_tubes: int
    I: int
    K_alpha: float
    K_beta: float
    seconds: float


CSV_COLUMNS = ("k", "D", "alpha", "beta", "n_balls", "n_tubes", "I",
               "K_alpha", "K_beta")


def _csv_cell(value) -> str:
    if isinstance(value, float):
        return "%.17g" % value
    return str(value)


@dataclass
class SweepResult:
    construction: int
    alpha: float
    beta: float
    rows: list[SweepRow] = field(default_factory=list)
    slope: float = math.nan
    intercept: float = math.nan
    r2: float = math.nan

    def to_csv(self) -> str:
        """Deterministic table (timing column deliberately omitted)."""
        lines = [",".join(CSV_COLUMNS)]
        for r in self.rows:
            lines.append(",".join(_csv_cell(getattr(r, c)) for c in CSV_COLUMNS))
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {
            "construction": self.construction,
            "alpha": self.alpha,
            "beta": self.beta,
            "slope": self.slope,
            "intercept": self.intercept,
            "r2": self.r2,
            "rows": [vars(r).copy() for r in self.rows],
        }


def sweep(construction: int, alpha: float, beta: float, k_min: int,
          k_max: int, method: str = "grid", threads: int = 1) -> SweepResult:
    """Generate, profile, and count the construction at every scale in
    [k_min, k_max], then fit log2 I against k."""
    if k_max - k_min + 1 < 4:
        raise ValueError("sweep fits need at least four scales")
    result = SweepResult(construction, alpha, beta)
    for k in range(k_min, k_max + 1):
        started = time.perf_counter()
        cfg = generate(construction, k, alpha, beta)
        rep = count(cfg, method=method, threads=threads)
        K_alpha = tube_profile(cfg.tubes, cfg.tube_width, k, alpha,
                               mode="net", lengths=cfg.tube_lengths).implied_K
        K_beta = ball_profile_dyadic(cfg.balls, cfg.ball_r, k, beta).implied_K
        if rep.count <= 0:
            raise ValueError(f"construction {construction} produced no "
                             f"incidences at k = {k}; nothing to fit")
        result.rows.append(SweepRow(k, cfg.scale.D, alpha, beta, cfg.n_balls,
                                    cfg.n_tubes, rep.count, K_alpha, K_beta,
                                    time.perf_counter() - started))
    ks = [r.k for r in result.rows]
    logs = [math.log2(r.I) for r in result.rows]
    result.slope, result.intercept, result.r2 = fit_slope(ks, logs)
    return result


# ---------------------------------------------------------------------------
# upper-bound ratio checks
# ---------------------------------------------------------------------------

def applicable_bounds(alpha: float, beta: float) -> list[str]:
    """Which proven upper bounds cover the pair (alpha, beta).

    'balls_dom' needs min(beta,1) >= alpha > 0, 'tubes_dom' needs
    min(alpha,1) >= beta > 0, 'high_dim' needs alpha, beta >= 1.
    """
    names = []
    if alpha > 0.0 and min(beta, 1.0) >= alpha - SURFACE_TOL:
        names.append("balls_dom")
    if beta > 0.0 and min(alpha, 1.0) >= beta - SURFACE_TOL:
        names.append("tubes_dom")
    if alpha >= 1.0 and beta >= 1.0:
        names.append("high_dim")
    return names


def check_upper(I: int, n_balls: int, n_tubes: int, K_alpha: float,
                K_beta: float, alpha: float, beta: float, k: int) -> dict[str, float]:
    """Ratio of the measured count to each applicable proven bound,
    evaluated with constant 1, epsilon 0, and measured K's (clamped to >= 1).

    Combinatorial bounds are reported through their (alpha+b)-th
    (resp. (a+beta)-th) root so every ratio compares directly to I.
    """
    Ka = max(1.0, K_alpha)
    Kb = max(1.0, K_beta)
    D = float(2 ** k)
    out: dict[str, float] = {}
    b = min(beta, 1.0)
    a = min(alpha, 1.0)
    for name in applicable_bounds(alpha, beta):
        if name == "balls_dom":
            power = alpha + b
            rhs = (D ** (alpha * b) * Kb ** alpha * Ka ** b
                   * n_balls ** b * n_tubes ** alpha)
            out[name] = I / rhs ** (1.0 / power)
        elif name == "tubes_dom":
            power = a + beta
            rhs = (D ** (a * beta) * Kb ** a * Ka ** beta
                   * n_balls ** beta * n_tubes ** a)
            out[name] = I / rhs ** (1.0 / power)
        else:
            c = 1.0 / max(alpha + beta - 1.0, 2.0)
            rhs = (D ** c * (Ka * Kb) ** c
                   * (n_balls * n_tubes) ** (1.0 - c))
            out[name] = I / rhs
    return out


def sweep_check_upper(result: SweepResult) -> dict[str, dict]:
    """Per-bound ratio series over a sweep with fitted log2 slopes.

    A slope <= 0.1 certifies the measured exponent never outruns the bound.
    """
    names = applicable_bounds(result.alpha, result.beta)
    out: dict[str, dict] = {}
    ks = [r.k for r in result.rows]
    series: dict[str, list[float]] = {n: [] for n in names}
    for r in result.rows:
        ratios = check_upper(r.I, r.n_balls, r.n_tubes, r.K_alpha, r.K_beta,
                             r.alpha, r.beta, r.k)
        for n in names:
            series[n].append(ratios[n])
    for n in names:
        slope, _, _ = fit_slope(ks, np.log2(series[n]))
        out[n] = {"ratios": series[n], "slope": slope, "ok": slope <= 0.1}
    return out


# ---------------------------------------------------------------------------
# Furstenberg harness
# ---------------------------------------------------------------------------

def furstenberg_check(u: float, v: float, k_min: int, k_max: int,
                      product_k_max: int | None = None) -> dict:
    """Sweep the tube-fiber configuration (and, when u+v >= 2, the product
    example) and compare fitted slopes against the proven exponent
    min(2u+v-1, u+1)."""
    if not (0.0 < u <= 1.0):
        raise ValueError(f"need 0 < u <= 1, got {u}")
    if not (1.0 <= v <= 2.0):
        raise ValueError(f"need 1 <= v <= 2, got {v}")
    if k_max - k_min + 1 < 2:
        raise ValueError("need at least two scales")
    bound = min(2.0 * u + v - 1.0, u + 1.0)

    ks = list(range(k_min, k_max + 1))
    sizes = []
    for k in ks:
        fc = furstenberg_config(k, u, v)
        sizes.append(fc.n_points)
    config_slope, _, _ = fit_slope(ks, np.log2(sizes))

    out = {
        "u": u,
        "v": v,
        "bound": bound,
        "config_ks": ks,
        "config_sizes": sizes,
        "config_slope": config_slope,
        "config_ok": config_slope >= bound - 0.15,
    }

    if u + v >= 2.0:
        pk_max = k_max if product_k_max is None else product_k_max
        pks = list(range(k_min, pk_max + 1))
        psizes = [furstenberg_product(k, u).n_balls for k in pks]
        product_slope, _, _ = fit_slope(pks, np.log2(psizes))
        out.update({
            "product_ks": pks,
            "product_sizes": psizes,
            "product_slope": product_slope,
            "product_ok": abs(product_slope - (u + 1.0)) <= 0.05,
        })
    return out
