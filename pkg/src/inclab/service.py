"""HTTP service exposing the laboratory pipeline.

``create_app`` returns a FastAPI application with one endpoint per pipeline
stage (generate / validate / count / sweep / fit / furstenberg / sumproduct /
surface).  The command-line client drives this application in-process by
default, so both surfaces share a single request/response schema; the same
app can be served by any ASGI server for remote use.

Domain errors map to HTTP statuses: invalid parameters or regions -> 422,
object-count guards -> 413.  A *failed validation assertion* (a spacing
constant over threshold, a slope outside tolerance) is not an HTTP error:
the endpoint answers 200 with ``ok: false`` flags and the client decides.
"""

from __future__ import annotations

from typing import Any

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from inclab import __version__
from inclab.constructions import generate
from inclab.experiments import (
    f_surface,
    fit_slope,
    furstenberg_check,
    sweep,
    sweep_check_upper,
)
from inclab.geometry import Configuration, GuardExceeded
from inclab.incidence import count
from inclab.spacing import (
    SpacingProfile,
    ball_profile_dyadic,
    max_intersect_degree_balls,
    max_overlap_degree_tubes,
    tube_profile,
)
from inclab.sumproduct import standard_instance, sweep_sumproduct, verify_instance

DEFAULT_K_THRESHOLD = 64.0
SUMPRODUCT_MARGIN = -0.1


def _plain(obj: Any) -> Any:
    """Recursively convert numpy scalars/arrays so responses JSON-encode."""
    if isinstance(obj, dict):
        return {key: _plain(val) for key, val in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(val) for val in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# ---------------------------------------------------------------------------
# request / response schemas
# ---------------------------------------------------------------------------

class BallModel(BaseModel):
    cx: float
    cy: float


class TubeModel(BaseModel):
    cx: float
    cy: float
    theta: float
    length: float | None = None


class ConfigModel(BaseModel):
    """The frozen on-disk configuration schema."""

    k: int
    alpha: float | None = None
    beta: float | None = None
    construction: int | None = None
    balls: list[BallModel] = Field(default_factory=list)
    tubes: list[TubeModel] = Field(default_factory=list)
    meta: dict = Field(default_factory=dict)

    @classmethod
    def from_configuration(cls, cfg: Configuration) -> "ConfigModel":
        return cls.model_validate(cfg.to_json_dict())

    def to_configuration(self) -> Configuration:
        return Configuration.from_json_dict(self.model_dump(exclude_none=True))


class GenerateRequest(BaseModel):
    construction: int
    k: int
    alpha: float
    beta: float
    lam: float | None = None


class CountRequest(BaseModel):
    config: ConfigModel
    method: str = "grid"
    threads: int = Field(default=1, ge=1)
    include_vectors: bool = False


class ValidateRequest(BaseModel):
    config: ConfigModel
    alpha: float | None = None
    beta: float | None = None
    threshold: float = Field(default=DEFAULT_K_THRESHOLD, gt=0)


class LevelRow(BaseModel):
    level_n: int
    w: float
    max_count: int
    implied_K: float
    witness: str


class ValidateResponse(BaseModel):
    k: int
    alpha: float
    beta: float
    threshold: float
    n_balls: int
    n_tubes: int
    K_alpha: float
    K_beta: float
    max_overlap_degree_tubes: int
    max_intersect_degree_balls: int
    ok: bool
    ball_levels: list[LevelRow]
    tube_levels: list[LevelRow]


class SweepRequest(BaseModel):
    construction: int
    alpha: float
    beta: float
    k_min: int
    k_max: int
    method: str = "grid"
    threads: int = Field(default=1, ge=1)
    check_upper: bool = True


class FitRequest(BaseModel):
    xs: list[float]
    ys: list[float]


class FurstenbergRequest(BaseModel):
    u: float
    v: float
    k_min: int
    k_max: int
    product_k_max: int | None = None


class SumProductRequest(BaseModel):
    kind: str
    k: int | None = None
    k_min: int | None = None
    k_max: int | None = None
    s: float = 0.8


class SurfaceRequest(BaseModel):
    alpha: float
    beta: float


def _level_rows(profile: SpacingProfile) -> list[LevelRow]:
    return [LevelRow(level_n=rec.n, w=rec.w, max_count=rec.max_count,
                     implied_K=rec.implied_K, witness=rec.witness)
            for rec in profile.levels]


# ---------------------------------------------------------------------------
# application
# ---------------------------------------------------------------------------

def create_app() -> FastAPI:
    app = FastAPI(title="inclab", version=__version__)

    @app.exception_handler(GuardExceeded)
    async def _guard_handler(request: Request, exc: GuardExceeded):
        return JSONResponse(status_code=413, content={"detail": str(exc)})

    @app.exception_handler(ValueError)
    async def _value_handler(request: Request, exc: ValueError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/generate")
    def generate_endpoint(req: GenerateRequest) -> dict:
        cfg = generate(req.construction, req.k, req.alpha, req.beta,
                       lam=req.lam)
        return cfg.to_json_dict()

    @app.post("/count")
    def count_endpoint(req: CountRequest) -> dict:
        cfg = req.config.to_configuration()
        report = count(cfg, method=req.method, threads=req.threads)
        out = report.to_dict(include_vectors=req.include_vectors)
        out["k"] = cfg.scale.k
        return out

    @app.post("/validate", response_model=ValidateResponse)
    def validate_endpoint(req: ValidateRequest) -> ValidateResponse:
        cfg = req.config.to_configuration()
        alpha = req.alpha if req.alpha is not None else cfg.meta.get("alpha")
        beta = req.beta if req.beta is not None else cfg.meta.get("beta")
        if alpha is None or beta is None:
            raise ValueError("validate needs alpha and beta: pass them in the "
                             "request or store them in the configuration")
        k = cfg.scale.k
        ball_levels: list[LevelRow] = []
        tube_levels: list[LevelRow] = []
        K_beta = 0.0
        K_alpha = 0.0
        if cfg.n_balls:
            bp = ball_profile_dyadic(cfg.balls, cfg.ball_r, k, float(beta))
            K_beta = bp.implied_K
            ball_levels = _level_rows(bp)
        if cfg.n_tubes:
            tp = tube_profile(cfg.tubes, cfg.tube_width, k, float(alpha),
                              mode="net", lengths=cfg.tube_lengths)
            K_alpha = tp.implied_K
            tube_levels = _level_rows(tp)
        return ValidateResponse(
            k=k,
            alpha=float(alpha),
            beta=float(beta),
            threshold=req.threshold,
            n_balls=cfg.n_balls,
            n_tubes=cfg.n_tubes,
            K_alpha=K_alpha,
            K_beta=K_beta,
            max_overlap_degree_tubes=max_overlap_degree_tubes(
                cfg.tubes, cfg.tube_width, cfg.tube_lengths),
            max_intersect_degree_balls=max_intersect_degree_balls(
                cfg.balls, cfg.ball_r),
            ok=bool(K_alpha <= req.threshold and K_beta <= req.threshold),
            ball_levels=ball_levels,
            tube_levels=tube_levels,
        )

    @app.post("/sweep")
    def sweep_endpoint(req: SweepRequest) -> dict:
        result = sweep(req.construction, req.alpha, req.beta, req.k_min,
                       req.k_max, method=req.method, threads=req.threads)
        out = result.to_json_dict()
        out["csv"] = result.to_csv()
        if req.check_upper:
            upper = sweep_check_upper(result)
            out["upper"] = _plain(upper)
            out["upper_ok"] = bool(all(v["ok"] for v in upper.values()))
        return out

    @app.post("/fit")
    def fit_endpoint(req: FitRequest) -> dict:
        slope, intercept, r2 = fit_slope(req.xs, req.ys)
        return {"slope": slope, "intercept": intercept, "r2": r2,
                "n_points": len(req.xs)}

    @app.post("/furstenberg")
    def furstenberg_endpoint(req: FurstenbergRequest) -> dict:
        out = furstenberg_check(req.u, req.v, req.k_min, req.k_max,
                                product_k_max=req.product_k_max)
        out["ok"] = bool(out["config_ok"] and out.get("product_ok", True))
        return _plain(out)

    @app.post("/sumproduct")
    def sumproduct_endpoint(req: SumProductRequest) -> dict:
        sweep_mode = req.k_min is not None or req.k_max is not None
        if sweep_mode and req.k is not None:
            raise ValueError("pass either k (single-scale verification) or "
                             "k_min/k_max (sweep), not both")
        if sweep_mode:
            if req.k_min is None or req.k_max is None:
                raise ValueError("sweep mode needs both k_min and k_max")
            out = sweep_sumproduct(req.kind, req.k_min, req.k_max, s=req.s)
            out["mode"] = "sweep"
            out["ok"] = bool(out["margin"] >= SUMPRODUCT_MARGIN)
            return _plain(out)
        if req.k is None:
            raise ValueError("pass k for single-scale verification or "
                             "k_min/k_max for a sweep")
        inst = standard_instance(req.kind, req.k, s=req.s)
        report = verify_instance(inst)
        out = report.to_dict()
        out.update({
            "mode": "verify",
            "kind": req.kind,
            "k": req.k,
            "n_A": len(inst.A),
            "n_B": len(inst.B),
            "n_C": len(inst.C),
            "n_tubes": inst.config.n_tubes,
            "n_X": len(inst.X),
            "n_Y": len(inst.Y),
            "ok": report.all_ok,
        })
        return _plain(out)

    @app.post("/surface")
    def surface_endpoint(req: SurfaceRequest) -> dict:
        return {"alpha": req.alpha, "beta": req.beta,
                "f": f_surface(req.alpha, req.beta)}

    return app


app = create_app()
