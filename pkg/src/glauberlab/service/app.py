"""HTTP service exposing every experiment as a pure function of its config.

Handlers hold no state and read no clocks, so identical requests produce
identical responses; the CLI drives this app in-process by default.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..blockfield import check_omega_membership, goodness_blockfield
from ..bootstrap import StagedRule, as_fraction, staged_closure
from ..bounds import verify_default_grid
from ..coupling import (
    bias_from_density,
    classify_block,
    couple_run,
    default_time_window,
    density_from_bias,
    enlarged_locality_trial,
    goodness_locality_trial,
    growth_locality_trial,
    proxy_locality_trial,
)
from ..estimation import (
    bootstrap_threshold_evaluator,
    classify_final,
    fixation_threshold_evaluator,
    sweep_bootstrap,
    sweep_fixation,
    threshold_bisect,
)
from ..geometry import BlockLayout, TorusGeometry
from ..glauber import run_dynamics
from ..randomness import ClockStream, derive_seed, sample_spins
from ..records import sanitize
from . import schemas

app = FastAPI(title="glauberlab", version=__version__)


@app.exception_handler(ValueError)
async def _value_error(request: Request, exc: ValueError):
    return JSONResponse(status_code=400, content={"detail": str(exc)})


def _config_of(req, exclude=("jobs",), **resolved):
    """Request fields with server-side resolutions applied and nulls dropped."""
    cfg = req.model_dump(exclude=set(exclude))
    cfg.update(resolved)
    return {k: v for k, v in sanitize(cfg).items() if v is not None}


def _rat(x):
    """Canonical JSON form of an exact ratio: int when integral."""
    frac = as_fraction(x)
    return int(frac) if frac.denominator == 1 else f"{frac.numerator}/{frac.denominator}"


def _resolve_bias(p, eps):
    """(p float, eps Fraction) from whichever of the two was given."""
    if eps is None:
        if p is None:
            raise ValueError("give p or eps")
        return float(p), bias_from_density(p)
    eps_frac = bias_from_density(density_from_bias(eps))
    p_resolved = float(density_from_bias(eps_frac))
    if p is not None and abs(p - p_resolved) > 1e-12:
        raise ValueError("p and eps disagree: need p = 1/2 + eps")
    return p_resolved, eps_frac


@app.get("/health", response_model=schemas.HealthResponse)
def health():
    return schemas.HealthResponse(status="ok", package="glauberlab", version=__version__)


@app.post("/simulate", response_model=schemas.SimulateResponse)
def simulate(req: schemas.SimulateRequest):
    wrap = req.boundary == "torus"
    g = TorusGeometry.cube(req.dim, req.side, wrap=wrap)
    spins = sample_spins(g, req.p, derive_seed(req.seed, "spins")).spins
    clocks = ClockStream(derive_seed(req.seed, "clocks"))
    traj = run_dynamics(
        g,
        spins,
        clocks,
        horizon=req.horizon,
        alpha=req.alpha,
        boundary=req.boundary,
        record="flips",
    )
    times = np.linspace(0.0, req.horizon, req.trace_points)
    trace = [[float(t), float(traj.spins_at(t).mean())] for t in times]
    return schemas.SimulateResponse(
        config=_config_of(req),
        outcome=classify_final(traj),
        stabilized=traj.stabilized,
        settle_time=traj.settle_time,
        total_flips=traj.total_flips,
        final_magnetization=float(traj.final.mean()),
        magnetization_trace=trace,
    )


@app.post("/bootstrap", response_model=schemas.BootstrapResponse)
def bootstrap(req: schemas.BootstrapRequest):
    g = TorusGeometry.cube(req.dim, req.side, wrap=True)
    infected = sample_spins(g, 1.0 - req.p, derive_seed(req.seed, "spins")).spins == -1
    rule = StagedRule(req.r, req.k, req.m)
    run = staged_closure(g, infected, rule, steps=req.steps)
    final = run.final
    return schemas.BootstrapResponse(
        config=_config_of(req, r=_rat(rule.r), k=rule.k, m=_rat(rule.m)),
        n_vertices=g.n_vertices,
        initial_size=int(infected.sum()),
        final_size=int(final.sum()),
        stage_sizes=run.sizes(),
        converged=run.converged,
        percolates=bool(final.all()),
    )


@app.post("/couple", response_model=schemas.CoupleResponse)
def couple(req: schemas.CoupleRequest):
    p, eps = _resolve_bias(req.p, req.eps)
    block_mode = req.inner_side is not None or req.outer_side is not None
    results = []
    if block_mode:
        if req.inner_side is None:
            raise ValueError("block mode needs inner_side")
        layout = (
            BlockLayout(req.dim, req.inner_side, req.outer_side)
            if req.outer_side is not None
            else BlockLayout.default(req.dim, req.inner_side)
        )
        T = default_time_window(req.dim) if req.T is None else float(req.T)
        for i in range(req.replicas):
            spins = sample_spins(
                layout.outer_box, p, derive_seed(req.seed, "spins", i)
            ).spins
            clocks = ClockStream(derive_seed(req.seed, "clocks", i))
            rep = classify_block(layout, spins, clocks, eps, T=T, alpha=req.alpha)
            results.append(
                schemas.CoupleResult(
                    replica=i,
                    leak=rep.couple.leak,
                    escape=rep.couple.escape,
                    growth_settled=rep.couple.growth_settled,
                    enlarged_settled=rep.couple.enlarged_settled,
                    counts=rep.couple.counts(),
                    good=rep.good,
                    breach=rep.breach,
                    core_plus_at_end=rep.core_plus_at_end,
                ).model_dump()
            )
        config = _config_of(
            req, p=p, eps=eps, outer_side=layout.outer_side, T=T
        )
        mode = "block"
    else:
        if req.side is None:
            raise ValueError("torus mode needs side")
        g = TorusGeometry.cube(req.dim, req.side, wrap=True)
        time_d = float(req.dim if req.time_d is None else req.time_d)
        horizon_end = float(3 * req.dim if req.horizon_end is None else req.horizon_end)
        for i in range(req.replicas):
            spins = sample_spins(g, p, derive_seed(req.seed, "spins", i)).spins
            clocks = ClockStream(derive_seed(req.seed, "clocks", i))
            rep = couple_run(
                g,
                spins,
                clocks,
                eps,
                time_d=time_d,
                horizon_end=horizon_end,
                alpha=req.alpha,
            )
            results.append(
                schemas.CoupleResult(
                    replica=i,
                    leak=rep.leak,
                    escape=rep.escape,
                    growth_settled=rep.growth_settled,
                    enlarged_settled=rep.enlarged_settled,
                    counts=rep.counts(),
                ).model_dump()
            )
        config = _config_of(req, p=p, eps=eps, time_d=time_d, horizon_end=horizon_end)
        mode = "torus"
    return schemas.CoupleResponse(config=config, mode=mode, results=results)


@app.post("/blocks", response_model=schemas.BlocksResponse)
def blocks(req: schemas.BlocksRequest):
    p, eps = _resolve_bias(req.p, req.eps)
    g = TorusGeometry.cube(req.dim, req.global_side, wrap=True)
    layout = (
        BlockLayout(req.dim, req.inner_side, req.outer_side)
        if req.outer_side is not None
        else BlockLayout.default(req.dim, req.inner_side)
    )
    T = default_time_window(req.dim) if req.T is None else float(req.T)
    f = goodness_blockfield(g, layout, p, req.seed, eps=eps, T=T, jobs=req.jobs)
    omega = None
    if req.separation_trials > 0:
        omega = sanitize(
            check_omega_membership(
                f,
                separation_trials=req.separation_trials,
                seed=derive_seed(req.seed, "omega") % 2**32,
            )
        )
    return schemas.BlocksResponse(
        config=_config_of(req, p=p, eps=eps, outer_side=layout.outer_side, T=T),
        block_dims=list(f.block_dims),
        provenance=f.provenance,
        p_effective=f.p_effective,
        n_blocks=f.n_blocks,
        block_spins=[int(s) for s in f.block_spins],
        omega=omega,
    )


def _sweep_records(req):
    g = TorusGeometry.cube(req.dim, req.side, wrap=True)
    ps = [float(p) for p in req.ps]
    if req.process == "glauber":
        if req.max_T is None:
            raise ValueError("glauber sweeps need max_T")
        return sweep_fixation(
            g,
            ps,
            req.seed,
            req.replicas,
            req.max_T,
            alpha=req.alpha,
            boundary=req.boundary,
            jobs=req.jobs,
        )
    if req.process == "bootstrap":
        if req.r is None:
            raise ValueError("bootstrap sweeps need r")
        return sweep_bootstrap(g, req.r, ps, req.seed, req.replicas, jobs=req.jobs)
    raise ValueError(f"unknown process {req.process!r}")


@app.post("/sweep", response_model=schemas.SweepResponse)
def sweep(req: schemas.SweepRequest):
    records = [sanitize(r) for r in _sweep_records(req)]
    return schemas.SweepResponse(config=_config_of(req), records=records)


@app.post("/bisect", response_model=schemas.BisectResponse)
def bisect(req: schemas.BisectRequest):
    g = TorusGeometry.cube(req.dim, req.side, wrap=True)
    if req.process == "glauber":
        if req.max_T is None:
            raise ValueError("glauber bisection needs max_T")
        evaluator = fixation_threshold_evaluator(
            g,
            req.seed,
            req.replicas,
            req.max_T,
            alpha=req.alpha,
            boundary=req.boundary,
            jobs=req.jobs,
        )
    elif req.process == "bootstrap":
        if req.r is None:
            raise ValueError("bootstrap bisection needs r")
        evaluator = bootstrap_threshold_evaluator(
            g, req.r, req.seed, req.replicas, jobs=req.jobs
        )
    else:
        raise ValueError(f"unknown process {req.process!r}")
    trace = threshold_bisect(evaluator, req.lo, req.hi, target=req.target, tol=req.tol)
    probes = [
        {
            "p": p,
            "estimate": rec.estimate,
            "successes": rec.successes,
            "replicas": rec.replicas,
            "interval": list(rec.interval),
        }
        for p, rec in trace.probes
    ]
    return schemas.BisectResponse(
        config=_config_of(req),
        p_hat=trace.p_hat,
        bracket=list(trace.bracket),
        target=trace.target,
        tol=trace.tol,
        probes=probes,
    )


@app.post("/verify-bounds", response_model=schemas.VerifyBoundsResponse)
def verify_bounds(req: schemas.VerifyBoundsRequest):
    if req.d_min > req.d_max:
        raise ValueError("d_min must not exceed d_max")
    report = verify_default_grid(d_max=req.d_max, d_min=req.d_min)
    failures = [sanitize(c) for c in report.checks if not c.holds]
    return schemas.VerifyBoundsResponse(
        config=_config_of(req),
        all_hold=report.all_hold,
        by_family=sanitize(report.by_family),
        failures=failures,
        references=sanitize(report.references),
        checks=[sanitize(c) for c in report.checks] if req.detail else None,
    )


LOCALITY_DEFAULTS = {
    "growth": {"dim": 4, "side": 6, "p": 0.8, "radius": 8},
    "proxy": {"dim": 4, "side": 6, "p": 0.8, "radius": 9},
    "enlarged": {"dim": 2, "side": 128, "p": 0.8, "radius": 58},
    "goodness": {"dim": 2, "inner_side": 9, "outer_side": 15, "p": 0.85, "T": 25.0},
}


@app.post("/locality", response_model=schemas.LocalityResponse)
def locality(req: schemas.LocalityRequest):
    if req.event not in LOCALITY_DEFAULTS:
        raise ValueError(f"unknown event {req.event!r}")
    cfg = dict(LOCALITY_DEFAULTS[req.event])
    for key in ("dim", "side", "p", "radius", "inner_side", "outer_side", "T"):
        value = getattr(req, key)
        if value is not None:
            cfg[key] = value
    if req.eps is not None and req.p is None:
        p, eps = _resolve_bias(None, req.eps)
    else:
        p, eps = _resolve_bias(cfg.get("p"), req.eps)
    cfg["p"] = p
    cfg["eps"] = eps
    changed = []
    if req.event == "goodness":
        layout = BlockLayout(cfg["dim"], cfg["inner_side"], cfg["outer_side"])
        for t in range(req.trials):
            before, after = goodness_locality_trial(
                layout,
                p,
                eps,
                cfg["T"],
                derive_seed(req.seed, "trial", t),
                derive_seed(req.seed, "fresh", t),
            )
            if before != after:
                changed.append({"trial": t, "before": before, "after": after})
    else:
        trial_fn = {
            "growth": growth_locality_trial,
            "proxy": proxy_locality_trial,
            "enlarged": enlarged_locality_trial,
        }[req.event]
        g = TorusGeometry.cube(cfg["dim"], cfg["side"], wrap=True)
        for t in range(req.trials):
            x = t % g.n_vertices
            before, after = trial_fn(
                g,
                p,
                eps,
                x,
                derive_seed(req.seed, "trial", t),
                derive_seed(req.seed, "fresh", t),
                radius=cfg["radius"],
            )
            if before != after:
                changed.append(
                    {"trial": t, "vertex": x, "before": before, "after": after}
                )
    resolved = dict(_config_of(req))
    resolved.update(sanitize(cfg))
    return schemas.LocalityResponse(
        config=resolved,
        event=req.event,
        trials=req.trials,
        changes=len(changed),
        changed_trials=changed,
    )
