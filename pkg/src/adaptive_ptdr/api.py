"""HTTP service around the package.

File arguments are paths on the machine running the service. Networks and
models are cached in memory, keyed by path and modification time.
"""

from __future__ import annotations

import json
import math
import os
import threading
from dataclasses import replace
from pathlib import Path as FsPath

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import __version__, capacity, harness
from .errormodel import ErrorModel, ModelError, check_levels, load_model, save_model, train
from .roadnet import Network, NetworkError, SynthConfig, load_network_dir, save_network, synth_network
from .schemas import (
    CapacityRequest,
    CapacityResponse,
    CompareRequest,
    CompareResponse,
    GenRequest,
    GenResponse,
    Health,
    OverheadRequest,
    OverheadResponse,
    RouteRequest,
    RouteResponse,
    SweepRequest,
    SweepResponse,
    TrainRequest,
    TrainResponse,
    ValidateRequest,
    ValidateResponse,
)
from .stats import spearman
from .tuner import Constraint, adaptive_route_query

app = FastAPI(title="adaptive-ptdr", version=__version__)

_lock = threading.Lock()
_networks: dict[tuple, Network] = {}
_models: dict[tuple, ErrorModel] = {}


class DataError(Exception):
    pass


@app.exception_handler(DataError)
@app.exception_handler(NetworkError)
@app.exception_handler(ModelError)
@app.exception_handler(FileNotFoundError)
@app.exception_handler(ValueError)
@app.exception_handler(KeyError)
async def _data_error(request: Request, exc: Exception):
    msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
    return JSONResponse(status_code=400, content={"detail": str(msg), "kind": type(exc).__name__})


def _stamp(path: FsPath) -> float:
    if path.is_dir():
        return max((f.stat().st_mtime_ns for f in path.iterdir()), default=0)
    return path.stat().st_mtime_ns


def get_network(directory: str) -> Network:
    path = FsPath(directory)
    if not path.is_dir():
        raise FileNotFoundError(f"network directory not found: {directory}")
    key = (str(path.resolve()), _stamp(path))
    with _lock:
        if key in _networks:
            return _networks[key]
    net = load_network_dir(path)
    with _lock:
        _networks[key] = net
    return net


def get_model(file: str) -> ErrorModel:
    path = FsPath(file)
    if not path.is_file():
        raise FileNotFoundError(f"model file not found: {file}")
    key = (str(path.resolve()), _stamp(path))
    with _lock:
        if key in _models:
            return _models[key]
    model = load_model(path)
    with _lock:
        _models[key] = model
    return model


def _constraint(c) -> Constraint:
    return Constraint(c.epsilon, c.confidence, c.percentile)


def _outdir(d: str) -> FsPath:
    out = FsPath(d)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _q_name(q: float) -> str:
    return f"model-q{q:g}.json"


def _clean(obj):
    """Replace non-finite floats with None so the payload is valid JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _write_json(file: FsPath, data) -> None:
    file.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


@app.get("/health", response_model=Health)
def health():
    return Health(status="ok", version=__version__)


@app.post("/gen", response_model=GenResponse)
def gen(req: GenRequest):
    overrides = {k: v for k, v in req.model_dump().items() if k not in ("out_dir", "seed") and v is not None}
    cfg = replace(SynthConfig(), seed=req.seed, **overrides)
    net = synth_network(cfg)
    save_network(net, _outdir(req.out_dir))
    return GenResponse(
        out_dir=req.out_dir,
        segments=len(net.segments),
        profiles=len(net.profiles),
        paths=len(net.paths),
        content_hash=net.content_hash,
    )


@app.post("/route", response_model=RouteResponse)
def route(req: RouteRequest):
    net = get_network(req.network_dir)
    model = get_model(req.model)
    est = adaptive_route_query(net, req.path_id, req.departure, _constraint(req.constraint), model, req.seed)
    out = est.to_dict()
    if req.include_samples:
        out["samples"] = est.samples.tolist()
    return RouteResponse(**out)


@app.post("/train", response_model=TrainResponse)
def train_endpoint(req: TrainRequest):
    net = get_network(req.network_dir)
    levels = check_levels(req.levels)
    requests = harness.sample_requests(net, req.requests, req.seed, prefix="t", workload=req.workload)
    result = harness.run_training(
        net,
        requests,
        quantiles=req.quantiles,
        levels=levels,
        R=req.repetitions,
        y=req.percentile,
        seed=req.seed,
    )
    out = _outdir(req.out_dir)
    records_file = out / "profile_records.csv"
    harness.write_csv(harness.records_rows(result.records), records_file)
    models = {}
    for q, model in result.models.items():
        f = out / _q_name(q)
        save_model(model, f)
        models[f"{q:g}"] = str(f)
    rho = {}
    for L in levels:
        recs = [r for r in result.records if r.level == L]
        rho[str(L)] = spearman([r.u for r in recs], [r.nu for r in recs])
    lines = {
        f"{q:g}": {str(L): [ln.intercept, ln.slope] for L, ln in m.lines.items()} for q, m in result.models.items()
    }
    return TrainResponse(
        records_file=str(records_file),
        models=models,
        record_count=len(result.records),
        spearman=rho,
        lines=lines,
    )


def _training_ids(file: str | None):
    if not file:
        return None
    return sorted({r.request_id for r in harness.read_records_csv(file)})


@app.post("/validate", response_model=ValidateResponse)
def validate(req: ValidateRequest):
    net = get_network(req.network_dir)
    model = get_model(req.model)
    requests = harness.sample_requests(net, req.requests, req.seed, prefix="v", workload=req.workload)
    report = harness.run_validation(
        net,
        requests,
        _constraint(req.constraint),
        model,
        req.truth_samples,
        req.seed,
        training_ids=_training_ids(req.training_records),
        cache=harness.GroundTruthCache(req.cache_dir),
    )
    out = _outdir(req.out_dir)
    report_file, summary_file = out / "validation.csv", out / "validation_summary.json"
    harness.write_csv([r.row() for r in report.records], report_file)
    summary = dict(report.summary, epsilon=req.constraint.epsilon, confidence=req.constraint.confidence,
                   quantile=model.quantile, seed=req.seed)
    _write_json(summary_file, summary)
    return ValidateResponse(
        report_file=str(report_file),
        summary_file=str(summary_file),
        summary=summary,
        all_clamped=bool(report.records) and all(r.clamped for r in report.records),
    )


@app.post("/compare", response_model=CompareResponse)
def compare(req: CompareRequest):
    net = get_network(req.network_dir)
    records = harness.read_records_csv(req.training_records)
    models = {float(q): train(records, q) for q in req.quantiles}
    errors = harness.training_errors_from_records(records, req.confidence)
    requests = harness.sample_requests(net, req.requests, req.seed, prefix="v", workload=req.workload)
    rows = harness.run_comparison(
        net,
        requests,
        [(e, q) for e in req.epsilons for q in req.quantiles],
        models,
        errors,
        req.seed,
        confidence=req.confidence,
        N_truth=req.truth_samples,
        training_ids={r.request_id for r in records},
        cache=harness.GroundTruthCache(req.cache_dir),
    )
    out = _outdir(req.out_dir)
    report_file, summary_file = out / "comparison.csv", out / "comparison.json"
    dict_rows = [r.row() for r in rows]
    harness.write_csv(dict_rows, report_file)
    _write_json(summary_file, {"rows": dict_rows, "seed": req.seed, "requests": req.requests})
    return CompareResponse(report_file=str(report_file), summary_file=str(summary_file), rows=dict_rows)


@app.post("/sweep", response_model=SweepResponse)
def sweep(req: SweepRequest):
    net = get_network(req.network_dir)
    model = get_model(req.model)
    rows = harness.run_week_sweep(net, req.path_id, _constraint(req.constraint), model, req.seed)
    out = _outdir(req.out_dir)
    report_file = out / f"sweep-{req.path_id}.csv"
    harness.write_csv(rows, report_file)
    counts: dict[str, int] = {}
    for r in rows:
        counts[str(r["level"])] = counts.get(str(r["level"]), 0) + 1
    return SweepResponse(
        report_file=str(report_file),
        intervals=len(rows),
        level_counts=dict(sorted(counts.items(), key=lambda kv: int(kv[0]))),
        all_clamped=all(r["clamped"] for r in rows),
    )


@app.post("/overhead", response_model=OverheadResponse)
def overhead(req: OverheadRequest):
    if req.network_dir:
        net = get_network(req.network_dir)
        path_ids = req.path_ids or sorted(net.paths)[: req.path_count]
    else:
        seg = max(req.segments * 2, 1000)
        cfg = replace(
            SynthConfig(),
            segment_count=seg,
            path_count=req.path_count,
            path_length=(req.segments, req.segments + 1),
            seed=req.seed,
        )
        net = synth_network(cfg)
        path_ids = sorted(net.paths)
    model = get_model(req.model) if req.model else None
    rows = harness.run_overhead(net, path_ids, req.seed, model=model, repeats=req.repeats)
    out = _outdir(req.out_dir)
    report_file = out / "overhead.csv"
    harness.write_csv(rows, report_file)
    return OverheadResponse(report_file=str(report_file), rows=rows)


@app.post("/capacity", response_model=CapacityResponse)
def capacity_endpoint(req: CapacityRequest):
    config, raw = capacity.load_config(req.config)
    plan = raw.get("planning", {})
    if req.comparison_report:
        ratio = capacity.level_ratio_from_report(req.comparison_report, req.epsilon, req.quantile)
    elif "sample_ratio" in plan:
        ratio = float(plan["sample_ratio"])
    else:
        raise DataError("no level mix: pass a comparison report or set planning.sample_ratio")
    means = {s.name: s.mean_service for s in config.stages}
    scenarios = plan.get("scenarios") or [{"name": "default", "utilization_cap": config.utilization_cap}]
    planning = []
    for sc in scenarios:
        res = capacity.planning_experiment(
            float(plan.get("arrival_rate", config.arrival_rate)),
            means,
            ratio,
            fork_stage=config.fork_stage or config.stages[0].name,
            branches=config.branches,
            utilization_cap=float(sc.get("utilization_cap", config.utilization_cap)),
            static_total=sc.get("static_total"),
        )
        res["name"] = sc.get("name", "scenario")
        planning.append(_clean(res))
    out = _outdir(req.out_dir)
    simulation = None
    ts_file = None
    if req.simulate:
        rep = capacity.simulate_pipeline(config, req.seed)
        simulation = _clean(rep.to_dict())
        if rep.timeseries:
            ts_file = out / "capacity_timeseries.csv"
            harness.write_csv(rep.timeseries, ts_file)
    summary_file = out / "capacity.json"
    summary = {"planning": planning, "simulation": simulation, "note": capacity.CALIBRATION_NOTE}
    _write_json(summary_file, summary)
    return CapacityResponse(
        summary_file=str(summary_file),
        planning=planning,
        simulation=simulation,
        timeseries_file=str(ts_file) if ts_file else None,
        note=capacity.CALIBRATION_NOTE,
    )


def serve(host: str = "127.0.0.1", port: int = 8000) -> None:  # pragma: no cover
    import uvicorn

    uvicorn.run(app, host=host, port=port, workers=1, log_level=os.environ.get("LOG_LEVEL", "info"))
