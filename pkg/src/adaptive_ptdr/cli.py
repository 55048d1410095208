"""Command-line client.

Every subcommand turns its flags into one request against the HTTP service:
a remote one with ``--server URL``, otherwise an in-process instance.

Exit codes: 0 ok, 1 usage error, 2 data error, 3 constraint clamped on every
request of the run.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path as FsPath

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CLAMPED = 0, 1, 2, 3

_DAYS = ("mon", "tue", "wed", "thu", "fri", "sat", "sun")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_departure(text: str) -> int:
    """Seconds since Monday 00:00 from ``12345`` or ``"tue 07:30"``."""
    text = text.strip().lower()
    if text.isdigit():
        return int(text)
    m = re.fullmatch(r"(mon|tue|wed|thu|fri|sat|sun)\w*\s+(\d{1,2}):(\d{2})(?::(\d{2}))?", text)
    if not m:
        raise argparse.ArgumentTypeError(f"bad departure {text!r}; use seconds or e.g. 'tue 07:30'")
    h, mi, s = int(m.group(2)), int(m.group(3)), int(m.group(4) or 0)
    if h > 23 or mi > 59 or s > 59:
        raise argparse.ArgumentTypeError(f"bad time of day in {text!r}")
    return _DAYS.index(m.group(1)) * 86400 + h * 3600 + mi * 60 + s


def _model_file(model: str, quantile: float | None) -> str:
    p = FsPath(model)
    if p.is_dir():
        q = 0.75 if quantile is None else quantile
        return str(p / f"model-q{q:g}.json")
    return model


def _constraint(a) -> dict:
    return {"epsilon": a.epsilon, "confidence": a.ci, "percentile": a.percentile}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="adaptive-ptdr", description=__doc__.split("\n")[0])
    p.add_argument("--server", metavar="URL", help="service base URL (default: run in-process)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, *, network=True, model=False, constraint=False, out=True):
        if network:
            sp.add_argument("--network-dir", required=True)
        if model:
            sp.add_argument("--model", required=True, help="model file, or a training output directory")
            sp.add_argument("--quantile", type=float, help="pick model-q<Q>.json when --model is a directory")
        if constraint:
            sp.add_argument("--epsilon", type=float, default=0.06)
            sp.add_argument("--ci", type=float, default=0.99)
            sp.add_argument("--percentile", type=float, default=95.0)
        if out:
            sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("gen", help="generate a synthetic network")
    common(sp, network=False)
    sp.set_defaults(seed=2024)
    sp.add_argument("--segments", type=int)
    sp.add_argument("--profiles", type=int)
    sp.add_argument("--paths", type=int)
    sp.add_argument("--path-length", type=int, nargs=2, metavar=("MIN", "MAX"))

    sp = sub.add_parser("train", help="profile training requests and fit error models")
    common(sp)
    sp.add_argument("--requests", type=int, default=150)
    sp.add_argument("--workload", default="profiling")
    sp.add_argument("--repetitions", type=int, default=30)
    sp.add_argument("--percentile", type=float, default=95.0)
    sp.add_argument("--quantile", type=float, action="append", help="repeatable (default 0.5 0.75 0.95)")
    sp.add_argument("--levels", type=int, nargs="+", default=[100, 300, 1000, 3000])

    sp = sub.add_parser("validate", help="check the error constraint against ground truth")
    common(sp, model=True, constraint=True)
    sp.add_argument("--requests", type=int, default=500)
    sp.add_argument("--workload", default="traffic")
    sp.add_argument("--truth-samples", type=int, default=200_000)
    sp.add_argument("--training-records", help="profile_records.csv, to enforce disjoint request ids")
    sp.add_argument("--cache-dir", help="on-disk ground-truth cache")

    sp = sub.add_parser("compare", help="adaptive vs static sample counts")
    common(sp)
    sp.add_argument("--training-records", required=True)
    sp.add_argument("--requests", type=int, default=500)
    sp.add_argument("--workload", default="traffic")
    sp.add_argument("--epsilon", type=float, action="append", help="repeatable (default 0.03 0.06)")
    sp.add_argument("--quantile", type=float, action="append", help="repeatable (default 0.5 0.75 0.95)")
    sp.add_argument("--ci", type=float, default=0.99)
    sp.add_argument("--truth-samples", type=int, default=200_000)
    sp.add_argument("--cache-dir")

    sp = sub.add_parser("sweep", help="one query per 15-minute slot over a week")
    common(sp, model=True, constraint=True)
    sp.add_argument("--path", required=True)

    sp = sub.add_parser("overhead", help="selection overhead vs sampling cost")
    common(sp, network=False)
    sp.add_argument("--network-dir")
    sp.add_argument("--model")
    sp.add_argument("--path", action="append", help="repeatable; default: first --paths paths")
    sp.add_argument("--segments", type=int, default=300, help="segments per synthetic path")
    sp.add_argument("--paths", type=int, default=3)
    sp.add_argument("--repeats", type=int, default=5)

    sp = sub.add_parser("route", help="single adaptive travel-time query")
    common(sp, model=True, constraint=True, out=False)
    sp.add_argument("--path", required=True)
    sp.add_argument("--departure", type=parse_departure, required=True, help="seconds since Monday 00:00 or 'tue 07:30'")
    sp.add_argument("--samples", action="store_true", help="include the raw samples")

    sp = sub.add_parser("capacity", help="size and simulate the navigation pipeline")
    common(sp, network=False)
    sp.add_argument("--config", required=True, help="TOML pipeline config")
    sp.add_argument("--report", help="comparison.csv supplying the level mix")
    sp.add_argument("--epsilon", type=float, default=0.06)
    sp.add_argument("--quantile", type=float, default=0.95)
    sp.add_argument("--no-simulate", action="store_true")

    sp = sub.add_parser("serve", help="run the HTTP service")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8000)
    return p


def to_request(a) -> tuple[str, dict]:
    """Endpoint and JSON body for parsed arguments."""
    cmd = a.command
    if cmd == "gen":
        body = {"out_dir": a.out, "seed": a.seed}
        for key, val in (("segment_count", a.segments), ("profile_count", a.profiles), ("path_count", a.paths)):
            if val is not None:
                body[key] = val
        if a.path_length:
            body["path_length"] = a.path_length
        return "/gen", body
    if cmd == "train":
        body = {
            "network_dir": a.network_dir,
            "out_dir": a.out,
            "requests": a.requests,
            "workload": a.workload,
            "levels": a.levels,
            "repetitions": a.repetitions,
            "percentile": a.percentile,
            "seed": a.seed,
        }
        if a.quantile:
            body["quantiles"] = a.quantile
        return "/train", body
    if cmd == "validate":
        body = {
            "network_dir": a.network_dir,
            "model": _model_file(a.model, a.quantile),
            "out_dir": a.out,
            "requests": a.requests,
            "workload": a.workload,
            "constraint": _constraint(a),
            "truth_samples": a.truth_samples,
            "training_records": a.training_records,
            "cache_dir": a.cache_dir,
            "seed": a.seed,
        }
        return "/validate", body
    if cmd == "compare":
        body = {
            "network_dir": a.network_dir,
            "training_records": a.training_records,
            "out_dir": a.out,
            "requests": a.requests,
            "workload": a.workload,
            "confidence": a.ci,
            "truth_samples": a.truth_samples,
            "cache_dir": a.cache_dir,
            "seed": a.seed,
        }
        if a.epsilon:
            body["epsilons"] = a.epsilon
        if a.quantile:
            body["quantiles"] = a.quantile
        return "/compare", body
    if cmd == "sweep":
        return "/sweep", {
            "network_dir": a.network_dir,
            "model": _model_file(a.model, a.quantile),
            "path_id": a.path,
            "out_dir": a.out,
            "constraint": _constraint(a),
            "seed": a.seed,
        }
    if cmd == "overhead":
        return "/overhead", {
            "out_dir": a.out,
            "network_dir": a.network_dir,
            "model": a.model,
            "path_ids": a.path,
            "segments": a.segments,
            "path_count": a.paths,
            "repeats": a.repeats,
            "seed": a.seed,
        }
    if cmd == "route":
        return "/route", {
            "network_dir": a.network_dir,
            "model": _model_file(a.model, a.quantile),
            "path_id": a.path,
            "departure": a.departure,
            "constraint": _constraint(a),
            "seed": a.seed,
            "include_samples": a.samples,
        }
    if cmd == "capacity":
        return "/capacity", {
            "config": a.config,
            "out_dir": a.out,
            "comparison_report": a.report,
            "epsilon": a.epsilon,
            "quantile": a.quantile,
            "simulate": not a.no_simulate,
            "seed": a.seed,
        }
    raise UsageError(f"unknown command {cmd}")


def _client(server: str | None):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=None)
    import warnings

    with warnings.catch_warnings():
        # starlette nags about its httpx backend; harmless for in-process use
        warnings.filterwarnings("ignore", message="Using `httpx`")
        from fastapi.testclient import TestClient

    from .api import app

    return TestClient(app)


def exit_code_for(command: str, payload: dict) -> int:
    if payload.get("all_clamped") or (command == "route" and payload.get("clamped")):
        return EXIT_CLAMPED
    return EXIT_OK


def main(argv=None, *, client=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":  # pragma: no cover
        from .api import serve

        serve(args.host, args.port)
        return EXIT_OK
    endpoint, body = to_request(args)
    try:
        http = client or _client(args.server)
        resp = http.post(endpoint, json=body)
    except Exception as exc:  # connection problems and the like
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    try:
        payload = resp.json()
    except ValueError:
        payload = {"detail": resp.text}
    if resp.status_code == 422:
        print(f"error: invalid arguments: {json.dumps(payload.get('detail'))}", file=sys.stderr)
        return EXIT_USAGE
    if resp.status_code >= 400:
        print(f"error: {payload.get('detail', payload)}", file=sys.stderr)
        return EXIT_DATA
    print(json.dumps(payload, indent=2))
    return exit_code_for(args.command, payload)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
