"""Thin command-line client over the experiment service.

Every subcommand resolves its configuration (flags > GLAUBERLAB_SEED env var
for the seed > --config file > defaults), sends one request to the service
(in-process by default, remote with --server), and prints canonical records.
Exit codes: 0 success, 1 usage or invalid configuration, 2 a verification
subcommand found failing checks.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import os
import sys

import httpx

from .records import csv_table, record_line

ENV_SEED = "GLAUBERLAB_SEED"


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(1)


def _read_config(path):
    out = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for raw in fh:
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise CliError(f"bad config line: {line!r}")
                key, value = line.split("=", 1)
                key = key.strip().replace("-", "_")
                value = value.strip()
                try:
                    out[key] = json.loads(value)
                except json.JSONDecodeError:
                    out[key] = value
    except OSError as exc:
        raise CliError(f"cannot read config file: {exc}")
    return out


def _resolve(args, keys):
    """Merge flag, environment, and config-file values for request keys."""
    file_cfg = _read_config(args.config) if getattr(args, "config", None) else {}
    out = {}
    for key in keys:
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            out[key] = flag_val
        elif key in file_cfg and file_cfg[key] is not None:
            out[key] = file_cfg[key]
    if "seed" in keys and not _flag_given(args, "seed") and ENV_SEED in os.environ:
        try:
            out["seed"] = int(os.environ[ENV_SEED])
        except ValueError:
            raise CliError(f"{ENV_SEED} must be an integer")
    jobs = getattr(args, "jobs", None)
    if jobs is not None:
        out["jobs"] = jobs
    return out


def _flag_given(args, key):
    return getattr(args, key, None) is not None


def _post(path, payload, server):
    try:
        if server:
            with httpx.Client(base_url=server, timeout=None) as client:
                resp = client.post(path, json=payload)
        else:
            from .service.app import app

            async def go():
                transport = httpx.ASGITransport(app=app)
                async with httpx.AsyncClient(
                    transport=transport, base_url="http://lab", timeout=None
                ) as client:
                    return await client.post(path, json=payload)

            resp = asyncio.run(go())
    except httpx.HTTPError as exc:
        raise CliError(f"request failed: {exc}")
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail")
        except ValueError:
            detail = resp.text
        raise CliError(f"{path} rejected: {detail}")
    return resp.json()


def _emit(args, lines, rows, columns):
    if args.format == "csv":
        text = csv_table(rows, columns)
    else:
        text = "".join(line + "\n" for line in lines)
    if getattr(args, "output", None):
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _add_common(sub, jobs=False):
    sub.add_argument("--config", help="key = value file; flags override it")
    sub.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    sub.add_argument("--output", help="write records here instead of stdout")
    sub.add_argument("--server", help="base URL of a running service")
    if jobs:
        sub.add_argument("--jobs", type=int)
    sub.add_argument("--seed", type=int)


def _parse_rule(cfg):
    """Map a --rule shorthand onto process/r request fields."""
    rule = cfg.pop("rule", None)
    if rule is None:
        return cfg
    if rule == "glauber":
        cfg.setdefault("process", "glauber")
    elif rule.startswith("r") and rule[1:].isdigit():
        cfg.setdefault("process", "bootstrap")
        cfg.setdefault("r", int(rule[1:]))
    else:
        raise CliError(f"unknown rule {rule!r} (expected 'glauber' or e.g. 'r2')")
    return cfg


def cmd_simulate(args):
    cfg = _resolve(
        args, ["dim", "side", "p", "alpha", "seed", "horizon", "boundary", "trace_points"]
    )
    resp = _post("/simulate", cfg, args.server)
    payload = {
        k: resp[k]
        for k in (
            "outcome",
            "stabilized",
            "settle_time",
            "total_flips",
            "final_magnetization",
            "magnetization_trace",
        )
    }
    row = {"kind": "simulate", **resp["config"], **payload}
    row.pop("magnetization_trace")
    _emit(args, [record_line("simulate", resp["config"], payload)], [row], None)
    return 0


def cmd_bootstrap(args):
    cfg = _resolve(args, ["dim", "side", "r", "k", "m", "steps", "p", "seed"])
    resp = _post("/bootstrap", cfg, args.server)
    payload = {
        k: resp[k]
        for k in (
            "n_vertices",
            "initial_size",
            "final_size",
            "stage_sizes",
            "converged",
            "percolates",
        )
    }
    row = {"kind": "bootstrap", **resp["config"], **payload}
    _emit(args, [record_line("bootstrap", resp["config"], payload)], [row], None)
    return 0


def cmd_couple(args):
    cfg = _resolve(
        args,
        [
            "dim",
            "side",
            "p",
            "eps",
            "alpha",
            "seed",
            "replicas",
            "time_d",
            "horizon_end",
            "inner_side",
            "outer_side",
            "T",
        ],
    )
    resp = _post("/couple", cfg, args.server)
    lines = []
    rows = []
    for result in resp["results"]:
        payload = {"mode": resp["mode"], **result}
        lines.append(record_line("couple", resp["config"], payload))
        row = {"kind": "couple", **resp["config"], **payload}
        row.pop("counts", None)
        rows.append({**row, **result.get("counts", {})})
    _emit(args, lines, rows, None)
    return 0


def cmd_blocks(args):
    cfg = _resolve(
        args,
        [
            "dim",
            "global_side",
            "inner_side",
            "outer_side",
            "p",
            "eps",
            "T",
            "seed",
            "separation_trials",
        ],
    )
    resp = _post("/blocks", cfg, args.server)
    payload = {
        k: resp[k]
        for k in ("block_dims", "provenance", "p_effective", "n_blocks", "block_spins", "omega")
    }
    row = {
        "kind": "blocks",
        **resp["config"],
        "block_dims": resp["block_dims"],
        "n_blocks": resp["n_blocks"],
        "p_effective": resp["p_effective"],
        "omega_ok": None if resp["omega"] is None else all(
            resp["omega"][k] for k in ("constancy_ok", "uniformity_ok", "pair_ok", "triple_ok")
        ),
    }
    _emit(args, [record_line("blocks", resp["config"], payload)], [row], None)
    return 0


def cmd_sweep(args):
    cfg = _parse_rule(
        _resolve(
            args,
            ["process", "rule", "dim", "side", "ps", "replicas", "seed", "max_T", "r", "alpha", "boundary"],
        )
    )
    resp = _post("/sweep", cfg, args.server)
    lines = []
    rows = []
    for rec in resp["records"]:
        lines.append(record_line("estimate", resp["config"], rec))
        rows.append(
            {
                "kind": "estimate",
                "experiment": rec["experiment"],
                "p": rec["params"]["p"],
                "estimate": rec["estimate"],
                "interval_lo": rec["interval"][0],
                "interval_hi": rec["interval"][1],
                "successes": rec["successes"],
                "replicas": rec["replicas"],
                "seed": rec["master_seed"],
            }
        )
    _emit(args, lines, rows, None)
    return 0


def cmd_bisect(args):
    cfg = _parse_rule(
        _resolve(
            args,
            [
                "process",
                "rule",
                "dim",
                "side",
                "lo",
                "hi",
                "target",
                "tol",
                "replicas",
                "seed",
                "max_T",
                "r",
                "alpha",
                "boundary",
            ],
        )
    )
    resp = _post("/bisect", cfg, args.server)
    payload = {k: resp[k] for k in ("p_hat", "bracket", "target", "tol", "probes")}
    lines = [record_line("bisect", resp["config"], payload)]
    rows = [
        {"kind": "probe", **probe, "p_hat": resp["p_hat"]} for probe in resp["probes"]
    ]
    _emit(args, lines, rows, None)
    return 0


def cmd_verify_bounds(args):
    cfg = _resolve(args, ["d_min", "d_max", "detail"])
    resp = _post("/verify-bounds", cfg, args.server)
    payload = {
        k: resp[k] for k in ("all_hold", "by_family", "failures", "references")
    }
    if resp.get("checks") is not None:
        payload["checks"] = resp["checks"]
    rows = [
        {"kind": "bound_family", "family": fam, **counts}
        for fam, counts in sorted(resp["by_family"].items())
    ]
    rows.append({"kind": "summary", "family": "ALL", "all_hold": resp["all_hold"]})
    _emit(args, [record_line("verify_bounds", resp["config"], payload)], rows, None)
    return 0 if resp["all_hold"] else 2


def cmd_locality(args):
    cfg = _resolve(
        args,
        [
            "event",
            "trials",
            "seed",
            "dim",
            "side",
            "p",
            "eps",
            "radius",
            "inner_side",
            "outer_side",
            "T",
        ],
    )
    resp = _post("/locality", cfg, args.server)
    payload = {k: resp[k] for k in ("event", "trials", "changes", "changed_trials")}
    row = {"kind": "locality", **resp["config"], "changes": resp["changes"]}
    _emit(args, [record_line("locality", resp["config"], payload)], [row], None)
    return 0 if resp["changes"] == 0 else 2


def cmd_serve(args):
    import uvicorn

    uvicorn.run("glauberlab.service.app:app", host=args.host, port=args.port)
    return 0


def build_parser():
    parser = _Parser(prog="glauberlab", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub = subs.add_parser("simulate", help="run the spin dynamics once")
    sub.add_argument("--dim", type=int)
    sub.add_argument("--side", type=int)
    sub.add_argument("--p", type=float)
    sub.add_argument("--alpha", type=float)
    sub.add_argument("--horizon", type=float)
    sub.add_argument("--boundary", choices=("torus", "free", "plus", "minus"))
    sub.add_argument("--trace-points", type=int, dest="trace_points")
    _add_common(sub)
    sub.set_defaults(func=cmd_simulate)

    sub = subs.add_parser("bootstrap", help="run threshold growth from a random set")
    sub.add_argument("--dim", type=int)
    sub.add_argument("--side", type=int)
    sub.add_argument("--r", help="base threshold (integer or fraction string)")
    sub.add_argument("--k", type=int)
    sub.add_argument("--m", help="stage easing (number or fraction string)")
    sub.add_argument("--steps", type=int)
    sub.add_argument("--p", type=float, help="infection density")
    _add_common(sub)
    sub.set_defaults(func=cmd_bootstrap)

    sub = subs.add_parser("couple", help="dynamics plus its local covers")
    sub.add_argument("--dim", type=int)
    sub.add_argument("--side", type=int)
    sub.add_argument("--p", type=float)
    sub.add_argument("--eps")
    sub.add_argument("--alpha", type=float)
    sub.add_argument("--replicas", type=int)
    sub.add_argument("--time-d", type=float, dest="time_d")
    sub.add_argument("--horizon-end", type=float, dest="horizon_end")
    sub.add_argument("--inner-side", type=int, dest="inner_side")
    sub.add_argument("--outer-side", type=int, dest="outer_side")
    sub.add_argument("--T", type=float, dest="T")
    _add_common(sub)
    sub.set_defaults(func=cmd_couple)

    sub = subs.add_parser("blocks", help="good-block field over a torus")
    sub.add_argument("--dim", type=int)
    sub.add_argument("--global-side", type=int, dest="global_side")
    sub.add_argument("--inner-side", type=int, dest="inner_side")
    sub.add_argument("--outer-side", type=int, dest="outer_side")
    sub.add_argument("--p", type=float)
    sub.add_argument("--eps")
    sub.add_argument("--T", type=float, dest="T")
    sub.add_argument("--separation-trials", type=int, dest="separation_trials")
    _add_common(sub, jobs=True)
    sub.set_defaults(func=cmd_blocks)

    sub = subs.add_parser("sweep", help="estimates over a p grid")
    sub.add_argument("--process", choices=("glauber", "bootstrap"))
    sub.add_argument("--rule", help="'glauber' or a bootstrap rule like 'r2'")
    sub.add_argument("--dim", type=int)
    sub.add_argument("--side", type=int)
    sub.add_argument("--ps", type=_float_list, help="comma-separated p values")
    sub.add_argument("--replicas", type=int)
    sub.add_argument("--max-T", type=float, dest="max_T")
    sub.add_argument("--r", type=int)
    sub.add_argument("--alpha", type=float)
    sub.add_argument("--boundary", choices=("torus", "free", "plus", "minus"))
    _add_common(sub, jobs=True)
    sub.set_defaults(func=cmd_sweep)

    sub = subs.add_parser("bisect", help="bracket the p where an estimate crosses 1/2")
    sub.add_argument("--process", choices=("glauber", "bootstrap"))
    sub.add_argument("--rule", help="'glauber' or a bootstrap rule like 'r2'")
    sub.add_argument("--dim", type=int)
    sub.add_argument("--side", type=int)
    sub.add_argument("--lo", type=float)
    sub.add_argument("--hi", type=float)
    sub.add_argument("--target", type=float)
    sub.add_argument("--tol", type=float)
    sub.add_argument("--replicas", type=int)
    sub.add_argument("--max-T", type=float, dest="max_T")
    sub.add_argument("--r", type=int)
    sub.add_argument("--alpha", type=float)
    sub.add_argument("--boundary", choices=("torus", "free", "plus", "minus"))
    _add_common(sub, jobs=True)
    sub.set_defaults(func=cmd_bisect)

    sub = subs.add_parser("verify-bounds", help="run every exact bound check")
    sub.add_argument("--d-min", type=int, dest="d_min")
    sub.add_argument("--d-max", type=int, dest="d_max")
    sub.add_argument("--detail", action=argparse.BooleanOptionalAction)
    _add_common(sub)
    sub.set_defaults(func=cmd_verify_bounds)

    sub = subs.add_parser("locality", help="resampling tests of dependency radii")
    sub.add_argument(
        "--event", choices=("growth", "proxy", "enlarged", "goodness")
    )
    sub.add_argument("--trials", type=int)
    sub.add_argument("--dim", type=int)
    sub.add_argument("--side", type=int)
    sub.add_argument("--p", type=float)
    sub.add_argument("--eps")
    sub.add_argument("--radius", type=int)
    sub.add_argument("--inner-side", type=int, dest="inner_side")
    sub.add_argument("--outer-side", type=int, dest="outer_side")
    sub.add_argument("--T", type=float, dest="T")
    _add_common(sub)
    sub.set_defaults(func=cmd_locality)

    sub = subs.add_parser("serve", help="run the HTTP service")
    sub.add_argument("--host", default="127.0.0.1")
    sub.add_argument("--port", type=int, default=8000)
    sub.set_defaults(func=cmd_serve)

    return parser


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad float list: {text!r}")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
