"""``contentcast`` command line.

Exit status: 0 ok, 2 configuration error, 3 I/O error, 4 internal invariant
violation. Errors print as ``error[<code>]: <message>`` on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import crowd, experiment, pet
from .catalog import (CacheSpec, WirelessBudget, bandwidth_lower_bound, bandwidth_upper_bound,
                      requested_subset)
from .errors import ConfigError, ContentcastError, IoError
from .scenario import Scenario, dumps, load_scenario, read_json, scenario_to_json, to_csv, write_text
from .sched import ConvergedConfig
from .workload import PRNG_NAME, TraceConfig, ZipfParams, generate_trace, make_catalog, zipf_pmf


def _read_bytes(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise IoError(f"{path}: {e.strerror}") from None


def _write_bytes(path, data: bytes) -> None:
    try:
        Path(path).write_bytes(data)
    except OSError as e:
        raise IoError(f"{path}: {e.strerror}") from None


def _sched_config(path, scenario: Scenario | None = None) -> ConvergedConfig:
    doc = read_json(path) if path else {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    cfg = ConvergedConfig.from_json(doc) if doc else experiment.CELL_NETWORK
    if scenario is not None and "cache_bits" not in doc:
        cfg = replace(cfg, cache=scenario.cache)
    return cfg


# pet ---------------------------------------------------------------------

def cmd_pet_encode(a) -> int:
    segments = [_read_bytes(p) for p in a.inputs]
    if any(not s for s in segments):
        raise ConfigError("input files must be non-empty")
    if a.rho == "auto":
        pops = zipf_pmf(ZipfParams(1.0, len(segments)))
        profile = pet.assign_priorities(pops, a.rho_floor)
    else:
        try:
            profile = pet.PriorityProfile(tuple(float(x) for x in a.rho.split(",")))
        except ValueError:
            raise ConfigError(f"--rho must be 'auto' or comma-separated reals, got {a.rho!r}") from None
    layout, packets = pet.pet_encode(segments, profile, a.n)
    out = Path(a.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise IoError(f"{out}: {e.strerror}") from None
    write_text(out / "layout.json", layout.dumps())
    for p in packets:
        _write_bytes(out / f"packet_{p.index:03d}.pet", p.to_bytes(layout))
    print(json.dumps({"n": layout.n_packets, "gamma": layout.packet_symbols,
                      "k": [s.k for s in layout.segments]}))
    return 0


def cmd_pet_decode(a) -> int:
    doc = read_json(a.layout)
    try:
        layout = pet.PetLayout.from_json(doc)
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, ContentcastError):
            raise
        raise ConfigError(f"{a.layout}: bad layout ({e})") from None
    packets = []
    for path in a.packets:
        p, n = pet.PetPacket.from_bytes(_read_bytes(path))
        if n != layout.n_packets:
            raise pet.CorruptPacket(f"{path}: N={n} but layout has N={layout.n_packets}")
        packets.append(p)
    result = pet.pet_decode(layout, packets)
    status = {}
    if a.out:
        Path(a.out).mkdir(parents=True, exist_ok=True)
    for sid, data in result.items():
        if data is pet.NotYetDecodable:
            status[str(sid)] = "not-yet-decodable"
            continue
        status[str(sid)] = "decoded"
        if a.out:
            _write_bytes(Path(a.out) / f"segment_{sid:03d}.bin", data)
    print(json.dumps({"packets": len(packets), "segments": status}, sort_keys=True))
    return 0


# workload ----------------------------------------------------------------

def cmd_workload_gen(a) -> int:
    catalog = make_catalog(a.size_bits, a.L)
    params = ZipfParams(a.s, a.L)
    reqs = generate_trace(catalog, params, TraceConfig(a.users, a.T, objects_per_request=a.objects_per_request,
                                                       seed=a.seed, earliest_request_s=a.earliest))
    bw = a.bandwidth if a.bandwidth is not None else float(bandwidth_upper_bound(reqs, catalog, a.T))
    cache = CacheSpec.from_json("inf" if a.cache_bits == "inf" else _int(a.cache_bits, "--cache-bits"))
    sc = Scenario(tuple(catalog), tuple(reqs), WirelessBudget(bw, a.T), cache,
                  scenario_id=f"zipf-s{a.s}-K{a.users}-seed{a.seed}-{PRNG_NAME}")
    write_text(a.out, dumps(scenario_to_json(sc)))
    return 0


def _int(v: str, flag: str) -> int:
    try:
        return int(v)
    except ValueError:
        raise ConfigError(f"{flag} must be an integer or 'inf', got {v!r}") from None


# sim ---------------------------------------------------------------------

def cmd_sim_run(a) -> int:
    sc = load_scenario(a.scenario)
    cfg = _sched_config(a.config, sc)
    doc = experiment.run_scenario(sc, cfg, a.planner)
    write_text(a.out, dumps(doc))
    if a.csv:
        row = doc.get("csv_row")
        if row is None:
            raise ConfigError("config bandwidth exceeds the scenario budget; no achievability row to write")
        write_text(a.csv, to_csv(list(row), [list(row.values())]))
    return 0


def _setup_from_args(a) -> experiment.CellSetup:
    kw = {}
    for name in ("trials", "k_max", "threshold", "n_items", "object_bits", "horizon_s", "earliest_request_s"):
        v = getattr(a, name, None)
        if v is not None:
            kw[name] = v
    return replace(experiment.CellSetup(), **kw)


def cmd_sim_sweep(a) -> int:
    cfg = _sched_config(a.config)
    b_values = [cfg.broadcast_bw_hz]
    for item in a.vary or []:
        key, _, spec = item.partition("=")
        if key != "b_broadcast" or not spec:
            raise ConfigError(f"--vary supports b_broadcast=<range>, got {item!r}")
        b_values = experiment.parse_range(spec)
    s_values = experiment.parse_range(a.s)
    rows = experiment.sweep(cfg, _setup_from_args(a), s_values, b_values, a.seed)
    write_text(a.csv, to_csv(experiment.SWEEP_COLUMNS, rows))
    return 0


def cmd_fig7(a) -> int:
    cfg = _sched_config(a.config)
    text = experiment.emit_fig7_data(cfg, _setup_from_args(a), experiment.parse_range(a.s),
                                     experiment.parse_range(a.b_broadcast), a.seed)
    write_text(a.csv, text)
    return 0


def cmd_run(a) -> int:
    return experiment.run_experiment(experiment.load_experiment(a.config))


# crowd -------------------------------------------------------------------

def _records(path, what):
    doc = read_json(path)
    if not isinstance(doc, list):
        raise ConfigError(f"{path}: expected a JSON array of {what}")
    return doc


def cmd_crowd_match(a) -> int:
    try:
        tasks = [crowd.task_from_json(d) for d in _records(a.tasks, "tasks")]
        offers = [crowd.offer_from_json(d) for d in _records(a.offers, "offers")]
    except ContentcastError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"bad task/offer record: {e}") from None
    solver = crowd.match_exact if a.solver == "exact" else crowd.match_greedy
    result = solver(tasks, offers)
    problems = crowd.validate_assignment(result, tasks, offers)
    if problems:
        raise ContentcastError("; ".join(problems))
    doc = result.to_json()
    doc["solver"] = a.solver
    doc["coverage"] = result.coverage
    write_text(a.out, dumps(doc))
    return 0


def cmd_crowd_negotiate(a) -> int:
    try:
        with open(a.log, encoding="utf-8") as f:
            tasks, offers = crowd.negotiate(f)
    except OSError as e:
        raise IoError(f"{a.log}: {e.strerror}") from None
    write_text(a.tasks_out, dumps([crowd.task_to_json(t) for t in tasks]))
    write_text(a.offers_out, dumps([crowd.offer_to_json(o) for o in offers]))
    return 0


# bounds ------------------------------------------------------------------

def cmd_bounds(a) -> int:
    sc = load_scenario(a.scenario)
    T = a.T if a.T is not None else sc.budget.horizon_s
    wanted = requested_subset(sc.requests, sc.catalog)
    doc = {
        "horizon_s": T,
        "b_min_hz": float(bandwidth_lower_bound(sc.catalog, T)),
        "b_min_requested_hz": float(bandwidth_lower_bound(wanted, T)) if wanted else 0.0,
        "b_max_hz": float(bandwidth_upper_bound(sc.requests, sc.catalog, T)),
    }
    print(json.dumps(doc, sort_keys=True))
    return 0


# parser ------------------------------------------------------------------

def _add_setup_flags(p):
    g = p.add_argument_group("cell setup")
    g.add_argument("--trials", type=int, help="seeded trials per capacity estimate (default 100)")
    g.add_argument("--k-max", dest="k_max", type=int, help="largest K probed (default 4096)")
    g.add_argument("--threshold", type=float, help="fraction of trials that must serve everyone (default 0.95)")
    g.add_argument("--n-items", dest="n_items", type=int, help="catalog length L (default 100)")
    g.add_argument("--object-bits", dest="object_bits", type=int, help="size of every object (default 100)")
    g.add_argument("--horizon", dest="horizon_s", type=float, help="horizon T in seconds (default 100)")
    g.add_argument("--earliest", dest="earliest_request_s", type=float,
                   help="requests fall uniformly in (earliest, T] (default 20)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="contentcast", description="Content-centric delivery toolkit.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("pet", help="priority encoding transmission codec")
    psub = p.add_subparsers(dest="pet_cmd", required=True)
    e = psub.add_parser("encode", help="encode files into N PET packets")
    e.add_argument("--in", dest="inputs", nargs="+", required=True, help="segment files, most popular first")
    e.add_argument("--rho", required=True, help="comma-separated priority indices, or 'auto'")
    e.add_argument("--rho-floor", type=float, default=0.25, help="smallest rho used by --rho auto")
    e.add_argument("--n", type=int, required=True, help="number of packets N (1..255)")
    e.add_argument("--out", required=True, help="output directory for layout.json and packets")
    e.set_defaults(func=cmd_pet_encode)
    d = psub.add_parser("decode", help="decode whatever segments the packets allow")
    d.add_argument("--layout", required=True, help="layout.json written by encode")
    d.add_argument("--packets", nargs="*", default=[], help="packet files")
    d.add_argument("--out", help="directory for decoded segments")
    d.set_defaults(func=cmd_pet_decode)

    p = sub.add_parser("workload", help="seeded Zipf workloads")
    wsub = p.add_subparsers(dest="workload_cmd", required=True)
    g = wsub.add_parser("gen", help="write a scenario JSON")
    g.add_argument("--L", type=int, required=True, help="catalog length")
    g.add_argument("--s", type=float, required=True, help="Zipf exponent")
    g.add_argument("--users", type=int, required=True, help="number of users K")
    g.add_argument("--T", type=float, required=True, help="horizon in seconds")
    g.add_argument("--seed", type=int, required=True, help="unsigned 64-bit seed")
    g.add_argument("--out", required=True, help="scenario JSON path")
    g.add_argument("--size-bits", type=int, default=1000, help="size of every object (default 1000)")
    g.add_argument("--objects-per-request", type=int, default=1, help="objects per request (default 1)")
    g.add_argument("--earliest", type=float, default=0.0, help="requests fall in (earliest, T] (default 0)")
    g.add_argument("--bandwidth", type=float, help="scenario budget B in Hz (default: all-unicast bound)")
    g.add_argument("--cache-bits", default="inf", help="per-user cache M in bits, or 'inf'")
    g.set_defaults(func=cmd_workload_gen)

    p = sub.add_parser("sim", help="plan and simulate deliveries")
    ssub = p.add_subparsers(dest="sim_cmd", required=True)
    r = ssub.add_parser("run", help="plan and simulate one scenario")
    r.add_argument("--scenario", required=True, help="scenario JSON")
    r.add_argument("--config", help="network config JSON (ConvergedConfig fields)")
    r.add_argument("--planner", choices=["converged", "unicast", "broadcast_all"], default="converged",
                   help="delivery planner (default converged)")
    r.add_argument("--out", required=True, help="report JSON path")
    r.add_argument("--csv", help="also write the report as a CSV row")
    r.set_defaults(func=cmd_sim_run)
    w = ssub.add_parser("sweep", help="users-per-cell sweep")
    w.add_argument("--vary", action="append", help="b_broadcast=start:step:stop or b_broadcast=a,b,c")
    w.add_argument("--s", default="1.0", help="Zipf exponents, comma list (default 1.0)")
    w.add_argument("--seed", type=int, required=True, help="base seed for the trials")
    w.add_argument("--config", help="network config JSON")
    w.add_argument("--csv", required=True, help="output CSV path")
    _add_setup_flags(w)
    w.set_defaults(func=cmd_sim_sweep)

    p = sub.add_parser("crowd", help="OCP/NSP crowdsourcing")
    csub = p.add_subparsers(dest="crowd_cmd", required=True)
    m = csub.add_parser("match", help="assign tasks to SLA offers")
    m.add_argument("--tasks", required=True, help="JSON array of task records")
    m.add_argument("--offers", required=True, help="JSON array of offer records")
    m.add_argument("--solver", choices=["exact", "greedy"], default="exact",
                   help="exact optimum or largest-first greedy (default exact)")
    m.add_argument("--out", required=True, help="assignment JSON path")
    m.set_defaults(func=cmd_crowd_match)
    n = csub.add_parser("negotiate", help="fold a JSON Lines message log into tasks and offers")
    n.add_argument("--log", required=True, help="JSON Lines log")
    n.add_argument("--tasks-out", required=True, help="tasks JSON path")
    n.add_argument("--offers-out", required=True, help="offers JSON path")
    n.set_defaults(func=cmd_crowd_negotiate)

    b = sub.add_parser("bounds", help="broadcast (minimum) and unicast (maximum) bandwidth")
    b.add_argument("--scenario", required=True, help="scenario JSON")
    b.add_argument("--T", type=float, help="override the horizon")
    b.set_defaults(func=cmd_bounds)

    f = sub.add_parser("fig7", help="users per cell against broadcast bandwidth")
    f.add_argument("--s", default="0.5,1.0", help="Zipf exponents (default 0.5,1.0)")
    f.add_argument("--b-broadcast", default="0:20:100", help="broadcast bandwidths (default 0:20:100)")
    f.add_argument("--seed", type=int, required=True, help="base seed for the trials")
    f.add_argument("--config", help="network config JSON")
    f.add_argument("--csv", required=True, help="output CSV path")
    _add_setup_flags(f)
    f.set_defaults(func=cmd_fig7)

    x = sub.add_parser("run", help="run an experiment config")
    x.add_argument("--config", required=True, help="experiment JSON")
    x.set_defaults(func=cmd_run)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ContentcastError as e:
        print(f"error[{e.code}]: {e}", file=sys.stderr)
        return e.exit_status
    except OSError as e:
        print(f"error[io]: {e}", file=sys.stderr)
        return 3
    except Exception as e:  # noqa: BLE001
        print(f"error[internal]: {type(e).__name__}: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
