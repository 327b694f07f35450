"""Reproducible experiments: scenario runs, capacity sweeps and capacity curves.

Sweep points are independent and may run in worker processes (capped by
``CONTENTCAST_THREADS``; 0 means one per CPU, unset means sequential).
Results are always emitted in declared sweep order.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from statistics import fmean
from typing import Sequence

from .catalog import CacheSpec, WirelessBudget, bandwidth_upper_bound, check_achievable
from .errors import ConfigError
from .scenario import (REPORT_COLUMNS, Scenario, dumps, load_scenario, read_json, report_row,
                       scenario_from_json, to_csv, validate, write_text)
from .sched import ConvergedConfig, all_served, plan_broadcast_all, plan_converged, plan_unicast, simulate, users_per_cell
from .workload import TraceConfig, ZipfParams, generate_trace, make_catalog, request_frequencies, trial_seed

SWEEP_COLUMNS = ["s", "B_b", "B_c", "M", "K_supported", "mean_content_rate", "mean_unicast_bits"]
CAPACITY_COLUMNS = ["s", "B_b", "B_c", "M", "K_supported", "K_baseline", "gain_ratio"]


@dataclass(frozen=True)
class CellSetup:
    """Workload side of a capacity sweep (the network side is a ConvergedConfig)."""

    n_items: int = 100
    object_bits: int = 100
    horizon_s: float = 100.0
    earliest_request_s: float = 20.0
    objects_per_request: int = 1
    requests_per_user: int = 1
    trials: int = 100
    k_max: int = 4096
    threshold: float = 0.95

    def catalog(self):
        return make_catalog(self.object_bits, self.n_items)

    def trace(self, seed: int) -> TraceConfig:
        return TraceConfig(n_users=1, horizon_s=self.horizon_s, requests_per_user=self.requests_per_user,
                           objects_per_request=self.objects_per_request, seed=seed,
                           earliest_request_s=self.earliest_request_s)


# network defaults matching CellSetup: one push period ends before the first request
CELL_NETWORK = ConvergedConfig(broadcast_bw_hz=0, cellular_bw_hz=40, cache=CacheSpec.infinite(), push_period_s=20.0)
DEFAULT_B_BROADCAST = (0.0, 20.0, 40.0, 60.0, 80.0, 100.0)
DEFAULT_S = (0.5, 1.0)


def worker_count() -> int:
    raw = os.environ.get("CONTENTCAST_THREADS")
    if raw is None or raw == "":
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"CONTENTCAST_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ConfigError("CONTENTCAST_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def _ordered_map(fn, items: Sequence) -> list:
    n = min(worker_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def _point(args) -> tuple:
    net, setup, s, b_b, seed = args
    cfg = replace(net, broadcast_bw_hz=b_b)
    params = ZipfParams(s, setup.n_items)
    catalog = setup.catalog()
    trace = setup.trace(seed)
    k = users_per_cell(cfg, params, trace, setup.trials, catalog=catalog, k_max=setup.k_max,
                       threshold=setup.threshold)
    rates, unicast = [], []
    if k > 0:
        for i in range(setup.trials):
            _, rep = all_served(cfg, params, replace(trace, n_users=k, seed=trial_seed(seed, i)), catalog)
            rates.append(float(rep.content_rate))
            unicast.append(rep.unicast_bits)
    return (s, float(b_b), float(cfg.cellular_bw_hz), cfg.cache.to_json(), k,
            fmean(rates) if rates else 0.0, fmean(unicast) if unicast else 0.0)


def sweep(net: ConvergedConfig, setup: CellSetup, s_values: Sequence[float], b_values: Sequence[float],
          seed: int) -> list[tuple]:
    """One row per (s, B_b) in the given order, columns as SWEEP_COLUMNS."""
    if not s_values or not b_values:
        raise ConfigError("sweep ranges must be non-empty")
    points = [(net, setup, float(s), float(b), seed) for s in s_values for b in b_values]
    return _ordered_map(_point, points)


def emit_fig7_data(net: ConvergedConfig = CELL_NETWORK, setup: CellSetup = CellSetup(),
                   s_values: Sequence[float] = DEFAULT_S, b_values: Sequence[float] = DEFAULT_B_BROADCAST,
                   seed: int = 0) -> str:
    """Users per cell against broadcast bandwidth, one curve per Zipf exponent.

    The cellular-only baseline (B_b = 0) is always included and every row
    carries its gain over that baseline.
    """
    b_values = sorted({0.0, *map(float, b_values)})
    rows = sweep(net, setup, s_values, b_values, seed)
    base = {r[0]: r[4] for r in rows if r[1] == 0.0}
    out = []
    for s, b, bc, m, k, _, _ in rows:
        k0 = base[s]
        gain = (k / k0) if k0 else (float("inf") if k else 1.0)
        out.append((s, b, bc, m, k, k0, gain))
    return to_csv(CAPACITY_COLUMNS, out)


def parse_range(spec: str) -> list[float]:
    """``a:step:b`` (inclusive) or a comma list."""
    try:
        if ":" in spec:
            a, step, b = (float(x) for x in spec.split(":"))
            if step <= 0 or b < a:
                raise ValueError
            n = int(round((b - a) / step))
            vals = [a + i * step for i in range(n + 1)]
            return [v for v in vals if v <= b + 1e-9 * max(1.0, abs(b))]
        vals = [float(x) for x in spec.split(",") if x.strip()]
        if not vals:
            raise ValueError
        return vals
    except ValueError:
        raise ConfigError(f"bad range {spec!r}; use start:step:stop or a comma list") from None


EXPERIMENT_SCHEMA = {
    "type": "object",
    "required": ["seed", "outputs"],
    "additionalProperties": False,
    "properties": {
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "scenario": {"oneOf": [{"type": "string"}, {"type": "object"}]},
        "workload": {
            "type": "object",
            "additionalProperties": False,
            "required": ["L", "s", "users", "T"],
            "properties": {
                "L": {"type": "integer", "minimum": 1},
                "s": {"type": "number", "minimum": 0},
                "users": {"type": "integer", "minimum": 1},
                "T": {"type": "number", "exclusiveMinimum": 0},
                "size_bits": {"type": "integer", "minimum": 1},
                "objects_per_request": {"type": "integer", "minimum": 1},
                "earliest_request_s": {"type": "number", "minimum": 0},
            },
        },
        "sched": {"type": "object"},
        "planner": {"enum": ["converged", "unicast", "broadcast_all"]},
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "required": ["b_broadcast", "s"],
            "properties": {
                "b_broadcast": {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 0}},
                "s": {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 0}},
                "trials": {"type": "integer", "minimum": 1},
                "k_max": {"type": "integer", "minimum": 1},
                "threshold": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "n_items": {"type": "integer", "minimum": 1},
                "object_bits": {"type": "integer", "minimum": 1},
                "horizon_s": {"type": "number", "exclusiveMinimum": 0},
                "earliest_request_s": {"type": "number", "minimum": 0},
                "objects_per_request": {"type": "integer", "minimum": 1},
            },
        },
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"report": {"type": "string"}, "csv": {"type": "string"}},
        },
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    scenario: Scenario | None = None
    sched: ConvergedConfig = CELL_NETWORK
    planner: str = "converged"
    sweep_s: tuple[float, ...] = ()
    sweep_b: tuple[float, ...] = ()
    setup: CellSetup = field(default_factory=CellSetup)
    report_path: str | None = None
    csv_path: str | None = None


def experiment_from_json(doc: dict, base_dir: str = ".") -> ExperimentConfig:
    validate(doc, EXPERIMENT_SCHEMA, "experiment config")
    seed = doc["seed"]
    scenario = None
    if "scenario" in doc and "workload" in doc:
        raise ConfigError("experiment config: give either scenario or workload, not both")
    if "scenario" in doc:
        sc = doc["scenario"]
        scenario = load_scenario(os.path.join(base_dir, sc)) if isinstance(sc, str) else scenario_from_json(sc)
    sched = ConvergedConfig.from_json(doc["sched"]) if "sched" in doc else CELL_NETWORK
    if "workload" in doc:
        scenario = workload_scenario(doc["workload"], seed, sched)
    elif scenario is not None and "cache_bits" not in doc.get("sched", {}):
        sched = replace(sched, cache=scenario.cache)
    sw = doc.get("sweep", {})
    setup = CellSetup(**{k: sw[k] for k in ("trials", "k_max", "threshold", "n_items", "object_bits", "horizon_s",
                                             "earliest_request_s", "objects_per_request") if k in sw})
    outs = doc["outputs"]
    if "sweep" in doc and "csv" not in outs:
        raise ConfigError("experiment config: a sweep needs outputs.csv")
    if scenario is not None and "report" not in outs:
        raise ConfigError("experiment config: a scenario run needs outputs.report")
    return ExperimentConfig(
        seed=seed, scenario=scenario, sched=sched, planner=doc.get("planner", "converged"),
        sweep_s=tuple(sw.get("s", ())), sweep_b=tuple(sw.get("b_broadcast", ())), setup=setup,
        report_path=os.path.join(base_dir, outs["report"]) if "report" in outs else None,
        csv_path=os.path.join(base_dir, outs["csv"]) if "csv" in outs else None,
    )


def workload_scenario(w: dict, seed: int, sched: ConvergedConfig) -> Scenario:
    catalog = make_catalog(w.get("size_bits", 1000), w["L"])
    params = ZipfParams(w["s"], w["L"])
    reqs = generate_trace(catalog, params, TraceConfig(w["users"], w["T"], objects_per_request=w.get(
        "objects_per_request", 1), seed=seed, earliest_request_s=w.get("earliest_request_s", 0.0)))
    bw = sched.broadcast_bw_hz + sched.cellular_bw_hz
    if not bw > 0:
        bw = float(bandwidth_upper_bound(reqs, catalog, w["T"]))
    return Scenario(tuple(catalog), tuple(reqs), WirelessBudget(bw, w["T"]), sched.cache, scenario_id=f"zipf-s{w['s']}")


def run_scenario(sc: Scenario, cfg: ConvergedConfig, planner: str = "converged", popularity=None) -> dict:
    """Plan ``sc`` and return a JSON-ready report (simulation plus achievability)."""
    T = sc.budget.horizon_s
    lr = sc.budget.link_rate_bps_per_hz
    cfg = replace(cfg, link_rate_bps_per_hz=lr)
    if planner == "unicast":
        plan = plan_unicast(sc.requests, sc.catalog, cfg.cellular_bw_hz, lr)
    elif planner == "broadcast_all":
        plan = plan_broadcast_all(sc.catalog, cfg.broadcast_bw_hz, T, lr)
    elif planner == "converged":
        if popularity is None:
            popularity = request_frequencies(sc.requests, len(sc.catalog))
        plan = plan_converged(sc.requests, sc.catalog, popularity, cfg, horizon_s=T)
    else:
        raise ConfigError(f"unknown planner {planner!r}")
    sim = simulate(plan, sc.requests, sc.catalog, cfg.cache, broadcast_bw_hz=cfg.broadcast_bw_hz,
                   cellular_bw_hz=cfg.cellular_bw_hz, horizon_s=T, link_rate=lr)
    doc = {"scenario_id": sc.scenario_id, "planner": planner, "config": cfg.to_json(),
           "plan": plan.summary(), "sim": sim.to_json()}
    budget_ok = cfg.broadcast_bw_hz + cfg.cellular_bw_hz <= sc.budget.bandwidth_hz
    if budget_ok:
        rep = check_achievable(plan, sc.requests, sc.catalog, cfg.cache, sc.budget)
        doc["achievability"] = rep.to_json()
        doc["csv_row"] = dict(zip(REPORT_COLUMNS, report_row(sc, rep)))
    return doc


def run_experiment(cfg: ExperimentConfig) -> int:
    """Write the report JSON and/or sweep CSV; returns the exit status."""
    if cfg.scenario is not None:
        write_text(cfg.report_path, dumps(run_scenario(cfg.scenario, cfg.sched, cfg.planner)))
    if cfg.sweep_s:
        rows = sweep(cfg.sched, cfg.setup, cfg.sweep_s, cfg.sweep_b, cfg.seed)
        write_text(cfg.csv_path, to_csv(SWEEP_COLUMNS, rows))
    return 0


def load_experiment(path) -> ExperimentConfig:
    return experiment_from_json(read_json(path), base_dir=os.path.dirname(os.path.abspath(path)))
