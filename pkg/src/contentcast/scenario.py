"""Scenario files and report serialization."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import jsonschema

from .catalog import CacheSpec, ContentObject, ContentRateReport, ServiceRequest, WirelessBudget, validate_catalog, validate_requests
from .errors import ConfigError, IoError

SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["catalog", "requests", "budget", "cache_bits"],
    "additionalProperties": False,
    "properties": {
        "scenario_id": {"type": "string"},
        "catalog": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id", "size_bits"],
                "additionalProperties": False,
                "properties": {"id": {"type": "integer", "minimum": 0},
                               "size_bits": {"type": "integer", "minimum": 1}},
            },
        },
        "requests": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["user_id", "t_s", "objects"],
                "additionalProperties": False,
                "properties": {
                    "user_id": {"type": "integer", "minimum": 0},
                    "t_s": {"type": "number", "exclusiveMinimum": 0},
                    "objects": {"type": "array", "minItems": 1, "uniqueItems": True,
                                "items": {"type": "integer", "minimum": 0}},
                },
            },
        },
        "budget": {
            "type": "object",
            "required": ["bandwidth_hz", "horizon_s"],
            "additionalProperties": False,
            "properties": {
                "bandwidth_hz": {"type": "number", "exclusiveMinimum": 0},
                "horizon_s": {"type": "number", "exclusiveMinimum": 0},
                "link_rate": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "cache_bits": {"oneOf": [{"type": "integer", "minimum": 0}, {"const": "inf"}]},
    },
}

REPORT_COLUMNS = ["scenario_id", "B", "T", "M", "delivered_bits", "content_rate", "n_satisfied", "n_users"]


@dataclass(frozen=True)
class Scenario:
    catalog: tuple[ContentObject, ...]
    requests: tuple[ServiceRequest, ...]
    budget: WirelessBudget
    cache: CacheSpec
    scenario_id: str = ""

    def __post_init__(self):
        sizes = validate_catalog(self.catalog)
        validate_requests(self.requests, sizes, self.budget.horizon_s)


def validate(doc, schema, what: str) -> None:
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"{what}: {where}: {e.message}") from None


def scenario_from_json(doc: dict) -> Scenario:
    validate(doc, SCENARIO_SCHEMA, "scenario")
    b = doc["budget"]
    return Scenario(
        catalog=tuple(ContentObject(o["id"], o["size_bits"]) for o in doc["catalog"]),
        requests=tuple(ServiceRequest(r["user_id"], r["t_s"], frozenset(r["objects"])) for r in doc["requests"]),
        budget=WirelessBudget(b["bandwidth_hz"], b["horizon_s"], b.get("link_rate", 1)),
        cache=CacheSpec.from_json(doc["cache_bits"]),
        scenario_id=doc.get("scenario_id", ""),
    )


def scenario_to_json(sc: Scenario) -> dict:
    doc = {
        "catalog": [{"id": o.id, "size_bits": o.size_bits} for o in sc.catalog],
        "requests": [{"user_id": r.user_id, "t_s": r.request_time_s, "objects": sorted(r.object_ids)}
                     for r in sc.requests],
        "budget": {"bandwidth_hz": sc.budget.bandwidth_hz, "horizon_s": sc.budget.horizon_s,
                   "link_rate": sc.budget.link_rate_bps_per_hz},
        "cache_bits": sc.cache.to_json(),
    }
    if sc.scenario_id:
        doc["scenario_id"] = sc.scenario_id
    return doc


def read_json(path) -> object:
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except OSError as e:
        raise IoError(f"{path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e.msg} at line {e.lineno})") from None


def write_text(path, text: str) -> None:
    try:
        p = Path(path)
        if p.parent and not p.parent.exists():
            p.parent.mkdir(parents=True)
        with open(p, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    except OSError as e:
        raise IoError(f"{path}: {e.strerror}") from None


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def load_scenario(path) -> Scenario:
    return scenario_from_json(read_json(path))


def to_csv(columns: Sequence[str], rows: Sequence[Sequence]) -> str:
    """CSV with a header, ``,`` separator, ``.`` decimals and ``\\n`` line ends."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return v


def report_row(sc: Scenario, report: ContentRateReport) -> list:
    users = report.satisfied_users | report.unsatisfied_users
    return [sc.scenario_id, float(sc.budget.bandwidth_hz), float(sc.budget.horizon_s), sc.cache.to_json(),
            report.delivered_bits, float(report.content_rate), len(report.satisfied_users), len(users)]
