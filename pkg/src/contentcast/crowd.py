"""Matching OCP distribution subtasks to NSP SLA offers.

A task may take one offer and an offer serves one task. An offer covers a
task when it brings enough resources, fits the budget, carries the right
object (or any object) and offers every management tag the task prefers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ConfigError, MalformedMessage

ANY = None


@dataclass(frozen=True)
class TaskProfile:
    task_id: str
    object_id: int
    resource_needed: float
    budget: float
    preferred_mgmt: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "preferred_mgmt", frozenset(self.preferred_mgmt))
        if not self.resource_needed > 0:
            raise ConfigError(f"task {self.task_id}: resource_needed must be positive")
        if not self.budget >= 0:
            raise ConfigError(f"task {self.task_id}: budget must be non-negative")


@dataclass(frozen=True)
class SlaOffer:
    offer_id: str
    nsp_id: str
    object_id: int | None
    resources: float
    expense: float
    mgmt: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "mgmt", frozenset(self.mgmt))
        if not self.resources > 0:
            raise ConfigError(f"offer {self.offer_id}: resources must be positive")
        if not self.expense >= 0:
            raise ConfigError(f"offer {self.offer_id}: expense must be non-negative")


@dataclass(frozen=True)
class Assignment:
    pairs: tuple[tuple[str, str], ...] = ()
    total_expense: float = 0.0

    @property
    def coverage(self) -> int:
        return len(self.pairs)

    def to_json(self) -> dict:
        return {
            "pairs": [{"task_id": t, "offer_id": o} for t, o in self.pairs],
            "total_expense": self.total_expense,
        }


def covers(offer: SlaOffer, task: TaskProfile) -> bool:
    return (offer.resources >= task.resource_needed
            and offer.expense <= task.budget
            and (offer.object_id is ANY or offer.object_id == task.object_id)
            and task.preferred_mgmt <= offer.mgmt)


def _assignment(pairs: Iterable[tuple[TaskProfile, SlaOffer]]) -> Assignment:
    pairs = sorted(pairs, key=lambda p: (p[0].task_id, p[1].offer_id))
    return Assignment(tuple((t.task_id, o.offer_id) for t, o in pairs),
                      math.fsum(o.expense for _, o in pairs))


def validate_assignment(a: Assignment, tasks: Sequence[TaskProfile], offers: Sequence[SlaOffer]) -> list[str]:
    """Every violated constraint, derived from the raw inputs."""
    t_by = {t.task_id: t for t in tasks}
    o_by = {o.offer_id: o for o in offers}
    problems = []
    seen_t, seen_o = set(), set()
    total = []
    for tid, oid in a.pairs:
        if tid not in t_by or oid not in o_by:
            problems.append(f"unknown pair ({tid}, {oid})")
            continue
        if tid in seen_t:
            problems.append(f"task {tid} assigned twice")
        if oid in seen_o:
            problems.append(f"offer {oid} used twice")
        seen_t.add(tid)
        seen_o.add(oid)
        t, o = t_by[tid], o_by[oid]
        if o.resources < t.resource_needed:
            problems.append(f"offer {oid} lacks resources for {tid}")
        if o.expense > t.budget:
            problems.append(f"offer {oid} exceeds budget of {tid}")
        if o.object_id is not ANY and o.object_id != t.object_id:
            problems.append(f"offer {oid} carries the wrong object for {tid}")
        if not t.preferred_mgmt <= o.mgmt:
            problems.append(f"offer {oid} misses management tags of {tid}")
        total.append(o.expense)
    if not math.isclose(math.fsum(total), a.total_expense, rel_tol=1e-12, abs_tol=1e-12):
        problems.append("total_expense does not match the pairs")
    return problems


def _optimum(tasks, offers, allowed) -> tuple[int, float]:
    """(coverage, expense) of the lexicographic optimum over ``allowed`` edges."""
    if not tasks or not offers:
        return 0, 0.0
    expense = np.array([[o.expense for o in offers]] * len(tasks), dtype=float)
    big = 1.0 + float(expense.sum())
    cost = np.where(allowed, expense - big, 0.0)
    rows, cols = linear_sum_assignment(cost)
    chosen = [(r, c) for r, c in zip(rows, cols) if allowed[r, c]]
    return len(chosen), math.fsum(offers[c].expense for _, c in chosen)


def match_exact(tasks: Sequence[TaskProfile], offers: Sequence[SlaOffer]) -> Assignment:
    """Max number of tasks assigned, then min total expense.

    Among optimal matchings the result is canonical: tasks are fixed in
    ``task_id`` order, each taking the first ``offer_id`` (or no offer, tried
    last) that still admits an optimal completion.
    """
    tasks = sorted(tasks, key=lambda t: t.task_id)
    offers = sorted(offers, key=lambda o: o.offer_id)
    allowed = np.array([[covers(o, t) for o in offers] for t in tasks], dtype=bool).reshape(len(tasks), len(offers))
    best = _optimum(tasks, offers, allowed)
    if best[0] == 0:
        return Assignment()
    tol = 1e-9 * max(1.0, best[1])

    def still_optimal(mask) -> bool:
        cov, exp = _optimum(tasks, offers, mask)
        return cov == best[0] and exp <= best[1] + tol

    mask = allowed.copy()
    chosen = []
    for i in range(len(tasks)):
        picked = False
        for j in np.flatnonzero(mask[i]):
            trial = mask.copy()
            trial[i, :] = False
            trial[:, j] = False
            trial[i, j] = True
            if still_optimal(trial):
                mask = trial
                chosen.append((tasks[i], offers[j]))
                picked = True
                break
        if not picked:
            mask[i, :] = False
    return _assignment(chosen)


def match_greedy(tasks: Sequence[TaskProfile], offers: Sequence[SlaOffer]) -> Assignment:
    """Largest tasks first, each taking the cheapest compatible free offer."""
    free = sorted(offers, key=lambda o: (o.expense, o.offer_id))
    chosen = []
    for t in sorted(tasks, key=lambda t: (-t.resource_needed, t.task_id)):
        for o in free:
            if covers(o, t):
                chosen.append((t, o))
                free.remove(o)
                break
    return _assignment(chosen)


def task_from_json(d: dict) -> TaskProfile:
    return TaskProfile(str(d["task_id"]), int(d["object_id"]), float(d["resource_needed"]),
                       float(d["budget"]), frozenset(d.get("preferred_mgmt", ())))


def offer_from_json(d: dict) -> SlaOffer:
    obj = d.get("object_id")
    return SlaOffer(str(d["offer_id"]), str(d["nsp_id"]), None if obj in (None, "any") else int(obj),
                    float(d["resources"]), float(d["expense"]), frozenset(d.get("mgmt", ())))


def task_to_json(t: TaskProfile) -> dict:
    return {"task_id": t.task_id, "object_id": t.object_id, "resource_needed": t.resource_needed,
            "budget": t.budget, "preferred_mgmt": sorted(t.preferred_mgmt)}


def offer_to_json(o: SlaOffer) -> dict:
    return {"offer_id": o.offer_id, "nsp_id": o.nsp_id, "object_id": "any" if o.object_id is ANY else o.object_id,
            "resources": o.resources, "expense": o.expense, "mgmt": sorted(o.mgmt)}


@dataclass
class _Snapshot:
    tasks: dict[str, TaskProfile] = field(default_factory=dict)
    offers: dict[str, SlaOffer] = field(default_factory=dict)


def negotiate(log: Iterable[str | dict]) -> tuple[list[TaskProfile], list[SlaOffer]]:
    """Fold a negotiation log into the current tasks and live offers.

    Records are JSON objects (or JSON Lines text) with ``type`` one of
    ``task``, ``offer`` or ``withdraw``. Later records replace earlier ones
    with the same id; ``withdraw`` removes an offer (``offer_id``) or a task
    (``task_id``). Blank lines are skipped but still counted.
    """
    snap = _Snapshot()
    for lineno, rec in enumerate(log, start=1):
        if isinstance(rec, str):
            if not rec.strip():
                continue
            try:
                rec = json.loads(rec)
            except json.JSONDecodeError as e:
                raise MalformedMessage(lineno, f"invalid JSON ({e.msg})") from None
        if not isinstance(rec, dict):
            raise MalformedMessage(lineno, "record is not an object")
        kind = rec.get("type")
        try:
            if kind == "task":
                t = task_from_json(rec)
                snap.tasks[t.task_id] = t
            elif kind == "offer":
                o = offer_from_json(rec)
                snap.offers[o.offer_id] = o
            elif kind == "withdraw":
                if "offer_id" in rec:
                    snap.offers.pop(str(rec["offer_id"]), None)
                elif "task_id" in rec:
                    snap.tasks.pop(str(rec["task_id"]), None)
                else:
                    raise MalformedMessage(lineno, "withdraw needs offer_id or task_id")
            else:
                raise MalformedMessage(lineno, f"unknown message type {kind!r}")
        except MalformedMessage:
            raise
        except (KeyError, TypeError, ValueError) as e:
            raise MalformedMessage(lineno, f"bad {kind} record: {e}") from None
    return (sorted(snap.tasks.values(), key=lambda t: t.task_id),
            sorted(snap.offers.values(), key=lambda o: o.offer_id))
