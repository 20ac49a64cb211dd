"""Typed model of a switchable distribution feeder partitioned into microgrids.

A feeder is a radial (acyclic) network of buses and lines. Circuit breakers
sit on lines; a load is served when every breaker on the path from its bus to
a generator is closed. The microgrid partition assigns every breaker to
exactly one agent. Feeder values are immutable after construction and safe to
share across threads and processes.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

FORMAT_VERSION = 1

DEFAULT_V_MIN = 0.95
DEFAULT_V_MAX = 1.05


class FeederError(ValueError):
    """Base class for feeder document problems."""


class FeederParseError(FeederError):
    """The document is not a well-formed feeder document."""


class FeederReferenceError(FeederError):
    """The document references a bus, line or breaker id that does not exist."""


class FeederValidationError(FeederError):
    """The document parsed but violates feeder invariants."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


@dataclass(frozen=True)
class Bus:
    id: str
    v_min: float = DEFAULT_V_MIN
    v_max: float = DEFAULT_V_MAX


@dataclass(frozen=True)
class Line:
    id: str
    from_bus: str
    to_bus: str
    resistance: float  # p.u. on the feeder base
    reactance: float   # p.u. on the feeder base
    s_rating: float    # kVA


@dataclass(frozen=True)
class Breaker:
    id: str
    line_id: str
    state: int = 0  # 0 = open, 1 = closed (nominal state in the document)


@dataclass(frozen=True)
class LoadPoint:
    id: str
    bus_id: str
    p_rated: float  # kW
    q_rated: float  # kvar
    weight: float = 1.0
    breaker_id: str = ""


@dataclass(frozen=True)
class Generator:
    id: str
    bus_id: str
    p_min: float
    p_max: float
    q_min: float
    q_max: float


@dataclass(frozen=True)
class MicrogridPartition:
    """Ordered breaker-id lists per agent; agent k owns ``assignments[k]``."""

    assignments: tuple[tuple[str, ...], ...]

    @property
    def n_agents(self) -> int:
        return len(self.assignments)


@dataclass(frozen=True)
class Feeder:
    name: str
    s_base_kva: float
    v_base_kv: float
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    breakers: tuple[Breaker, ...]
    loads: tuple[LoadPoint, ...]
    generators: tuple[Generator, ...]
    partition: MicrogridPartition

    # -- convenience accessors ------------------------------------------------

    @property
    def n_breakers(self) -> int:
        return len(self.breakers)

    @property
    def n_agents(self) -> int:
        return self.partition.n_agents

    def breaker_index(self, breaker_id: str) -> int:
        for i, b in enumerate(self.breakers):
            if b.id == breaker_id:
                return i
        raise KeyError(breaker_id)

    def agent_breaker_indices(self, agent: int) -> tuple[int, ...]:
        """Global breaker indices owned by an agent, in partition order."""
        by_id = {b.id: i for i, b in enumerate(self.breakers)}
        return tuple(by_id[bid] for bid in self.partition.assignments[agent])

    def total_load_kw(self) -> float:
        return sum(ld.p_rated for ld in self.loads)

    def total_weighted_load_kw(self) -> float:
        return sum(ld.p_rated * ld.weight for ld in self.loads)

    def total_capacity_kw(self) -> float:
        return sum(g.p_max for g in self.generators)

    def nominal_states(self) -> tuple[int, ...]:
        return tuple(b.state for b in self.breakers)


# -- validation ----------------------------------------------------------------


def _duplicates(ids):
    seen, dup = set(), []
    for x in ids:
        if x in seen:
            dup.append(x)
        seen.add(x)
    return dup


def validate_feeder(feeder: Feeder) -> list[str]:
    """Check every feeder invariant; return a list of violations (empty = ok).

    Violations are data, not failures: each entry names the offending element.
    """
    v: list[str] = []
    bus_ids = {b.id for b in feeder.buses}
    line_ids = {ln.id for ln in feeder.lines}
    breaker_ids = {b.id for b in feeder.breakers}

    for kind, ids in (
        ("bus", [b.id for b in feeder.buses]),
        ("line", [ln.id for ln in feeder.lines]),
        ("breaker", [b.id for b in feeder.breakers]),
        ("load", [ld.id for ld in feeder.loads]),
        ("generator", [g.id for g in feeder.generators]),
    ):
        for d in _duplicates(ids):
            v.append(f"duplicate {kind} id {d}")

    if feeder.s_base_kva <= 0:
        v.append("non-positive s_base_kva")
    if feeder.v_base_kv <= 0:
        v.append("non-positive v_base_kv")

    for b in feeder.buses:
        if not (0 < b.v_min < b.v_max):
            v.append(f"bad voltage band on bus {b.id}")
    for ln in feeder.lines:
        if ln.from_bus not in bus_ids:
            v.append(f"line {ln.id} references unknown bus {ln.from_bus}")
        if ln.to_bus not in bus_ids:
            v.append(f"line {ln.id} references unknown bus {ln.to_bus}")
        if ln.from_bus == ln.to_bus:
            v.append(f"line {ln.id} is a self-loop")
        if ln.resistance < 0 or ln.reactance < 0:
            v.append(f"negative impedance on line {ln.id}")
        if ln.s_rating <= 0:
            v.append(f"non-positive rating on line {ln.id}")
    for b in feeder.breakers:
        if b.line_id not in line_ids:
            v.append(f"breaker {b.id} references unknown line {b.line_id}")
        if b.state not in (0, 1):
            v.append(f"breaker {b.id} state not binary")
    for ld in feeder.loads:
        if ld.bus_id not in bus_ids:
            v.append(f"load {ld.id} references unknown bus {ld.bus_id}")
        if ld.breaker_id and ld.breaker_id not in breaker_ids:
            v.append(f"load {ld.id} references unknown breaker {ld.breaker_id}")
        if ld.p_rated < 0:
            v.append(f"negative rating on load {ld.id}")
        if not (0 < ld.weight <= 1):
            v.append(f"weight outside (0, 1] on load {ld.id}")
    for g in feeder.generators:
        if g.bus_id not in bus_ids:
            v.append(f"generator {g.id} references unknown bus {g.bus_id}")
        if g.p_min > g.p_max or g.q_min > g.q_max:
            v.append(f"inverted limits on generator {g.id}")
        if g.p_max <= 0:
            v.append(f"non-positive capacity on generator {g.id}")

    # Partition: disjoint, non-empty, covers all breakers.
    seen: set[str] = set()
    for agent, ids in enumerate(feeder.partition.assignments):
        if not ids:
            v.append(f"empty breaker list for agent {agent}")
        for bid in ids:
            if bid not in breaker_ids:
                v.append(f"partition references unknown breaker {bid}")
            elif bid in seen:
                v.append(f"breaker {bid} assigned to more than one microgrid")
            seen.add(bid)
    for b in feeder.breakers:
        if b.id not in seen:
            v.append(f"uncovered breaker {b.id}")

    # Topology at full closure: acyclic (radial forest), every load bus
    # reachable from a generator.
    if not any(x.startswith(("line", "duplicate bus")) for x in v):
        index = {b.id: i for i, b in enumerate(feeder.buses)}
        parent = list(range(len(feeder.buses)))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        radial = True
        for ln in feeder.lines:
            a, b = find(index[ln.from_bus]), find(index[ln.to_bus])
            if a == b:
                radial = False
            parent[a] = b
        if not radial:
            v.append("non-radial topology")
        else:
            gen_roots = {find(index[g.bus_id]) for g in feeder.generators}
            for ld in feeder.loads:
                if ld.bus_id in index and find(index[ld.bus_id]) not in gen_roots:
                    v.append(f"load {ld.id} unreachable from any generator")

    return v


# -- document format -----------------------------------------------------------
#
# A feeder document is a JSON object (textual, diff-able) with format_version 1,
# top-level arrays buses/lines/breakers/loads/generators and a partition object
# mapping agent ids "0".."m-1" to ordered breaker-id lists. Units are kW, kvar
# and per-unit impedances on the declared (s_base_kva, v_base_kv) base.


def _require(record: dict, key: str, where: str):
    if key not in record:
        raise FeederParseError(f"missing '{key}' in {where}")
    return record[key]


def load_feeder(source) -> Feeder:
    """Parse and validate a feeder document.

    ``source`` may be bytes, a JSON string, or a readable binary/text stream.
    Raises :class:`FeederParseError` for malformed documents,
    :class:`FeederReferenceError` for dangling ids, and
    :class:`FeederValidationError` for other invariant violations.
    """
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, (bytes, bytearray)):
        source = source.decode("utf-8")
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as e:
        raise FeederParseError(f"not valid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise FeederParseError("top level of a feeder document must be an object")
    version = _require(doc, "format_version", "document")
    if version != FORMAT_VERSION:
        raise FeederParseError(f"unsupported format_version {version}")

    try:
        buses = tuple(
            Bus(
                id=str(_require(r, "id", "bus")),
                v_min=float(r.get("v_min", DEFAULT_V_MIN)),
                v_max=float(r.get("v_max", DEFAULT_V_MAX)),
            )
            for r in doc.get("buses", [])
        )
        lines = tuple(
            Line(
                id=str(_require(r, "id", "line")),
                from_bus=str(_require(r, "from_bus", "line")),
                to_bus=str(_require(r, "to_bus", "line")),
                resistance=float(_require(r, "resistance", "line")),
                reactance=float(_require(r, "reactance", "line")),
                s_rating=float(_require(r, "s_rating", "line")),
            )
            for r in doc.get("lines", [])
        )
        breakers = tuple(
            Breaker(
                id=str(_require(r, "id", "breaker")),
                line_id=str(_require(r, "line_id", "breaker")),
                state=int(r.get("state", 0)),
            )
            for r in doc.get("breakers", [])
        )
        loads = tuple(
            LoadPoint(
                id=str(_require(r, "id", "load")),
                bus_id=str(_require(r, "bus_id", "load")),
                p_rated=float(_require(r, "p_rated", "load")),
                q_rated=float(r.get("q_rated", 0.0)),
                weight=float(r.get("weight", 1.0)),
                breaker_id=str(r.get("breaker_id", "")),
            )
            for r in doc.get("loads", [])
        )
        generators = tuple(
            Generator(
                id=str(_require(r, "id", "generator")),
                bus_id=str(_require(r, "bus_id", "generator")),
                p_min=float(r.get("p_min", 0.0)),
                p_max=float(_require(r, "p_max", "generator")),
                q_min=float(r.get("q_min", 0.0)),
                q_max=float(r.get("q_max", 0.0)),
            )
            for r in doc.get("generators", [])
        )
    except (TypeError, ValueError) as e:
        if isinstance(e, FeederError):
            raise
        raise FeederParseError(f"bad field value: {e}") from None

    part_doc = doc.get("partition", {})
    if not isinstance(part_doc, dict):
        raise FeederParseError("partition must be an object")
    try:
        keys = sorted(int(k) for k in part_doc)
    except ValueError:
        raise FeederParseError("partition keys must be agent integers") from None
    if keys != list(range(len(keys))):
        raise FeederParseError("partition keys must be contiguous agent ids 0..m-1")
    partition = MicrogridPartition(
        assignments=tuple(tuple(str(b) for b in part_doc[str(k)]) for k in keys)
    )

    feeder = Feeder(
        name=str(doc.get("name", "")),
        s_base_kva=float(doc.get("s_base_kva", 1000.0)),
        v_base_kv=float(doc.get("v_base_kv", 1.0)),
        buses=buses,
        lines=lines,
        breakers=breakers,
        loads=loads,
        generators=generators,
        partition=partition,
    )
    violations = validate_feeder(feeder)
    if violations:
        if any("unknown" in x for x in violations):
            raise FeederReferenceError("; ".join(x for x in violations if "unknown" in x))
        raise FeederValidationError(violations)
    return feeder


def serialize_feeder(feeder: Feeder) -> str:
    """Render a feeder back to its document form (round-trips exactly)."""
    doc = {
        "format_version": FORMAT_VERSION,
        "name": feeder.name,
        "s_base_kva": feeder.s_base_kva,
        "v_base_kv": feeder.v_base_kv,
        "buses": [
            {"id": b.id, "v_min": b.v_min, "v_max": b.v_max} for b in feeder.buses
        ],
        "lines": [
            {
                "id": ln.id,
                "from_bus": ln.from_bus,
                "to_bus": ln.to_bus,
                "resistance": ln.resistance,
                "reactance": ln.reactance,
                "s_rating": ln.s_rating,
            }
            for ln in feeder.lines
        ],
        "breakers": [
            {"id": b.id, "line_id": b.line_id, "state": b.state}
            for b in feeder.breakers
        ],
        "loads": [
            {
                "id": ld.id,
                "bus_id": ld.bus_id,
                "p_rated": ld.p_rated,
                "q_rated": ld.q_rated,
                "weight": ld.weight,
                "breaker_id": ld.breaker_id,
            }
            for ld in feeder.loads
        ],
        "generators": [
            {
                "id": g.id,
                "bus_id": g.bus_id,
                "p_min": g.p_min,
                "p_max": g.p_max,
                "q_min": g.q_min,
                "q_max": g.q_max,
            }
            for g in feeder.generators
        ],
        "partition": {
            str(k): list(ids) for k, ids in enumerate(feeder.partition.assignments)
        },
    }
    return json.dumps(doc, indent=2)


def feeder_hash(feeder: Feeder) -> str:
    """Stable content hash of a feeder (used by oracle result caches)."""
    return hashlib.sha256(serialize_feeder(feeder).encode("utf-8")).hexdigest()
