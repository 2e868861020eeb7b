"""Scenario files: YAML documents validated against a JSON schema.

Node and line ids in files are 1-based; everything in memory is 0-based.
A bus without a load writes ``load_resistance: null``.
"""
import math

import jsonschema
import numpy as np
import yaml

from .errors import DanglingReference, NonpositiveParameter, ScenarioSchemaError
from .model import EVENT_KINDS, MODES, Event, MicrogridModel, ScenarioSpec
from .plant import DGRatings, ElectricalNetwork
from .topology import CommGraph, NodePartition

SCHEMA_VERSION = 1

_num = {"type": "number"}
_id = {"type": "integer"}

SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["schema_version", "network", "graph", "controller", "run"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "metadata": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"name": {"type": "string"}, "description": {"type": "string"}},
        },
        "network": {
            "type": "object",
            "required": ["rated_voltage", "buses", "lines"],
            "additionalProperties": False,
            "properties": {
                "rated_voltage": _num,
                "buses": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "required": ["id", "current_capacity", "filter_inductance", "filter_capacitance"],
                        "additionalProperties": False,
                        "properties": {
                            "id": _id,
                            "current_capacity": _num,
                            "filter_inductance": _num,
                            "filter_capacitance": _num,
                            "load_resistance": {"type": ["number", "null"]},
                            "load_conductance": _num,
                            "droop": _num,
                        },
                        "not": {"required": ["load_resistance", "load_conductance"]},
                    },
                },
                "lines": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["from", "to", "resistance", "inductance"],
                        "additionalProperties": False,
                        "properties": {"id": _id, "from": _id, "to": _id, "resistance": _num, "inductance": _num},
                    },
                },
            },
        },
        "graph": {
            "type": "object",
            "required": ["edges"],
            "additionalProperties": False,
            "properties": {
                "edges": {
                    "type": "array",
                    "items": {"type": "array", "minItems": 3, "maxItems": 3, "items": [_id, _id, _num]},
                },
                "critical": {"type": "array", "items": _id},
            },
        },
        "controller": {
            "type": "object",
            "required": ["mode", "theta", "omega"],
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": list(MODES)},
                "theta": _num,
                "omega": _num,
                "droop": {
                    "type": "object",
                    "required": ["policy"],
                    "additionalProperties": False,
                    "properties": {"policy": {"enum": ["rating_inverse", "explicit"]}, "ratio": _num},
                },
            },
        },
        "timeline": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["t", "event"],
                "additionalProperties": False,
                "properties": {
                    "t": _num,
                    "event": {"enum": list(EVENT_KINDS)},
                    "node": _id,
                    "value": _num,
                    "resistance": {"type": ["number", "null"]},
                    "relay": {"type": "boolean"},
                },
            },
        },
        "run": {
            "type": "object",
            "required": ["duration"],
            "additionalProperties": False,
            "properties": {
                "duration": _num,
                "dt": _num,
                "sample_interval": _num,
                "startup": _num,
                "settle_window": _num,
                "settle_tol": _num,
            },
        },
        "analysis": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"gamma_v": _num},
        },
    },
}


def _line_of(node, path):
    """Walk a composed YAML node along ``path``; return a 1-based line number."""
    for key in path:
        if isinstance(node, yaml.MappingNode):
            nxt = None
            for k, v in node.value:
                if k.value == key:
                    nxt = v
                    break
            if nxt is None:
                break
            node = nxt
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
        else:
            break
    return node.start_mark.line + 1


def load_document(text):
    """Parse YAML text and validate it against the schema; returns plain data."""
    try:
        doc = yaml.safe_load(text)
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ScenarioSchemaError(f"not valid YAML: {exc}", line=mark.line + 1 if mark else None) from None
    if not isinstance(doc, dict):
        raise ScenarioSchemaError("top level must be a mapping", line=1)
    errors = sorted(jsonschema.Draft7Validator(SCHEMA).iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = list(err.absolute_path)
        raise ScenarioSchemaError(err.message, path=path, line=_line_of(root, path))
    return doc


def _index(ids, what):
    """Map 1-based ids to positions; ids must be exactly 1..n."""
    if sorted(ids) != list(range(1, len(ids) + 1)):
        raise DanglingReference(f"{what} ids must be 1..{len(ids)} without gaps, got {sorted(ids)}")
    return {i: i - 1 for i in ids}


def _node(n, ident, where):
    if not 1 <= ident <= n:
        raise DanglingReference(f"{where} references node {ident} but only 1..{n} exist")
    return ident - 1


def build(doc):
    """Turn a validated document into a ScenarioSpec."""
    net_doc = doc["network"]
    buses = sorted(net_doc["buses"], key=lambda b: b["id"])
    _index([b["id"] for b in buses], "bus")
    n = len(buses)

    def conductance(b):
        if "load_conductance" in b:
            return b["load_conductance"]
        r = b.get("load_resistance")
        if r is None:
            return 0.0
        if r <= 0:
            raise NonpositiveParameter(f"bus {b['id']}: load_resistance must be positive (null for no load)")
        return 1.0 / r

    lines = []
    for k, ln in enumerate(net_doc["lines"]):
        where = f"line {ln.get('id', k + 1)}"
        lines.append((_node(n, ln["from"], where), _node(n, ln["to"], where), ln["resistance"], ln["inductance"]))
    net = ElectricalNetwork.from_lines(
        n,
        lines,
        [conductance(b) for b in buses],
        [b["filter_inductance"] for b in buses],
        [b["filter_capacitance"] for b in buses],
    )

    ctrl = doc["controller"]
    droop = dict(ctrl.get("droop", {"policy": "rating_inverse", "ratio": 0.05}))
    cap = [b["current_capacity"] for b in buses]
    v_rat = net_doc["rated_voltage"]
    if droop["policy"] == "explicit":
        missing = [b["id"] for b in buses if "droop" not in b]
        if missing:
            raise ScenarioSchemaError(f"explicit droop needs a value on buses {missing}", path=["network", "buses"])
        ratings = DGRatings(cap, [b["droop"] for b in buses], v_rat)
    else:
        droop.setdefault("ratio", 0.05)
        ratings = DGRatings.rating_inverse(cap, v_rat, droop["ratio"])

    g = doc["graph"]
    edges = [(_node(n, i, "graph edge"), _node(n, j, "graph edge"), w) for i, j, w in g["edges"]]
    graph = CommGraph.from_edges(n, edges)
    critical = g.get("critical")
    if critical is None:
        critical = list(range(1, n + 1))
    part = NodePartition(n, tuple(_node(n, c, "critical set") for c in critical))
    model = MicrogridModel(net, ratings, graph, part)

    timeline = []
    for item in doc.get("timeline", []):
        kind = item["event"]
        node = _node(n, item["node"], f"{kind} event") if "node" in item else None
        value = item.get("value")
        if kind == "set_load":
            r = item.get("resistance", value)
            value = math.inf if r is None else r
        timeline.append((float(item["t"]), Event(kind, node, value, item.get("relay", True))))

    run = doc["run"]
    meta = doc.get("metadata", {})
    return ScenarioSpec(
        model=model,
        mode=ctrl["mode"],
        theta=float(ctrl["theta"]),
        omega=float(ctrl["omega"]),
        timeline=tuple(timeline),
        duration=float(run["duration"]),
        dt=float(run.get("dt", 1e-6)),
        sample_interval=float(run.get("sample_interval", 1e-3)),
        startup=float(run.get("startup", 0.0)),
        name=meta.get("name", ""),
        description=meta.get("description", ""),
        gamma_v=doc.get("analysis", {}).get("gamma_v"),
        settle_window=float(run.get("settle_window", 0.2)),
        settle_tol=float(run.get("settle_tol", 1e-6)),
        droop=droop,
    )


def parse_scenario(path):
    with open(path, encoding="utf-8") as fh:
        return build(load_document(fh.read()))


def parse_text(text):
    return build(load_document(text))


# -- writing --------------------------------------------------------------------


def _load_entry(g):
    if g == 0:
        return {"load_resistance": None}
    r = 1.0 / g
    if 1.0 / r == g:
        return {"load_resistance": r}
    return {"load_conductance": float(g)}


def to_document(spec):
    m = spec.model
    net, rat = m.net, m.ratings
    buses = []
    for k in range(net.n_bus):
        b = {
            "id": k + 1,
            "current_capacity": float(rat.current_capacity[k]),
            "filter_inductance": float(net.filter_inductance[k]),
            "filter_capacitance": float(net.filter_capacitance[k]),
        }
        b.update(_load_entry(float(net.load_conductance[k])))
        if spec.droop.get("policy") == "explicit":
            b["droop"] = float(rat.droop_coefficient[k])
        buses.append(b)
    lines = []
    for k in range(net.n_line):
        col = net.incidence[:, k]
        lines.append(
            {
                "id": k + 1,
                "from": int(np.flatnonzero(col == 1)[0]) + 1,
                "to": int(np.flatnonzero(col == -1)[0]) + 1,
                "resistance": float(net.line_resistance[k]),
                "inductance": float(net.line_inductance[k]),
            }
        )
    w = m.graph.weights
    edges = [[i + 1, j + 1, float(w[i, j])] for i in range(m.n) for j in range(i + 1, m.n) if w[i, j] > 0]
    timeline = []
    for t, ev in spec.timeline:
        item = {"t": float(t), "event": ev.kind}
        if ev.node is not None:
            item["node"] = ev.node + 1
        if ev.kind == "set_load":
            item["resistance"] = None if math.isinf(ev.value) else float(ev.value)
        elif ev.value is not None:
            item["value"] = float(ev.value)
        if ev.kind == "unplug_dg":
            item["relay"] = bool(ev.relay)
        timeline.append(item)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "metadata": {"name": spec.name, "description": spec.description},
        "network": {"rated_voltage": rat.rated_voltage, "buses": buses, "lines": lines},
        "graph": {"edges": edges, "critical": [c + 1 for c in m.partition.critical]},
        "controller": {"mode": spec.mode, "theta": spec.theta, "omega": spec.omega, "droop": dict(spec.droop)},
        "timeline": timeline,
        "run": {
            "duration": spec.duration,
            "dt": spec.dt,
            "sample_interval": spec.sample_interval,
            "startup": spec.startup,
            "settle_window": spec.settle_window,
            "settle_tol": spec.settle_tol,
        },
    }
    if spec.gamma_v is not None:
        doc["analysis"] = {"gamma_v": float(spec.gamma_v)}
    return doc


def serialize(spec):
    return yaml.safe_dump(to_document(spec), sort_keys=False)


def specs_equal(a, b):
    """Structural equality of two specs, comparing arrays exactly."""

    def same(x, y):
        if isinstance(x, np.ndarray) or isinstance(y, np.ndarray):
            return np.array_equal(np.asarray(x), np.asarray(y))
        if hasattr(x, "__dataclass_fields__") and type(x) is type(y):
            return all(same(getattr(x, f), getattr(y, f)) for f in x.__dataclass_fields__)
        if isinstance(x, (tuple, list)) and isinstance(y, (tuple, list)):
            return len(x) == len(y) and all(same(p, q) for p, q in zip(x, y))
        return x == y

    return same(a, b)
