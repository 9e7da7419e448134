"""JSON documents for problems (terminals and forces) and webs."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import INTERNAL, TerminalConfig, Tolerances, Web

SCHEMA_VERSION = 1


class DocumentError(ValueError):
    """A document that cannot be parsed or violates the schema."""


def _check_keys(obj, required: set[str], optional: set[str], where: str) -> None:
    if not isinstance(obj, dict):
        raise DocumentError(f"{where}: expected an object")
    keys = set(obj)
    missing = required - keys
    if missing:
        raise DocumentError(f"{where}: missing field(s) {sorted(missing)}")
    unknown = keys - required - optional
    if unknown:
        raise DocumentError(f"{where}: unknown field(s) {sorted(unknown)}")


def _real(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise DocumentError(f"{where}: expected a number")
    v = float(v)
    if not math.isfinite(v):
        raise DocumentError(f"{where}: non-finite number")
    return v


def _vector(v, dim: int, where: str) -> tuple[float, ...]:
    if not isinstance(v, list) or len(v) != dim:
        raise DocumentError(f"{where}: expected a list of {dim} numbers")
    return tuple(_real(x, f"{where}[{k}]") for k, x in enumerate(v))


def _version(obj, where: str) -> None:
    v = obj.get("schema_version")
    if v != SCHEMA_VERSION or isinstance(v, bool):
        raise DocumentError(f"{where}: unsupported schema_version {v!r} (expected {SCHEMA_VERSION})")


def _dimension(obj, where: str) -> int:
    d = obj.get("dimension")
    if d not in (2, 3) or isinstance(d, bool):
        raise DocumentError(f"{where}: dimension must be 2 or 3")
    return d


@dataclass(frozen=True)
class ProblemDocument:
    dimension: int
    positions: tuple[tuple[float, ...], ...]
    forces: tuple[tuple[float, ...], ...]
    tolerances: dict[str, float] | None = None
    schema_version: int = SCHEMA_VERSION

    @classmethod
    def from_config(cls, cfg: TerminalConfig, tolerances: dict[str, float] | None = None) -> "ProblemDocument":
        return cls(cfg.dim, tuple(map(tuple, cfg.positions.tolist())), tuple(map(tuple, cfg.forces.tolist())),
                   tolerances)

    def config(self) -> TerminalConfig:
        return TerminalConfig(np.array(self.positions, dtype=float).reshape(-1, self.dimension),
                              np.array(self.forces, dtype=float).reshape(-1, self.dimension))

    def tol(self, base: Tolerances | None = None) -> Tolerances:
        base = base or Tolerances()
        if not self.tolerances:
            return base
        return Tolerances(**{**base.__dict__, **self.tolerances})

    def to_obj(self) -> dict:
        obj = {
            "schema_version": self.schema_version,
            "dimension": self.dimension,
            "terminals": [{"position": list(p), "force": list(f)} for p, f in zip(self.positions, self.forces)],
        }
        if self.tolerances is not None:
            obj["tolerances"] = dict(sorted(self.tolerances.items()))
        return obj

    @classmethod
    def from_obj(cls, obj) -> "ProblemDocument":
        _check_keys(obj, {"schema_version", "dimension", "terminals"}, {"tolerances"}, "problem")
        _version(obj, "problem")
        d = _dimension(obj, "problem")
        if not isinstance(obj["terminals"], list) or not obj["terminals"]:
            raise DocumentError("problem.terminals: expected a nonempty list")
        P, F = [], []
        for k, term in enumerate(obj["terminals"]):
            where = f"problem.terminals[{k}]"
            _check_keys(term, {"position", "force"}, set(), where)
            P.append(_vector(term["position"], d, where + ".position"))
            F.append(_vector(term["force"], d, where + ".force"))
        tols = None
        if "tolerances" in obj:
            t = obj["tolerances"]
            _check_keys(t, set(), {"tol_feas", "tol_eq", "tol_geom"}, "problem.tolerances")
            tols = {k: _real(v, f"problem.tolerances.{k}") for k, v in t.items()}
            try:
                Tolerances(**tols)
            except ValueError as exc:
                raise DocumentError(f"problem.tolerances: {exc}") from None
        doc = cls(d, tuple(P), tuple(F), tols)
        try:
            doc.config()
        except ValueError as exc:
            raise DocumentError(f"problem: {exc}") from None
        return doc


@dataclass(frozen=True)
class WebDocument:
    dimension: int
    positions: tuple[tuple[float, ...], ...]
    roles: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]
    tensions: tuple[float | None, ...] = field(default=())
    schema_version: int = SCHEMA_VERSION

    @classmethod
    def from_web(cls, web: Web, tensions=None) -> "WebDocument":
        t = (None,) * web.n_edges if tensions is None else tuple(float(x) for x in tensions)
        return cls(web.dim, tuple(map(tuple, web.nodes.tolist())), tuple(int(r) for r in web.roles),
                   tuple((int(a), int(b)) for a, b in web.edges), t)

    def web(self) -> Web:
        return Web(np.array(self.positions, dtype=float).reshape(-1, self.dimension), list(self.roles),
                   np.array(self.edges, dtype=int).reshape(-1, 2))

    def tension_array(self) -> np.ndarray | None:
        if any(t is None for t in self.tensions):
            return None
        return np.array(self.tensions, dtype=float)

    def to_obj(self) -> dict:
        nodes = [{"position": list(p), "role": "internal" if r == INTERNAL else f"terminal:{r}"}
                 for p, r in zip(self.positions, self.roles)]
        edges = []
        for (i, j), t in zip(self.edges, self.tensions):
            e = {"i": i, "j": j}
            if t is not None:
                e["tension"] = t
            edges.append(e)
        return {"schema_version": self.schema_version, "dimension": self.dimension, "nodes": nodes, "edges": edges}

    @classmethod
    def from_obj(cls, obj) -> "WebDocument":
        _check_keys(obj, {"schema_version", "dimension", "nodes", "edges"}, set(), "web")
        _version(obj, "web")
        d = _dimension(obj, "web")
        if not isinstance(obj["nodes"], list) or not isinstance(obj["edges"], list):
            raise DocumentError("web: nodes and edges must be lists")
        P, R = [], []
        for k, node in enumerate(obj["nodes"]):
            where = f"web.nodes[{k}]"
            _check_keys(node, {"position", "role"}, set(), where)
            P.append(_vector(node["position"], d, where + ".position"))
            R.append(_parse_role(node["role"], where + ".role"))
        E, T = [], []
        for k, e in enumerate(obj["edges"]):
            where = f"web.edges[{k}]"
            _check_keys(e, {"i", "j"}, {"tension"}, where)
            ij = []
            for name in ("i", "j"):
                v = e[name]
                if isinstance(v, bool) or not isinstance(v, int):
                    raise DocumentError(f"{where}.{name}: expected an integer")
                ij.append(v)
            E.append(tuple(ij))
            T.append(_real(e["tension"], where + ".tension") if "tension" in e else None)
        doc = cls(d, tuple(P), tuple(R), tuple(E), tuple(T))
        try:
            doc.web()
        except ValueError as exc:
            raise DocumentError(f"web: {exc}") from None
        return doc


def _parse_role(role, where: str) -> int:
    if role == "internal":
        return INTERNAL
    if isinstance(role, str) and role.startswith("terminal:"):
        tail = role[len("terminal:"):]
        if tail.isdigit():
            return int(tail)
    raise DocumentError(f"{where}: expected 'internal' or 'terminal:<k>'")


def dumps(doc: ProblemDocument | WebDocument) -> str:
    """Serialize with shortest round-tripping float text, so parsing returns identical bits."""
    return json.dumps(doc.to_obj(), indent=2, allow_nan=False) + "\n"


def _load_json(text: str, source: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{source}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def loads_problem(text: str, source: str = "<string>") -> ProblemDocument:
    return ProblemDocument.from_obj(_load_json(text, source))


def loads_web(text: str, source: str = "<string>") -> WebDocument:
    return WebDocument.from_obj(_load_json(text, source))


def read_problem(path: str) -> ProblemDocument:
    with open(path, encoding="utf-8") as fh:
        return loads_problem(fh.read(), path)


def read_web(path: str) -> WebDocument:
    with open(path, encoding="utf-8") as fh:
        return loads_web(fh.read(), path)
