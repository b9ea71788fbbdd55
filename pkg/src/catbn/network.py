"""Discrete Bayesian network representation and validation.

A network is a DAG of discrete variables, each carrying a conditional
probability table (CPT) given its parents.  Variables play one of four
roles in an adaptive test:

* ``skill``      -- latent ability variable, the estimation target
* ``question``   -- observed answer variable (boolean or points scale)
* ``info``       -- covariate known before any question is asked
* ``scoregroup`` -- total-score group standing in for a skill; observed
  while learning, hidden while testing

State indices are 0-based everywhere inside the package.  External
formats (the network JSON document, the HTTP wire) use 1-based state
indices; CSV question cells are raw point counts, which for a
points-scale question coincide with the 0-based state (a question worth
up to ``p`` points has ``p + 1`` states coding 0..p points).
"""

from __future__ import annotations

import graphlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

ROLE_SKILL = "skill"
ROLE_QUESTION = "question"
ROLE_INFO = "info"
ROLE_SCOREGROUP = "scoregroup"
ROLES = (ROLE_SKILL, ROLE_QUESTION, ROLE_INFO, ROLE_SCOREGROUP)

#: roles whose posterior the adaptive test estimates and whose entropy
#: drives question selection
ESTIMATE_ROLES = (ROLE_SKILL, ROLE_SCOREGROUP)

SCALE_BOOLEAN = "boolean"
SCALE_POINTS = "points"
SCALES = (SCALE_BOOLEAN, SCALE_POINTS)

ROW_SUM_TOL = 1e-9

#: map from variable id to observed 0-based state index
Evidence = Mapping[str, int]


class NetworkError(ValueError):
    """Structural problem with a network, CPT, or evidence assignment."""


@dataclass(frozen=True)
class Variable:
    """One discrete variable of the network."""

    id: str
    cardinality: int
    role: str
    name: str = ""
    state_labels: tuple[str, ...] = ()
    scale: str | None = None

    def __post_init__(self):
        if self.cardinality < 2:
            raise NetworkError(f"variable {self.id!r}: cardinality must be >= 2")
        if self.role not in ROLES:
            raise NetworkError(f"variable {self.id!r}: unknown role {self.role!r}")
        if not self.name:
            object.__setattr__(self, "name", self.id)
        if not self.state_labels:
            object.__setattr__(
                self, "state_labels", tuple(str(i + 1) for i in range(self.cardinality))
            )
        if len(self.state_labels) != self.cardinality:
            raise NetworkError(
                f"variable {self.id!r}: {len(self.state_labels)} state labels "
                f"for cardinality {self.cardinality}"
            )
        if len(set(self.state_labels)) != self.cardinality:
            raise NetworkError(f"variable {self.id!r}: state labels not unique")
        if self.role == ROLE_QUESTION:
            if self.scale not in SCALES:
                raise NetworkError(
                    f"question {self.id!r} needs a grading scale ({SCALES})"
                )
            if self.scale == SCALE_BOOLEAN and self.cardinality != 2:
                raise NetworkError(f"boolean question {self.id!r} must have 2 states")
        elif self.scale is not None:
            raise NetworkError(f"variable {self.id!r}: scale only applies to questions")


@dataclass(frozen=True, eq=False)
class Cpt:
    """P(child | parents) as a row-normalized table.

    ``table`` has shape (prod of parent cardinalities, child cardinality);
    rows are parent-state combinations in lexicographic order of the
    parent list (first parent most significant).
    """

    child: str
    parents: tuple[str, ...]
    table: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        t = np.asarray(self.table, dtype=float)
        if t.ndim != 2:
            raise NetworkError(f"cpt {self.child!r}: table must be 2-D")
        t = t.copy()
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    def __eq__(self, other):
        if not isinstance(other, Cpt):
            return NotImplemented
        return (
            self.child == other.child
            and self.parents == other.parents
            and self.table.shape == other.table.shape
            and bool(np.array_equal(self.table, other.table))
        )

    def __hash__(self):
        return hash((self.child, self.parents))


@dataclass(frozen=True, eq=False)
class Distribution:
    """A normalized probability vector over one variable's states."""

    variable: str
    probabilities: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, Distribution):
            return NotImplemented
        return self.variable == other.variable and bool(
            np.array_equal(self.probabilities, other.probabilities)
        )

    def __hash__(self):
        return hash(self.variable)

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if p.ndim != 1:
            raise NetworkError(f"distribution over {self.variable!r} must be 1-D")
        if np.any(p < -ROW_SUM_TOL):
            raise NetworkError(f"distribution over {self.variable!r} has negative mass")
        if abs(float(p.sum()) - 1.0) > ROW_SUM_TOL:
            raise NetworkError(
                f"distribution over {self.variable!r} sums to {p.sum()!r}, not 1"
            )
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "probabilities", p)

    @property
    def argmax(self) -> int:
        """Most probable state; ties resolve to the lowest index."""
        return int(np.argmax(self.probabilities))

    def entropy(self) -> float:
        """Shannon entropy in nats, with 0*ln(0) = 0."""
        p = self.probabilities[self.probabilities > 0.0]
        return float(-(p * np.log(p)).sum())


@dataclass(frozen=True)
class Violation:
    kind: str  # cycle | missing-cpt | duplicate-cpt | dangling-parent | shape | row-sum | range
    where: str
    detail: str

    def __str__(self) -> str:
        return f"[{self.kind}] {self.where}: {self.detail}"


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def raise_if_invalid(self) -> None:
        if not self.ok:
            msgs = "; ".join(str(v) for v in self.violations)
            raise NetworkError(f"invalid network: {msgs}")


@dataclass(frozen=True)
class Network:
    """Immutable DAG of variables plus one CPT per variable.

    Safe to share across threads once built; inference never mutates it.
    """

    variables: tuple[Variable, ...]
    cpts: tuple[Cpt, ...]
    _by_id: dict = field(init=False, repr=False, compare=False)
    _cpt_by_child: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "cpts", tuple(self.cpts))
        by_id = {v.id: v for v in self.variables}
        if len(by_id) != len(self.variables):
            raise NetworkError("duplicate variable ids")
        object.__setattr__(self, "_by_id", by_id)
        object.__setattr__(self, "_cpt_by_child", {c.child: c for c in self.cpts})

    # -- lookups ----------------------------------------------------------

    def var(self, var_id: str) -> Variable:
        try:
            return self._by_id[var_id]
        except KeyError:
            raise NetworkError(f"unknown variable {var_id!r}") from None

    def __contains__(self, var_id: str) -> bool:
        return var_id in self._by_id

    def cardinality(self, var_id: str) -> int:
        return self.var(var_id).cardinality

    def cpt(self, var_id: str) -> Cpt:
        self.var(var_id)
        return self._cpt_by_child[var_id]

    def parents(self, var_id: str) -> tuple[str, ...]:
        return self.cpt(var_id).parents

    def children(self, var_id: str) -> tuple[str, ...]:
        return tuple(c.child for c in self.cpts if var_id in c.parents)

    def ids_with_role(self, *roles: str) -> tuple[str, ...]:
        return tuple(v.id for v in self.variables if v.role in roles)

    @property
    def skill_ids(self) -> tuple[str, ...]:
        """Estimation targets: skill and scoregroup variables."""
        return self.ids_with_role(*ESTIMATE_ROLES)

    @property
    def question_ids(self) -> tuple[str, ...]:
        return self.ids_with_role(ROLE_QUESTION)

    @property
    def info_ids(self) -> tuple[str, ...]:
        return self.ids_with_role(ROLE_INFO)

    def topological_order(self) -> tuple[str, ...]:
        sorter = graphlib.TopologicalSorter(
            {c.child: list(c.parents) for c in self.cpts}
        )
        return tuple(sorter.static_order())

    def replace_cpts(self, tables: Mapping[str, np.ndarray]) -> "Network":
        """New network with the given CPT tables swapped in."""
        new = tuple(
            Cpt(c.child, c.parents, tables[c.child]) if c.child in tables else c
            for c in self.cpts
        )
        return Network(self.variables, new)


def check_evidence(net: Network, evidence: Evidence) -> None:
    """Raise NetworkError unless every assignment targets a known variable
    with an in-range 0-based state index."""
    for var_id, state in evidence.items():
        card = net.cardinality(var_id)
        if not (0 <= int(state) < card):
            raise NetworkError(
                f"evidence {var_id}={state}: state out of range 0..{card - 1}"
            )


def validate_network(net: Network) -> ValidationResult:
    """Check DAG-ness, CPT shapes, row normalization, and parent references.

    Returns every violation found rather than stopping at the first one.
    """
    out: list[Violation] = []
    ids = {v.id for v in net.variables}

    seen_children: set[str] = set()
    for c in net.cpts:
        if c.child not in ids:
            out.append(Violation("dangling-parent", c.child, "cpt for unknown variable"))
            continue
        if c.child in seen_children:
            out.append(Violation("duplicate-cpt", c.child, "more than one cpt"))
        seen_children.add(c.child)
        if len(set(c.parents)) != len(c.parents):
            out.append(Violation("shape", c.child, "repeated parent"))
        for p in c.parents:
            if p not in ids:
                out.append(Violation("dangling-parent", c.child, f"unknown parent {p!r}"))
    for v in net.variables:
        if v.id not in seen_children:
            out.append(Violation("missing-cpt", v.id, "no cpt"))

    # cycle check over well-formed edges only
    graph = {
        c.child: [p for p in c.parents if p in ids]
        for c in net.cpts
        if c.child in ids
    }
    try:
        list(graphlib.TopologicalSorter(graph).static_order())
    except graphlib.CycleError as err:
        cycle = err.args[1]
        out.append(
            Violation("cycle", ",".join(sorted(set(cycle))), f"cycle {' -> '.join(cycle)}")
        )

    for c in net.cpts:
        if c.child not in ids or any(p not in ids for p in c.parents):
            continue
        n_rows = 1
        for p in c.parents:
            n_rows *= net.cardinality(p)
        want = (n_rows, net.cardinality(c.child))
        if c.table.shape != want:
            out.append(
                Violation("shape", c.child, f"table shape {c.table.shape}, expected {want}")
            )
            continue
        if np.any(c.table < 0.0) or np.any(c.table > 1.0):
            out.append(Violation("range", c.child, "entries outside [0, 1]"))
        sums = c.table.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)
        for row in bad:
            out.append(
                Violation(
                    "row-sum",
                    c.child,
                    f"row {int(row)} sums to {sums[row]:.12g} (off by {sums[row] - 1.0:+.12g})",
                )
            )

    return ValidationResult(tuple(out))


# -- JSON serialization ----------------------------------------------------
#
# Document layout (states are 1-based in labels only; rows are row-major
# with parent-state combinations in lexicographic order of the parent
# list, exactly as stored internally):
#
# {"variables": [{"id", "name", "cardinality", "role", "states": [...],
#                 "scale"?}],
#  "cpts": [{"child", "parents": [...], "rows": [[...], ...]}]}


def network_to_json(net: Network) -> dict:
    doc_vars = []
    for v in net.variables:
        entry = {
            "id": v.id,
            "name": v.name,
            "cardinality": v.cardinality,
            "role": v.role,
            "states": list(v.state_labels),
        }
        if v.scale is not None:
            entry["scale"] = v.scale
        doc_vars.append(entry)
    doc_cpts = [
        {"child": c.child, "parents": list(c.parents), "rows": c.table.tolist()}
        for c in net.cpts
    ]
    return {"variables": doc_vars, "cpts": doc_cpts}


def network_from_json(doc: Mapping) -> Network:
    try:
        variables = tuple(
            Variable(
                id=v["id"],
                cardinality=int(v["cardinality"]),
                role=v["role"],
                name=v.get("name", ""),
                state_labels=tuple(v.get("states", ())),
                scale=v.get("scale"),
            )
            for v in doc["variables"]
        )
        cpts = tuple(
            Cpt(c["child"], tuple(c["parents"]), np.asarray(c["rows"], dtype=float))
            for c in doc["cpts"]
        )
    except (KeyError, TypeError) as err:
        raise NetworkError(f"malformed network document: {err}") from err
    net = Network(variables, cpts)
    validate_network(net).raise_if_invalid()
    return net


def save_network(net: Network, path: str | Path) -> None:
    Path(path).write_text(json.dumps(network_to_json(net), indent=2) + "\n")


def load_network(path: str | Path) -> Network:
    return network_from_json(json.loads(Path(path).read_text()))
