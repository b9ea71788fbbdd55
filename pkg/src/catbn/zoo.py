"""The fourteen candidate student-model structures over a test blueprint.

All structures share the same skeleton: skill node(s) with arcs to every
question they explain.  Variants differ in question scale (boolean vs
points), skill state count (2 or 3), whether covariate ("info") nodes
hang off the skill, whether the skill is replaced by an observed
total-score group, and whether seven expert-assigned skills are used
instead of one.

Info variables are modeled as children of the skill node.  They are
always observed at session start, so only the conditional P(info|skill)
matters for inference, and the child direction keeps every CPT at
skill-cardinality rows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .network import (
    ROLE_INFO,
    ROLE_QUESTION,
    ROLE_SCOREGROUP,
    ROLE_SKILL,
    SCALE_BOOLEAN,
    SCALE_POINTS,
    Cpt,
    Network,
    Variable,
)

SCORE_GROUP_LABELS = ("bad", "average", "good")


class BlueprintError(ValueError):
    """Inconsistent test blueprint or model spec."""


@dataclass(frozen=True)
class QuestionDef:
    id: str
    max_points: int = 1
    problem: str | None = None  # grouping for multi-part problems
    text: str | None = None

    def __post_init__(self):
        if self.max_points < 1:
            raise BlueprintError(f"question {self.id!r}: max_points must be >= 1")


@dataclass(frozen=True)
class InfoDef:
    id: str
    cardinality: int
    labels: tuple[str, ...] | None = None
    text: str | None = None

    def __post_init__(self):
        if self.cardinality < 2:
            raise BlueprintError(f"info var {self.id!r}: cardinality must be >= 2")
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
            if len(self.labels) != self.cardinality:
                raise BlueprintError(f"info var {self.id!r}: label count mismatch")


@dataclass(frozen=True)
class TestBlueprint:
    """Declarative recipe for one concrete test."""

    __test__ = False  # not a pytest class, despite the name

    questions: tuple[QuestionDef, ...]
    info_vars: tuple[InfoDef, ...] = ()
    expert_map: Mapping[str, tuple[str, ...]] | None = None
    total_points: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "questions", tuple(self.questions))
        object.__setattr__(self, "info_vars", tuple(self.info_vars))
        qids = [q.id for q in self.questions]
        if not qids:
            raise BlueprintError("blueprint needs at least one question")
        if len(set(qids)) != len(qids):
            raise BlueprintError("duplicate question ids")
        iids = [i.id for i in self.info_vars]
        if len(set(iids)) != len(iids) or set(iids) & set(qids):
            raise BlueprintError("info var ids must be unique and distinct from questions")
        if self.total_points is not None:
            actual = sum(q.max_points for q in self.questions)
            if actual != self.total_points:
                raise BlueprintError(
                    f"question points sum to {actual}, blueprint declares {self.total_points}"
                )
        if self.expert_map is not None:
            cleaned = {s: tuple(qs) for s, qs in self.expert_map.items()}
            object.__setattr__(self, "expert_map", cleaned)
            covered: set[str] = set()
            for skill, qs in cleaned.items():
                if not qs:
                    raise BlueprintError(f"expert skill {skill!r} maps to no questions")
                unknown = set(qs) - set(qids)
                if unknown:
                    raise BlueprintError(f"expert skill {skill!r} maps to unknown {sorted(unknown)}")
                covered.update(qs)
            missing = set(qids) - covered
            if missing:
                raise BlueprintError(f"expert map leaves questions uncovered: {sorted(missing)}")

    @property
    def question_ids(self) -> tuple[str, ...]:
        return tuple(q.id for q in self.questions)

    @property
    def info_ids(self) -> tuple[str, ...]:
        return tuple(i.id for i in self.info_vars)

    def question(self, qid: str) -> QuestionDef:
        for q in self.questions:
            if q.id == qid:
                return q
        raise BlueprintError(f"unknown question {qid!r}")

    def max_total(self) -> int:
        return sum(q.max_points for q in self.questions)


def expert_arity_notes(bp: TestBlueprint) -> list[str]:
    """Guideline check: each expert skill should span 1-4 problems.

    Full coverage of a 29-problem test by 7 skills necessarily breaks the
    bound, so this is advisory, not an error; the CLI surfaces it.
    """
    if bp.expert_map is None:
        return []
    by_q = {q.id: q for q in bp.questions}
    notes = []
    for skill in sorted(bp.expert_map):
        groups = {by_q[q].problem or q for q in bp.expert_map[skill]}
        if len(groups) > 4:
            notes.append(f"expert skill {skill!r} spans {len(groups)} problems (guideline: 1-4)")
    return notes


@dataclass(frozen=True)
class ModelSpec:
    """One row of the model catalogue; ids like b2, n3o+, b2e."""

    id: str
    name: str
    skill_count: int
    skill_states: int
    scale: str
    additional_info: bool
    observed_score: bool

    def __post_init__(self):
        canonical = _SPEC_BY_ID.get(self.id)
        if canonical is not None and canonical != self:
            raise BlueprintError(
                f"spec fields for {self.id!r} do not match the canonical catalogue row"
            )


def _mk(id_, name, skills, states, scale, info, obs) -> ModelSpec:
    return ModelSpec(id_, name, skills, states, scale, info, obs)


_SPEC_BY_ID: dict[str, ModelSpec] = {}

_CATALOGUE = (
    _mk("b2", "tf_simple", 1, 2, SCALE_BOOLEAN, False, False),
    _mk("b2+", "tf_plus", 1, 2, SCALE_BOOLEAN, True, False),
    _mk("b3", "tf3s_simple", 1, 3, SCALE_BOOLEAN, False, False),
    _mk("b3+", "tf3s_plus", 1, 3, SCALE_BOOLEAN, True, False),
    _mk("b3o", "tf3s_obssimple", 1, 3, SCALE_BOOLEAN, False, True),
    _mk("b3o+", "tf3s_obsplus", 1, 3, SCALE_BOOLEAN, True, True),
    _mk("b2e", "tf_expert", 7, 2, SCALE_BOOLEAN, False, False),
    _mk("n2", "points_simple", 1, 2, SCALE_POINTS, False, False),
    _mk("n2+", "points_plus", 1, 2, SCALE_POINTS, True, False),
    _mk("n3", "points3s_simple", 1, 3, SCALE_POINTS, False, False),
    _mk("n3+", "points3s_plus", 1, 3, SCALE_POINTS, True, False),
    _mk("n3o", "points3s_obssimple", 1, 3, SCALE_POINTS, False, True),
    _mk("n3o+", "points3s_obsplus", 1, 3, SCALE_POINTS, True, True),
    _mk("n2e", "points_expert", 7, 2, SCALE_POINTS, False, False),
)
_SPEC_BY_ID.update({s.id: s for s in _CATALOGUE})


def enumerate_specs() -> list[ModelSpec]:
    """All fourteen canonical model specs, in catalogue order."""
    return list(_CATALOGUE)


def spec_by_id(spec_id: str) -> ModelSpec:
    try:
        return _SPEC_BY_ID[spec_id]
    except KeyError:
        known = ",".join(_SPEC_BY_ID)
        raise BlueprintError(f"unknown model id {spec_id!r} (known: {known})") from None


def _uniform(n_rows: int, card: int) -> np.ndarray:
    return np.full((n_rows, card), 1.0 / card)


def build_model(spec: ModelSpec, bp: TestBlueprint) -> Network:
    """Instantiate the spec's structure over the blueprint.

    CPTs come back uniform: a valid placeholder that the learning step
    replaces (EM draws its own random starting point).
    """
    if spec.skill_count > 1 and bp.expert_map is None:
        raise BlueprintError(f"spec {spec.id!r} needs an expert skill map in the blueprint")

    if spec.skill_count == 1:
        skill_ids = ("S1",)
        parents_of = {q.id: ("S1",) for q in bp.questions}
    else:
        skill_ids = tuple(sorted(bp.expert_map))
        if len(skill_ids) != spec.skill_count:
            raise BlueprintError(
                f"spec {spec.id!r} wants {spec.skill_count} skills, "
                f"expert map defines {len(skill_ids)}"
            )
        parents_of = {q.id: () for q in bp.questions}
        for skill in skill_ids:  # sorted, so question parents come out canonical
            for qid in bp.expert_map[skill]:
                parents_of[qid] = parents_of[qid] + (skill,)

    variables: list[Variable] = []
    cpts: list[Cpt] = []
    for sid in skill_ids:
        if spec.observed_score:
            variables.append(
                Variable(sid, 3, ROLE_SCOREGROUP, name="score group",
                         state_labels=SCORE_GROUP_LABELS)
            )
        else:
            variables.append(Variable(sid, spec.skill_states, ROLE_SKILL))
        cpts.append(Cpt(sid, (), _uniform(1, variables[-1].cardinality)))

    for q in bp.questions:
        if spec.scale == SCALE_BOOLEAN:
            card, labels = 2, ("0", "1")
        else:
            card = q.max_points + 1
            labels = tuple(str(p) for p in range(card))
        variables.append(
            Variable(q.id, card, ROLE_QUESTION, name=q.text or q.id,
                     state_labels=labels, scale=spec.scale)
        )
        parents = parents_of[q.id]
        n_rows = 1
        for p in parents:
            n_rows *= next(v for v in variables if v.id == p).cardinality
        cpts.append(Cpt(q.id, parents, _uniform(n_rows, card)))

    if spec.additional_info:
        skill_card = variables[0].cardinality
        for info in bp.info_vars:
            variables.append(
                Variable(info.id, info.cardinality, ROLE_INFO,
                         name=info.text or info.id,
                         state_labels=info.labels or ())
            )
            cpts.append(Cpt(info.id, (skill_ids[0],), _uniform(skill_card, info.cardinality)))

    return Network(tuple(variables), tuple(cpts))


# -- blueprint JSON ----------------------------------------------------------


def blueprint_to_json(bp: TestBlueprint) -> dict:
    doc: dict = {
        "questions": [
            {k: v for k, v in (("id", q.id), ("max_points", q.max_points),
                               ("problem", q.problem), ("text", q.text)) if v is not None}
            for q in bp.questions
        ],
        "info_vars": [
            {k: v for k, v in (("id", i.id), ("cardinality", i.cardinality),
                               ("labels", list(i.labels) if i.labels else None),
                               ("text", i.text)) if v is not None}
            for i in bp.info_vars
        ],
    }
    if bp.expert_map is not None:
        doc["expert_map"] = {s: list(qs) for s, qs in bp.expert_map.items()}
    if bp.total_points is not None:
        doc["total_points"] = bp.total_points
    return doc


def blueprint_from_json(doc: Mapping) -> TestBlueprint:
    try:
        questions = tuple(
            QuestionDef(q["id"], int(q.get("max_points", 1)), q.get("problem"), q.get("text"))
            for q in doc["questions"]
        )
        info_vars = tuple(
            InfoDef(i["id"], int(i["cardinality"]),
                    tuple(i["labels"]) if i.get("labels") else None, i.get("text"))
            for i in doc.get("info_vars", ())
        )
    except (KeyError, TypeError) as err:
        raise BlueprintError(f"malformed blueprint document: {err}") from err
    expert = doc.get("expert_map")
    return TestBlueprint(
        questions,
        info_vars,
        {s: tuple(qs) for s, qs in expert.items()} if expert else None,
        doc.get("total_points"),
    )


def load_blueprint(path: str | Path) -> TestBlueprint:
    return blueprint_from_json(json.loads(Path(path).read_text()))


def save_blueprint(bp: TestBlueprint, path: str | Path) -> None:
    Path(path).write_text(json.dumps(blueprint_to_json(bp), indent=2) + "\n")


def demo_blueprint() -> TestBlueprint:
    """The packaged demo blueprint (29 problems, 53 subquestions, 120 points)."""
    from importlib import resources

    with resources.files("catbn.assets").joinpath("demo_blueprint.json").open() as fh:
        return blueprint_from_json(json.load(fh))
