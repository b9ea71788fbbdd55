"""Adaptive test sessions: entropy bookkeeping and greedy question choice.

The selection objective is the sum of marginal Shannon entropies over
the estimation targets (skill or scoregroup variables), not the joint
entropy: summing marginals weights every target equally even when
targets are correlated.  Entropies are in nats; the argmax of
information gain does not depend on the log base, only traces and
thresholds do.

Selection is one-step greedy: pick the question whose expected
post-answer entropy is lowest.  Ties break to the smallest question id
so replays are deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .inference import Factor, joint_posterior, posterior_marginals
from .network import Distribution, Evidence, Network, check_evidence

#: largest target-joint size kept as one table; beyond this every query
#: falls back to per-target elimination
JOINT_CAP = 4096


class SessionError(ValueError):
    """Invalid step in an adaptive test (duplicate answer, bad state, ...)."""


@dataclass(frozen=True)
class TerminationRule:
    kind: str  # "max_questions" | "entropy_below" | "exhaust"
    max_questions: int | None = None
    threshold: float | None = None

    def __post_init__(self):
        if self.kind == "max_questions":
            if not self.max_questions or self.max_questions < 1:
                raise SessionError("max_questions rule needs k >= 1")
        elif self.kind == "entropy_below":
            if self.threshold is None or not self.threshold > 0:
                raise SessionError("entropy_below rule needs h > 0")
        elif self.kind != "exhaust":
            raise SessionError(f"unknown termination rule {self.kind!r}")

    @classmethod
    def after_questions(cls, k: int) -> "TerminationRule":
        return cls("max_questions", max_questions=k)

    @classmethod
    def entropy_below(cls, h: float) -> "TerminationRule":
        return cls("entropy_below", threshold=h)

    @classmethod
    def exhaust(cls) -> "TerminationRule":
        return cls("exhaust")

    def satisfied(self, step: int, current_entropy: float) -> bool:
        if self.kind == "max_questions":
            return step >= self.max_questions
        if self.kind == "entropy_below":
            return current_entropy < self.threshold
        return False


def _entropy_vec(p: np.ndarray) -> float:
    nz = p[p > 0.0]
    return float(-(nz * np.log(nz)).sum())


def _targets_of(net: Network, targets: Sequence[str] | None) -> tuple[str, ...]:
    return tuple(targets) if targets is not None else net.skill_ids


def _target_joint(net: Network, evidence: Evidence, targets: tuple[str, ...]) -> Factor | None:
    """Normalized joint over the targets, or None when it would be too big."""
    size = 1
    for t in targets:
        if t not in evidence:
            size *= net.cardinality(t)
    if size > JOINT_CAP:
        return None
    return joint_posterior(net, evidence, targets)


def _joint_marginals(joint: Factor, net: Network, evidence: Evidence,
                     targets: tuple[str, ...]) -> list[Distribution]:
    out = []
    for t in targets:
        if t in evidence:
            p = np.zeros(net.cardinality(t))
            p[evidence[t]] = 1.0
            out.append(Distribution(t, p))
        else:
            out.append(Distribution(t, joint.marginal(t)))
    return out


def entropy(net: Network, evidence: Evidence, targets: Sequence[str] | None = None) -> float:
    """Cumulative entropy: sum of marginal entropies of the targets given
    the evidence, with 0*ln(0) = 0."""
    tg = _targets_of(net, targets)
    if not tg:
        return 0.0
    joint = _target_joint(net, evidence, tg)
    if joint is not None:
        dists = _joint_marginals(joint, net, evidence, tg)
    else:
        dists = posterior_marginals(net, evidence, tg)
    return float(sum(d.entropy() for d in dists))


def _fast_eligible(net: Network, question: str, joint_axes: Sequence[str]) -> bool:
    """Leaf question whose parents are all axes of the target joint: its
    outcomes factor directly against the joint, no extra elimination."""
    return not net.children(question) and set(net.parents(question)) <= set(joint_axes)


def _outcome_table(net: Network, joint: Factor, question: str) -> np.ndarray:
    """P(targets, question | e) laid out as (*joint axes, question states)."""
    cpt = net.cpt(question)
    fvars = cpt.parents + (cpt.child,)
    nd = cpt.table.reshape([net.cardinality(v) for v in fvars])
    # align parent axes with the joint's axes, question axis last
    shape = [1] * len(joint.vars) + [net.cardinality(question)]
    perm = sorted(range(len(cpt.parents)), key=lambda i: joint.vars.index(cpt.parents[i]))
    nd = np.transpose(nd, perm + [len(cpt.parents)])
    for i in perm:
        shape[joint.vars.index(cpt.parents[i])] = net.cardinality(cpt.parents[i])
    return joint.table[..., None] * nd.reshape(shape)


def _expected_entropy_from_joint(net: Network, joint: Factor, question: str) -> float:
    """Fast path: expected entropy computed straight off the target joint."""
    w = _outcome_table(net, joint, question)
    axes = tuple(range(len(joint.vars)))
    p_x = w.sum(axis=axes) if axes else w
    acc = 0.0
    for x, p in enumerate(np.atleast_1d(p_x)):
        if p <= 0.0:
            continue
        post = w[..., x] / p
        h = 0.0
        for t in joint.vars:
            other = tuple(i for i, v in enumerate(joint.vars) if v != t)
            h += _entropy_vec(post.sum(axis=other) if other else post)
        acc += p * h
    return float(acc)


def expected_entropy(
    net: Network, evidence: Evidence, question: str,
    targets: Sequence[str] | None = None,
) -> float:
    """Expected post-answer cumulative entropy, weighting each outcome by
    its predictive probability; zero-probability outcomes are skipped."""
    tg = _targets_of(net, targets)
    if question in evidence:
        raise SessionError(f"question {question!r} is already answered")
    net.var(question)

    joint = _target_joint(net, evidence, tg)
    if joint is not None and _fast_eligible(net, question, joint.vars):
        return _expected_entropy_from_joint(net, joint, question)

    [pred] = posterior_marginals(net, evidence, (question,))
    acc = 0.0
    for x, p in enumerate(pred.probabilities):
        if p <= 0.0:
            continue
        e2 = dict(evidence)
        e2[question] = x
        acc += p * entropy(net, e2, tg)
    return float(acc)


def information_gain(
    net: Network, evidence: Evidence, question: str,
    targets: Sequence[str] | None = None,
) -> float:
    """H(e) - EH(question, e): the greedy selection criterion."""
    tg = _targets_of(net, targets)
    return entropy(net, evidence, tg) - expected_entropy(net, evidence, question, tg)


@dataclass(frozen=True)
class AnswerPrediction:
    question: str
    state: int  # argmax, 0-based; ties resolve to the lowest state
    distribution: Distribution
    tie: bool


@dataclass(frozen=True)
class StepRecord:
    step: int
    asked: str
    answer: int  # 0-based
    ig: float
    entropy_after: float
    skill_posteriors: dict[str, list[float]]

    def to_json_dict(self) -> dict:
        """Wire form: 1-based answer state, per external-format convention."""
        return {
            "step": self.step,
            "asked": self.asked,
            "answer": self.answer + 1,
            "ig": self.ig,
            "entropy_after": self.entropy_after,
            "skill_posteriors": self.skill_posteriors,
        }


class TestSession:
    """One student's adaptive test against a fitted network.

    Single-owner mutable: distinct sessions may run concurrently over the
    same immutable network, but one session must not be mutated from two
    threads at once.
    """

    __test__ = False

    def __init__(
        self,
        net: Network,
        initial_evidence: Evidence | None = None,
        rule: TerminationRule = TerminationRule.exhaust(),
        questions: Sequence[str] | None = None,
    ):
        self.net = net
        e = dict(initial_evidence or {})
        check_evidence(net, e)
        self.targets = net.skill_ids
        if questions is None:
            questions = [q for q in net.question_ids if q not in e]
        else:
            for q in questions:
                if net.var(q).role != "question":
                    raise SessionError(f"{q!r} is not a question variable")
                if q in e:
                    raise SessionError(f"question {q!r} is already in the evidence")
        self.rule = rule
        self._evidence = e
        self._remaining: list[str] = list(questions)
        self.step = 0
        if len(set(questions)) != len(list(questions)):
            raise SessionError("duplicate question ids in the pending set")
        self._joint = _target_joint(net, e, self.targets)  # raises on impossible info
        self.entropy_trace: list[float] = [self._entropy()]
        self.transcript: list[StepRecord] = []
        self._ig_cache: dict[str, float] = {}
        joint_axes = self._joint.vars if self._joint is not None else ()
        self._leaf_ok = {
            q: _fast_eligible(net, q, joint_axes) for q in net.question_ids
        }

    # -- read views ---------------------------------------------------------

    @property
    def evidence(self) -> dict[str, int]:
        return dict(self._evidence)

    @property
    def remaining(self) -> tuple[str, ...]:
        return tuple(self._remaining)

    @property
    def current_entropy(self) -> float:
        return self.entropy_trace[-1]

    def _entropy(self) -> float:
        if self._joint is not None:
            dists = _joint_marginals(self._joint, self.net, self._evidence, self.targets)
            return float(sum(d.entropy() for d in dists))
        return entropy(self.net, self._evidence, self.targets)

    # -- the loop -----------------------------------------------------------

    def information_gain(self, question: str) -> float:
        if question not in self._remaining:
            raise SessionError(f"question {question!r} is not pending")
        if question in self._ig_cache:
            return self._ig_cache[question]
        if self._joint is not None and self._leaf_ok[question]:
            eh = _expected_entropy_from_joint(self.net, self._joint, question)
        else:
            eh = expected_entropy(self.net, self._evidence, question, self.targets)
        ig = self.current_entropy - eh
        self._ig_cache[question] = ig
        return ig

    def select_next(self) -> str | None:
        """Question with the largest expected information gain, or None
        when the test is over (nothing pending or rule satisfied)."""
        if not self._remaining or self.rule.satisfied(self.step, self.current_entropy):
            return None
        best = None
        best_ig = -math.inf
        for q in sorted(self._remaining):
            ig = self.information_gain(q)
            if ig > best_ig:
                best, best_ig = q, ig
        return best

    def _posterior_after(self, question: str, answer: int) -> Factor | None:
        e2 = dict(self._evidence)
        e2[question] = answer
        if self._joint is not None and self._leaf_ok[question]:
            cpt = self.net.cpt(question)
            fvars = cpt.parents + (cpt.child,)
            nd = cpt.table.reshape([self.net.cardinality(v) for v in fvars])
            lift = Factor(cpt.parents, nd[..., answer])
            perm = sorted(
                range(len(cpt.parents)), key=lambda i: self._joint.vars.index(cpt.parents[i])
            )
            shape = [1] * len(self._joint.vars)
            for i in perm:
                shape[self._joint.vars.index(cpt.parents[i])] = nd.shape[i]
            table = self._joint.table * np.transpose(lift.table, perm).reshape(shape)
            total = float(table.sum())
            if total > 0.0:
                return Factor(self._joint.vars, table / total)
            # the running joint may have flushed far-tail states to exact
            # zero; re-derive from scratch (scale-tracked elimination keeps
            # sub-1e-308 tails alive) before declaring the answer impossible
        return _target_joint(self.net, e2, self.targets)

    def submit_answer(self, question: str, answer: int) -> "TestSession":
        """Insert an answer: extends evidence, drops the question from the
        pending set, advances the step counter, appends the entropy trace.
        On any error the session is left unchanged."""
        if question in self._evidence:
            raise SessionError(f"question {question!r} was already answered")
        if question not in self._remaining:
            raise SessionError(f"question {question!r} is not pending")
        card = self.net.cardinality(question)
        if not (0 <= answer < card):
            raise SessionError(
                f"answer state {answer} out of range 0..{card - 1} for {question!r}"
            )
        ig = self.information_gain(question)
        new_joint = self._posterior_after(question, answer)  # raises if impossible

        self._evidence[question] = answer
        self._remaining.remove(question)
        self.step += 1
        self._joint = new_joint
        self._ig_cache = {}
        h = self._entropy()
        self.entropy_trace.append(h)
        self.transcript.append(
            StepRecord(
                step=self.step,
                asked=question,
                answer=answer,
                ig=ig,
                entropy_after=h,
                skill_posteriors={
                    d.variable: [float(p) for p in d.probabilities]
                    for d in self.skill_estimates()
                },
            )
        )
        return self

    # -- estimation ----------------------------------------------------------

    def skill_estimates(self) -> list[Distribution]:
        """P(target | evidence) for every skill/scoregroup variable."""
        if self._joint is not None:
            return _joint_marginals(self._joint, self.net, self._evidence, self.targets)
        return posterior_marginals(self.net, self._evidence, self.targets)

    def predict_answers(self) -> dict[str, AnswerPrediction]:
        """Predictive distribution and argmax state for each pending question."""
        out: dict[str, AnswerPrediction] = {}
        for q in self._remaining:
            if self._joint is not None and self._leaf_ok[q]:
                w = _outcome_table(self.net, self._joint, q)
                axes = tuple(range(len(self._joint.vars)))
                p = w.sum(axis=axes) if axes else w
                p = p / p.sum()
                dist = Distribution(q, p)
            else:
                [dist] = posterior_marginals(self.net, self._evidence, (q,))
            p = dist.probabilities
            out[q] = AnswerPrediction(
                question=q,
                state=int(np.argmax(p)),
                distribution=dist,
                tie=bool((p == p.max()).sum() > 1),
            )
        return out
