"""Exact inference on discrete networks via variable elimination.

Factors are kept in linear probability space.  Each elimination step
rescales its product factor to unit maximum and accumulates the scale in
log space, so intermediate values cannot underflow even for products of
hundreds of small probabilities (float64 underflows near 1e-308; a
single factor entry never drops below the rescaled product's dynamic
range of ~1e308).  Scales cancel in posteriors and are added back when a
raw evidence probability is requested.

Elimination order is min-fill with deterministic ties broken by variable
id, so repeated queries are bit-identical.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .network import (
    Cpt,
    Distribution,
    Evidence,
    Network,
    NetworkError,
    check_evidence,
)


class ImpossibleEvidenceError(NetworkError):
    """The model assigns probability zero to the observed assignment.

    Raised instead of returning NaN or a zero vector so callers can tell
    "the model contradicts this answer" apart from uniform ignorance.
    """


@dataclass(frozen=True)
class Factor:
    """A nonnegative table over a tuple of variables, one axis each.

    ``log_scale`` carries a factored-out log constant: the represented
    values are ``table * exp(log_scale)``.
    """

    vars: tuple[str, ...]
    table: np.ndarray
    log_scale: float = 0.0

    def axis(self, var: str) -> int:
        return self.vars.index(var)

    def marginal(self, var: str) -> np.ndarray:
        """Sum out every axis except ``var`` (scale ignored)."""
        keep = self.axis(var)
        axes = tuple(i for i in range(len(self.vars)) if i != keep)
        return self.table.sum(axis=axes) if axes else self.table.copy()


def cpt_factor(net: Network, cpt: Cpt) -> Factor:
    """CPT as a factor over (parents..., child)."""
    dims = [net.cardinality(p) for p in cpt.parents] + [net.cardinality(cpt.child)]
    return Factor(cpt.parents + (cpt.child,), cpt.table.reshape(dims))


def reduce_factor(f: Factor, evidence: Evidence) -> Factor:
    """Slice out observed variables' axes at their observed states."""
    idx = tuple(
        evidence[v] if v in evidence else slice(None) for v in f.vars
    )
    kept = tuple(v for v in f.vars if v not in evidence)
    return Factor(kept, f.table[idx], f.log_scale)


def multiply_factors(factors: Sequence[Factor], rescale: bool = False) -> Factor:
    """Pointwise product; output variables in first-seen order.

    With ``rescale`` the running product is renormalized to unit maximum
    after each fold (the constant moves into ``log_scale``), which keeps
    long products of small probabilities clear of float64 underflow.
    """
    out_vars: list[str] = []
    shape_by_var: dict[str, int] = {}
    for f in factors:
        for v, n in zip(f.vars, f.table.shape):
            if v not in out_vars:
                out_vars.append(v)
            shape_by_var[v] = n
    table = np.ones(tuple(shape_by_var[v] for v in out_vars))
    log_scale = 0.0
    for f in factors:
        log_scale += f.log_scale
        # broadcast f onto the union axes
        perm = sorted(range(len(f.vars)), key=lambda i: out_vars.index(f.vars[i]))
        t = np.transpose(f.table, perm)
        shape = [1] * len(out_vars)
        for i in perm:
            shape[out_vars.index(f.vars[i])] = f.table.shape[i]
        table = table * t.reshape(shape)
        if rescale:
            m = float(table.max()) if table.size else 0.0
            if m > 0.0 and math.isfinite(m):
                table = table / m
                log_scale += math.log(m)
    return Factor(tuple(out_vars), table, log_scale)


def sum_out(f: Factor, var: str) -> Factor:
    ax = f.axis(var)
    kept = tuple(v for v in f.vars if v != var)
    return Factor(kept, f.table.sum(axis=ax), f.log_scale)


def _min_fill_order(
    hidden: set[str], scopes: list[set[str]], tie_break: Mapping[str, int]
) -> list[str]:
    """Greedy min-fill ordering over the factor interaction graph."""
    adj: dict[str, set[str]] = {v: set() for v in hidden}
    for scope in scopes:
        inside = [v for v in scope if v in hidden]
        for v in inside:
            adj[v].update(u for u in scope if u != v and u in hidden)

    order: list[str] = []
    remaining = set(hidden)
    while remaining:
        best = None
        best_key = None
        for v in sorted(remaining, key=lambda x: tie_break[x]):
            nbrs = [u for u in adj[v] if u in remaining]
            fill = 0
            for i in range(len(nbrs)):
                for j in range(i + 1, len(nbrs)):
                    if nbrs[j] not in adj[nbrs[i]]:
                        fill += 1
            key = (fill, tie_break[v])
            if best_key is None or key < best_key:
                best, best_key = v, key
        nbrs = [u for u in adj[best] if u in remaining]
        for i in range(len(nbrs)):
            for j in range(i + 1, len(nbrs)):
                adj[nbrs[i]].add(nbrs[j])
                adj[nbrs[j]].add(nbrs[i])
        remaining.remove(best)
        order.append(best)
    return order


def eliminate(
    net: Network, evidence: Evidence, keep: Sequence[str]
) -> Factor:
    """Unnormalized joint over ``keep`` with evidence absorbed.

    The returned factor represents P(keep, evidence); summing it (and
    applying ``log_scale``) yields P(evidence).  ``keep`` variables that
    are themselves observed are excluded from the output axes.
    """
    check_evidence(net, evidence)
    keep_set = {k for k in keep if k not in evidence}
    for k in keep:
        net.var(k)

    factors = [reduce_factor(cpt_factor(net, c), evidence) for c in net.cpts]
    hidden = {
        v.id for v in net.variables if v.id not in keep_set and v.id not in evidence
    }
    tie_break = {v.id: i for i, v in enumerate(sorted(net.variables, key=lambda x: x.id))}
    order = _min_fill_order(hidden, [set(f.vars) for f in factors], tie_break)

    for var in order:
        related = [f for f in factors if var in f.vars]
        if not related:
            continue
        product = multiply_factors(related, rescale=True)
        factors = [f for f in factors if var not in f.vars] + [sum_out(product, var)]

    result = multiply_factors(factors, rescale=True)
    # deterministic axis order: keep order as given
    want = tuple(k for k in keep if k in keep_set)
    if result.vars != want:
        perm = [result.vars.index(v) for v in want]
        result = Factor(want, np.transpose(result.table, perm), result.log_scale)
    return result


def joint_posterior(
    net: Network, evidence: Evidence, targets: Sequence[str]
) -> Factor:
    """Normalized joint P(targets | evidence); observed targets dropped.

    Raises ImpossibleEvidenceError when P(evidence) = 0.
    """
    raw = eliminate(net, evidence, tuple(targets))
    total = float(raw.table.sum())
    if total <= 0.0 or not math.isfinite(total):
        raise ImpossibleEvidenceError(
            f"evidence has zero probability under the model: { dict(evidence) }"
        )
    return Factor(raw.vars, raw.table / total, 0.0)


def posterior_marginals(
    net: Network, evidence: Evidence, targets: Sequence[str]
) -> list[Distribution]:
    """Exact P(T | evidence) for each target, by variable elimination.

    A target that is itself observed yields a degenerate distribution
    with all mass on the observed state.
    """
    out: list[Distribution] = []
    for t in targets:
        card = net.cardinality(t)
        if t in evidence:
            check_evidence(net, {t: evidence[t]})
            p = np.zeros(card)
            p[evidence[t]] = 1.0
            out.append(Distribution(t, p))
            continue
        post = joint_posterior(net, evidence, (t,))
        out.append(Distribution(t, post.table))
    return out


def evidence_log_probability(net: Network, evidence: Evidence) -> float:
    """ln P(evidence), marginalizing everything unobserved exactly.

    Returns -inf for impossible evidence (this is the one query where a
    zero is an answer, not an error).
    """
    raw = eliminate(net, evidence, ())
    total = float(raw.table.sum()) if raw.table.ndim else float(raw.table)
    if total <= 0.0:
        return float("-inf")
    return math.log(total) + raw.log_scale


def row_log_likelihoods(net: Network, rows: Iterable[Evidence]) -> np.ndarray:
    """ln P(observed cells) per row; -inf marks an impossible row."""
    return np.array([evidence_log_probability(net, row) for row in rows])


def log_likelihood(net: Network, data) -> float:
    """Total data log-likelihood, Σ rows ln P(observed cells of row).

    ``data`` is an iterable of evidence mappings, or any object with an
    ``evidence_rows(net)`` method (datasets provide one).  Rows with
    impossible observed combinations contribute -inf; the aggregate is
    then -inf and a warning names the offending rows.
    """
    if hasattr(data, "evidence_rows"):
        rows = list(data.evidence_rows(net))
    else:
        rows = list(data)
    if not rows:
        return 0.0
    per_row = row_log_likelihoods(net, rows)
    bad = np.flatnonzero(np.isneginf(per_row))
    if bad.size:
        warnings.warn(
            f"{bad.size} row(s) impossible under the model (first: row {int(bad[0])}); "
            "log-likelihood is -inf",
            RuntimeWarning,
            stacklevel=2,
        )
        return float("-inf")
    return float(per_row.sum())
