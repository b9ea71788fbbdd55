"""Brute-force enumeration oracles, independent of the inference engine.

Everything here works straight off CPT tables with full-configuration
enumeration: build the explicit joint over all variables, then condition
and marginalize by masking and group-summing.  No factor algebra, no
elimination orderings -- deliberately a different code path from
catbn.inference so the two can check each other.
"""

from __future__ import annotations

import math

import numpy as np

from catbn.network import Network


def enumerate_joint(net: Network):
    """Full joint as (configs, probs): configs is (M, n) of state indices
    in net.variables order, probs is (M,)."""
    order = [v.id for v in net.variables]
    cards = [net.cardinality(v) for v in order]
    col = {v: i for i, v in enumerate(order)}
    m = int(np.prod(cards))
    grid = np.indices(cards).reshape(len(cards), m).T  # (M, n)
    probs = np.ones(m)
    for c in net.cpts:
        row_idx = np.zeros(m, dtype=np.int64)
        for p in c.parents:
            row_idx = row_idx * net.cardinality(p) + grid[:, col[p]]
        probs *= c.table[row_idx, grid[:, col[c.child]]]
    return grid, probs


def _mask(net: Network, grid: np.ndarray, evidence) -> np.ndarray:
    order = [v.id for v in net.variables]
    col = {v: i for i, v in enumerate(order)}
    mask = np.ones(grid.shape[0], dtype=bool)
    for var, state in evidence.items():
        mask &= grid[:, col[var]] == state
    return mask


def oracle_evidence_prob(net: Network, evidence) -> float:
    grid, probs = enumerate_joint(net)
    return float(probs[_mask(net, grid, evidence)].sum())


def oracle_posterior(net: Network, evidence, target: str) -> np.ndarray:
    """P(target | evidence) by enumeration; raises on impossible evidence."""
    grid, probs = enumerate_joint(net)
    col = [v.id for v in net.variables].index(target)
    mask = _mask(net, grid, evidence)
    total = probs[mask].sum()
    if total <= 0.0:
        raise ZeroDivisionError("impossible evidence")
    card = net.cardinality(target)
    out = np.zeros(card)
    np.add.at(out, grid[mask, col], probs[mask])
    return out / total


def oracle_row_loglik(net: Network, evidence) -> float:
    p = oracle_evidence_prob(net, evidence)
    return math.log(p) if p > 0 else float("-inf")


def entropy_of(p: np.ndarray) -> float:
    """Shannon entropy in nats with the 0*ln(0)=0 convention."""
    p = np.asarray(p, dtype=float)
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def oracle_marginal_entropy_sum(net: Network, evidence, targets) -> float:
    """Sum of marginal entropies of the targets given evidence."""
    return sum(entropy_of(oracle_posterior(net, evidence, t)) for t in targets)


def oracle_expected_entropy(net: Network, evidence, question, targets) -> float:
    """E over the question's outcomes of the post-answer entropy sum.

    Zero-probability outcomes contribute nothing (their entropy term is
    never evaluated).
    """
    grid, probs = enumerate_joint(net)
    col = [v.id for v in net.variables].index(question)
    mask = _mask(net, grid, evidence)
    total = probs[mask].sum()
    acc = 0.0
    for x in range(net.cardinality(question)):
        p_x = probs[mask & (grid[:, col] == x)].sum() / total
        if p_x <= 0.0:
            continue
        e2 = dict(evidence)
        e2[question] = x
        acc += p_x * oracle_marginal_entropy_sum(net, e2, targets)
    return acc
