"""Parameter learning: closed-form counting and EM over latent skills.

The E-step computes expected family counts exactly.  Rows are grouped by
missingness pattern; within a group the posterior joint over that
pattern's unobserved variables is built directly from evidence-reduced
CPT slices, vectorized across rows.  Patterns whose unobserved joint
would exceed ``LATENT_JOINT_CAP`` cells fall back to per-row variable
elimination, one family query per CPT.  Both paths are exact; the
grouped path only reorders the float summation (documented as the sole
source of float nondeterminism under re-partitioning).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

from .inference import evidence_log_probability, joint_posterior
from .network import Network, validate_network

LATENT_JOINT_CAP = 4096


class LearningError(ValueError):
    """Data/structure mismatch or a degenerate likelihood during fitting."""


@dataclass(frozen=True)
class Observations:
    """Columnar observations for learning: -1 marks a missing cell.

    Values are 0-based state indices aligned with the network variables
    named by ``columns``.
    """

    columns: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        v = np.asarray(self.values, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != len(self.columns):
            raise LearningError(
                f"values shape {v.shape} does not match {len(self.columns)} columns"
            )
        if len(set(self.columns)) != len(self.columns):
            raise LearningError("duplicate observation columns")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Sequence]) -> "Observations":
        cols = tuple(data.keys())
        arrays = [np.asarray(data[c], dtype=np.int64) for c in cols]
        return cls(cols, np.stack(arrays, axis=1)) if cols else cls((), np.zeros((0, 0)))

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def evidence_rows(self, net: Network | None = None) -> Iterator[dict[str, int]]:
        """Rows as evidence mappings, skipping missing cells."""
        for r in range(self.n_rows):
            yield {
                c: int(self.values[r, i])
                for i, c in enumerate(self.columns)
                if self.values[r, i] >= 0
            }


@dataclass(frozen=True)
class EmConfig:
    max_iterations: int = 100
    ll_tolerance: float = 1e-4
    pseudocount: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise LearningError("max_iterations must be >= 1")
        if not self.ll_tolerance > 0:
            raise LearningError("ll_tolerance must be > 0")
        if self.pseudocount < 0:
            raise LearningError("pseudocount must be >= 0")


@dataclass
class FitResult:
    """Outcome of an EM run.

    ``ll_trace`` holds the observed-data log-likelihood of the parameters
    entering each iteration's E-step; with pseudocount=0 it is
    non-decreasing (EM monotonicity).  With pseudocount>0 the monotone
    quantity is the smoothed objective, so tiny dips in the raw trace are
    possible.
    """

    network: Network
    iterations_used: int
    ll_trace: list[float]
    converged: bool


def _as_observations(data, allowed: Sequence[str]) -> Observations:
    if isinstance(data, Observations):
        obs = data
    elif hasattr(data, "observations"):
        obs = data.observations(allowed)
    else:
        obs = Observations.from_mapping(dict(data))
    unknown = [c for c in obs.columns if c not in set(allowed)]
    if unknown:
        raise LearningError(f"observation columns not in the network: {unknown}")
    return obs


def _normalize_counts(counts: np.ndarray, pseudocount: float, card: int) -> np.ndarray:
    totals = counts.sum(axis=1, keepdims=True)
    denom = totals + pseudocount * card
    safe = np.where(denom > 0, denom, 1.0)
    table = (counts + pseudocount) / safe
    # unobserved parent combination with no smoothing: uniform fallback
    return np.where(denom > 0, table, 1.0 / card)


def fit_complete(structure: Network, data, pseudocount: float = 0.0) -> Network:
    """Closed-form CPT estimation from fully observed data.

    Each row becomes (count + pseudocount) / (total + pseudocount * card);
    parent combinations never observed get a uniform row when
    pseudocount is 0.
    """
    var_ids = [v.id for v in structure.variables]
    obs = _as_observations(data, var_ids)
    missing_vars = [v for v in var_ids if v not in obs.columns]
    if missing_vars:
        raise LearningError(f"complete-data fit needs every variable; missing {missing_vars}")
    if obs.n_rows and (obs.values < 0).any():
        r, c = np.argwhere(obs.values < 0)[0]
        raise LearningError(
            f"missing cell at row {int(r)}, column {obs.columns[int(c)]!r}; "
            "complete-data fit requires fully observed rows"
        )
    col = {c: i for i, c in enumerate(obs.columns)}
    tables: dict[str, np.ndarray] = {}
    for cpt in structure.cpts:
        card = structure.cardinality(cpt.child)
        n_rows = cpt.table.shape[0]
        counts = np.zeros((n_rows, card))
        row_idx = np.zeros(obs.n_rows, dtype=np.int64)
        for p in cpt.parents:
            row_idx = row_idx * structure.cardinality(p) + obs.values[:, col[p]]
        np.add.at(counts, (row_idx, obs.values[:, col[cpt.child]]), 1.0)
        tables[cpt.child] = _normalize_counts(counts, pseudocount, card)
    return structure.replace_cpts(tables)


# -- E-step ------------------------------------------------------------------


def _expected_counts(net: Network, obs: Observations):
    """Expected family counts and total observed-data log-likelihood.

    Returns (counts, ll) where counts maps child id to a table in CPT
    layout.  Raises LearningError naming the first row whose observed
    cells are impossible under the current parameters.
    """
    col = {c: i for i, c in enumerate(obs.columns)}
    var_ids = [v.id for v in net.variables]
    latent = [v for v in var_ids if v not in col]
    counts_nd: dict[str, np.ndarray] = {}
    fam_cards: dict[str, list[int]] = {}
    for cpt in net.cpts:
        cards = [net.cardinality(v) for v in cpt.parents + (cpt.child,)]
        fam_cards[cpt.child] = cards
        counts_nd[cpt.child] = np.zeros(cards)

    # group rows by missingness pattern
    if obs.n_rows == 0:
        raise LearningError("empty dataset")
    miss = obs.values < 0
    patterns: dict[bytes, list[int]] = {}
    for r in range(obs.n_rows):
        patterns.setdefault(miss[r].tobytes(), []).append(r)

    total_ll = 0.0
    for key in sorted(patterns):
        rows = np.array(patterns[key], dtype=np.int64)
        mask = np.frombuffer(key, dtype=bool)
        unobserved = latent + [c for i, c in enumerate(obs.columns) if mask[i]]
        unobserved = [v for v in var_ids if v in set(unobserved)]  # net order
        size = 1
        for v in unobserved:
            size *= net.cardinality(v)
        if size <= LATENT_JOINT_CAP:
            ll = _accumulate_group(net, obs, rows, unobserved, counts_nd)
        else:
            ll = _accumulate_rows_fallback(net, obs, rows, counts_nd)
        total_ll += ll

    counts = {
        child: nd.reshape(-1, fam_cards[child][-1]) for child, nd in counts_nd.items()
    }
    return counts, total_ll


def _accumulate_group(net, obs, rows, unobserved, counts_nd) -> float:
    """Vectorized expected counts for rows sharing one missingness pattern."""
    col = {c: i for i, c in enumerate(obs.columns)}
    n_g = rows.size
    lat_pos = {v: i for i, v in enumerate(unobserved)}
    lat_cards = [net.cardinality(v) for v in unobserved]
    n_lat = len(unobserved)

    joint = np.ones((n_g, *lat_cards))
    log_off = np.zeros(n_g)
    for cpt in net.cpts:
        fvars = cpt.parents + (cpt.child,)
        fcards = [net.cardinality(v) for v in fvars]
        table_nd = cpt.table.reshape(fcards)
        f_lat = [v for v in fvars if v in lat_pos]
        # gather CPT values at (per-row observed states, all latent states)
        index = []
        lat_seen = 0
        for v in fvars:
            if v in lat_pos:
                shape = [1] * (1 + len(f_lat))
                shape[1 + lat_seen] = net.cardinality(v)
                index.append(np.arange(net.cardinality(v)).reshape(shape))
                lat_seen += 1
            else:
                vals = obs.values[rows, col[v]]
                index.append(vals.reshape((n_g,) + (1,) * len(f_lat)))
        contrib = table_nd[tuple(index)]  # (rows-or-1, *f_lat cards) in factor order
        # broadcast onto the joint's latent axes; fully-latent factors come
        # back with a singleton row axis
        perm = [0] + sorted(range(1, 1 + len(f_lat)), key=lambda i: lat_pos[f_lat[i - 1]])
        contrib = np.transpose(contrib, perm)
        shape = [contrib.shape[0]] + [1] * n_lat
        for v in f_lat:
            shape[1 + lat_pos[v]] = net.cardinality(v)
        joint = joint * contrib.reshape(shape)
        # per-row rescale guards against underflow in long products
        m = joint.reshape(n_g, -1).max(axis=1)
        scale = np.where(m > 0, m, 1.0)
        joint /= scale.reshape((n_g,) + (1,) * n_lat)
        log_off += np.log(scale)

    z = joint.reshape(n_g, -1).sum(axis=1)
    bad = np.flatnonzero(z <= 0.0)
    if bad.size:
        raise LearningError(
            f"row {int(rows[bad[0]])}: observed cells impossible under current "
            "parameters (zero likelihood)"
        )
    norm = joint / z.reshape((n_g,) + (1,) * n_lat)

    for cpt in net.cpts:
        fvars = cpt.parents + (cpt.child,)
        f_lat = [v for v in fvars if v in lat_pos]
        f_obs = [v for v in fvars if v not in lat_pos]
        # marginal of the normalized joint over this family's latent vars
        keep_axes = {1 + lat_pos[v] for v in f_lat}
        sum_axes = tuple(ax for ax in range(1, 1 + n_lat) if ax not in keep_axes)
        post = norm.sum(axis=sum_axes) if sum_axes else norm
        # axes currently follow the joint's latent order; go to factor order
        kept = [v for v in unobserved if v in set(f_lat)]
        perm = [0] + [1 + kept.index(v) for v in f_lat]
        post = np.transpose(post, perm).reshape(n_g, -1)

        obs_flat = np.zeros(n_g, dtype=np.int64)
        for v in f_obs:
            obs_flat = obs_flat * net.cardinality(v) + obs.values[rows, col[v]]
        obs_cards = [net.cardinality(v) for v in f_obs]
        lat_cards_f = [net.cardinality(v) for v in f_lat]
        tmp = np.zeros(
            (int(np.prod(obs_cards, dtype=np.int64)), int(np.prod(lat_cards_f, dtype=np.int64)))
        )
        np.add.at(tmp, obs_flat, post)
        # back to per-variable axes, observed-then-latent, then factor order
        src_order = f_obs + f_lat
        tmp = tmp.reshape([net.cardinality(v) for v in src_order])
        counts_nd[cpt.child] += np.transpose(tmp, [src_order.index(v) for v in fvars])

    return float((np.log(z) + log_off).sum())


def _accumulate_rows_fallback(net, obs, rows, counts_nd) -> float:
    """Per-row family queries via variable elimination (large latent sets)."""
    col = {c: i for i, c in enumerate(obs.columns)}
    ll = 0.0
    for r in rows:
        e = {
            c: int(obs.values[r, i])
            for c, i in col.items()
            if obs.values[r, i] >= 0
        }
        lp = evidence_log_probability(net, e)
        if not math.isfinite(lp):
            raise LearningError(
                f"row {int(r)}: observed cells impossible under current parameters "
                "(zero likelihood)"
            )
        ll += lp
        for cpt in net.cpts:
            fvars = cpt.parents + (cpt.child,)
            hidden = tuple(v for v in fvars if v not in e)
            if hidden:
                post = joint_posterior(net, e, hidden)
                idx = tuple(e[v] if v in e else slice(None) for v in fvars)
                # post axes follow `hidden`, which preserves fvars order
                counts_nd[cpt.child][idx] += post.table
            else:
                idx = tuple(e[v] for v in fvars)
                counts_nd[cpt.child][idx] += 1.0
    return ll


def em_fit(structure: Network, data, cfg: EmConfig = EmConfig()) -> FitResult:
    """EM parameter estimation; variables absent from the data are latent.

    CPT rows are initialized from a seeded symmetric Dirichlet(1) draw —
    never uniform, which is an EM fixed point for latent variables.
    Stops when the absolute log-likelihood change drops below
    ``cfg.ll_tolerance`` or after ``cfg.max_iterations`` E-steps.
    """
    validate_network(structure).raise_if_invalid()
    var_ids = [v.id for v in structure.variables]
    obs = _as_observations(data, var_ids)
    if obs.n_rows == 0:
        raise LearningError("empty dataset")
    for i, c in enumerate(obs.columns):
        if (obs.values[:, i] < 0).all():
            raise LearningError(
                f"column {c!r} is present but entirely missing; drop it or "
                "declare the variable latent by omitting the column"
            )
        card = structure.cardinality(c)
        if (obs.values[:, i] >= card).any():
            r = int(np.argwhere(obs.values[:, i] >= card)[0][0])
            raise LearningError(
                f"row {r}, column {c!r}: state {int(obs.values[r, i])} out of "
                f"range 0..{card - 1}"
            )

    rng = np.random.default_rng(cfg.seed)
    init = {
        c.child: rng.dirichlet(np.ones(structure.cardinality(c.child)),
                               size=c.table.shape[0])
        for c in structure.cpts
    }
    net = structure.replace_cpts(init)

    ll_trace: list[float] = []
    converged = False
    for _ in range(cfg.max_iterations):
        counts, ll = _expected_counts(net, obs)
        ll_trace.append(ll)
        if len(ll_trace) >= 2 and abs(ll_trace[-1] - ll_trace[-2]) < cfg.ll_tolerance:
            converged = True
            break
        net = net.replace_cpts(
            {
                child: _normalize_counts(c, cfg.pseudocount, structure.cardinality(child))
                for child, c in counts.items()
            }
        )
    return FitResult(net, len(ll_trace), ll_trace, converged)


def sparsity_metrics(nets: Sequence[Network]) -> tuple[float, float]:
    """Overfitting diagnostics over a family of fitted networks.

    Returns (azt, as_): azt is the mean per-network count of exactly-zero
    CPT entries; as_ is the mean per-network average over all CPT rows of
    the fraction of zeros in the row.
    """
    if not nets:
        raise LearningError("need at least one network")
    zero_totals = []
    row_sparsities = []
    for net in nets:
        zeros = 0
        fracs = []
        for cpt in net.cpts:
            zeros += int((cpt.table == 0.0).sum())
            fracs.extend(((cpt.table == 0.0).mean(axis=1)).tolist())
        zero_totals.append(zeros)
        row_sparsities.append(float(np.mean(fracs)))
    return float(np.mean(zero_totals)), float(np.mean(row_sparsities))


def export_ll_trace(result: FitResult, path) -> None:
    """Write the convergence trace as CSV (iteration, loglik)."""
    lines = ["iteration,loglik"]
    lines += [f"{i},{ll:.6f}" for i, ll in enumerate(result.ll_trace, start=1)]
    Path(path).write_text("\n".join(lines) + "\n")
