"""Answer datasets: schema validation, scale transforms, synthetic data.

A dataset is a table with one row per student: a ``student_id`` column,
one column per info variable (1-based state codes), and one column per
question.  Question cells hold raw points 0..max_points (for a
points-scale dataset) or 0/1 (boolean scale); for questions the cell
value coincides with the internal 0-based state index.  Missing answers
are empty cells, never 0.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
import pandas as pd

from .learning import Observations
from .network import SCALE_BOOLEAN, SCALE_POINTS, Network
from .zoo import TestBlueprint

STUDENT_ID = "student_id"


class DataError(ValueError):
    """Schema violation or out-of-range cell in an answer dataset."""


@dataclass
class Dataset:
    frame: pd.DataFrame
    blueprint: TestBlueprint
    scale: str

    def __post_init__(self):
        bp = self.blueprint
        expected = [STUDENT_ID, *bp.info_ids, *bp.question_ids]
        got = list(self.frame.columns)
        if got != expected:
            raise DataError(
                f"columns {got[:6]}... do not match the blueprint schema {expected[:6]}..."
            )
        if self.scale not in (SCALE_BOOLEAN, SCALE_POINTS):
            raise DataError(f"unknown scale {self.scale!r}")
        frame = self.frame.copy()
        frame[STUDENT_ID] = frame[STUDENT_ID].astype(str)
        for col in [*bp.info_ids, *bp.question_ids]:
            frame[col] = frame[col].astype("Int64")
        ids = frame[STUDENT_ID]
        dup = ids[ids.duplicated()]
        if len(dup):
            raise DataError(f"duplicate student id {dup.iloc[0]!r}")
        for info in bp.info_vars:
            col = frame[info.id]
            bad = col.dropna()[(col.dropna() < 1) | (col.dropna() > info.cardinality)]
            if len(bad):
                row = bad.index[0]
                raise DataError(
                    f"row {row}, column {info.id!r}: value {bad.iloc[0]} outside 1..{info.cardinality}"
                )
        for q in bp.questions:
            hi = q.max_points if self.scale == SCALE_POINTS else 1
            col = frame[q.id].dropna()
            bad = col[(col < 0) | (col > hi)]
            if len(bad):
                row = bad.index[0]
                raise DataError(
                    f"row {row}, column {q.id!r}: value {bad.iloc[0]} outside 0..{hi}"
                )
        self.frame = frame.reset_index(drop=True)

    # -- basic views --------------------------------------------------------

    @property
    def n_rows(self) -> int:
        return len(self.frame)

    @property
    def student_ids(self) -> list[str]:
        return self.frame[STUDENT_ID].tolist()

    def subset(self, row_indices) -> "Dataset":
        sub = self.frame.iloc[list(row_indices)].reset_index(drop=True)
        return Dataset(sub, self.blueprint, self.scale)

    def _state_column(self, col: str) -> np.ndarray:
        """Column as 0-based states with -1 for missing."""
        series = self.frame[col]
        vals = series.fillna(-1).to_numpy(dtype=np.int64)
        if col in self.blueprint.info_ids:
            vals = np.where(vals >= 0, vals - 1, -1)
        return vals

    def observations(self, allowed: Sequence[str]) -> Observations:
        """Learning view: columns for every allowed variable present here."""
        allowed_set = set(allowed)
        cols = [
            c
            for c in (*self.blueprint.info_ids, *self.blueprint.question_ids)
            if c in allowed_set
        ]
        if not cols:
            raise DataError("no dataset columns map to the network")
        values = np.stack([self._state_column(c) for c in cols], axis=1)
        return Observations(tuple(cols), values)

    def evidence_rows(self, net: Network | None = None) -> Iterator[dict[str, int]]:
        cols = [*self.blueprint.info_ids, *self.blueprint.question_ids]
        if net is not None:
            cols = [c for c in cols if c in net]
        mats = {c: self._state_column(c) for c in cols}
        for r in range(self.n_rows):
            yield {c: int(mats[c][r]) for c in cols if mats[c][r] >= 0}

    def row_index(self, student_id: str) -> int:
        hits = self.frame.index[self.frame[STUDENT_ID] == student_id]
        if not len(hits):
            raise DataError(f"unknown student id {student_id!r}")
        return int(hits[0])

    def answers_of(self, student_id: str) -> dict[str, int]:
        """Recorded question states (0-based) for one student."""
        r = self.row_index(student_id)
        out = {}
        for q in self.blueprint.question_ids:
            v = self.frame.at[r, q]
            if pd.notna(v):
                out[q] = int(v)
        return out

    def info_of(self, student_id: str) -> dict[str, int]:
        """Info-variable states (0-based) for one student."""
        r = self.row_index(student_id)
        out = {}
        for i in self.blueprint.info_ids:
            v = self.frame.at[r, i]
            if pd.notna(v):
                out[i] = int(v) - 1
        return out

    def totals(self, allow_partial: bool = False) -> pd.Series:
        """Per-row total points over the question columns."""
        q = self.frame[list(self.blueprint.question_ids)]
        if not allow_partial and q.isna().any().any():
            row = int(q.isna().any(axis=1).idxmax())
            raise DataError(
                f"row {row} has missing answers; pass allow_partial=True to total "
                "over answered cells"
            )
        return q.sum(axis=1, skipna=True).astype(int)

    def sha256(self) -> str:
        return hashlib.sha256(dataset_csv_bytes(self)).hexdigest()


# -- CSV ---------------------------------------------------------------------


def dataset_csv_bytes(ds: Dataset) -> bytes:
    return ds.frame.to_csv(index=False).encode("utf-8")


def save_csv(ds: Dataset, path: str | Path) -> None:
    Path(path).write_bytes(dataset_csv_bytes(ds))


def load_csv(path: str | Path, bp: TestBlueprint, scale: str = SCALE_POINTS) -> Dataset:
    expected = [STUDENT_ID, *bp.info_ids, *bp.question_ids]
    try:
        frame = pd.read_csv(path, dtype={STUDENT_ID: str})
    except FileNotFoundError:
        raise DataError(f"no such file: {path}") from None
    if list(frame.columns) != expected:
        raise DataError(
            f"{path}: header does not match the blueprint schema "
            f"(expected {len(expected)} columns starting {expected[:4]})"
        )
    return Dataset(frame, bp, scale)


# -- transforms ---------------------------------------------------------------


def to_boolean(ds: Dataset) -> Dataset:
    """Full-marks proxy: a points cell becomes 1 iff it equals max_points.

    This cannot reconstruct a human correct/incorrect judgment; synthetic
    truth networks should emit boolean scales natively when a boolean
    ground truth is wanted.
    """
    if ds.scale == SCALE_BOOLEAN:
        raise DataError("dataset is already boolean; double conversion is a pipeline bug")
    frame = ds.frame.copy()
    for q in ds.blueprint.questions:
        frame[q.id] = (frame[q.id] == q.max_points).astype("Int64")
    return Dataset(frame, ds.blueprint, SCALE_BOOLEAN)


@dataclass(frozen=True)
class ScoreGroups:
    """Total-score terciles: 0=bad, 1=average, 2=good per row."""

    states: np.ndarray  # aligned with the dataset's row order
    sizes: tuple[int, int, int]
    cut_ranks: tuple[int, int]

    LABELS = ("bad", "average", "good")

    def labels(self) -> list[str]:
        return [self.LABELS[s] for s in self.states]


def discretize_scores(ds: Dataset, allow_partial: bool = False) -> ScoreGroups:
    """Split rows into three near-equal groups by total score.

    Rows are ranked by (total, student_id); the lowest ceil(N/3) ranks are
    "bad", the next ceil(rest/2) "average", the remainder "good", so
    remainders land in the lower groups and sizes differ by at most one.
    Ties in totals are broken by student id, making the split
    deterministic and independent of row order.
    """
    n = ds.n_rows
    if n < 3:
        raise DataError(f"need at least 3 rows to form score groups, got {n}")
    totals = ds.totals(allow_partial=allow_partial)
    order = sorted(range(n), key=lambda r: (int(totals.iloc[r]), ds.frame.at[r, STUDENT_ID]))
    n_bad = -(-n // 3)
    n_avg = -(-(n - n_bad) // 2)
    sizes = (n_bad, n_avg, n - n_bad - n_avg)
    states = np.zeros(n, dtype=np.int64)
    for rank, row in enumerate(order):
        states[row] = 0 if rank < n_bad else (1 if rank < n_bad + n_avg else 2)
    return ScoreGroups(states, sizes, (n_bad, n_bad + n_avg))


# -- synthetic data ------------------------------------------------------------


def ancestral_sample(net: Network, n: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Forward-sample n joint configurations; returns 0-based states per var."""
    states: dict[str, np.ndarray] = {}
    for vid in net.topological_order():
        cpt = net.cpt(vid)
        row_idx = np.zeros(n, dtype=np.int64)
        for p in cpt.parents:
            row_idx = row_idx * net.cardinality(p) + states[p]
        cum = np.cumsum(cpt.table, axis=1)
        u = rng.random(n)
        states[vid] = (u[:, None] > cum[row_idx]).sum(axis=1).astype(np.int64)
    return states


def generate_synthetic(
    truth: Network, bp: TestBlueprint, n: int, seed: int
) -> tuple[Dataset, pd.DataFrame]:
    """Sample n students from a ground-truth network.

    Returns (dataset, skill_sidecar): the dataset holds only observable
    columns; the sidecar keeps the sampled latent skill states (1-based)
    for oracle checks.
    """
    if n < 1:
        raise DataError("need n >= 1 synthetic students")
    scales = {truth.var(q).scale for q in truth.question_ids}
    if len(scales) != 1:
        raise DataError("truth network mixes question scales")
    scale = scales.pop()
    rng = np.random.default_rng(seed)
    sampled = ancestral_sample(truth, n, rng)

    ids = [f"s{i + 1:04d}" for i in range(n)]
    frame = pd.DataFrame({STUDENT_ID: ids})
    for info in bp.info_ids:
        if info in truth:
            frame[info] = pd.array(sampled[info] + 1, dtype="Int64")
        else:
            frame[info] = pd.array([pd.NA] * n, dtype="Int64")
    for q in bp.question_ids:
        frame[q] = pd.array(sampled[q], dtype="Int64")

    sidecar = pd.DataFrame({STUDENT_ID: ids})
    for sid in truth.skill_ids:
        sidecar[sid] = sampled[sid] + 1
    return Dataset(frame, bp, scale), sidecar


def training_observations(ds: Dataset, observed_score: bool, net: Network) -> Observations:
    """Learning view of a dataset for one model structure.

    Observed-score models additionally receive the discretized total-score
    column for their scoregroup variable: observed while learning, hidden
    while testing.
    """
    obs = ds.observations([v.id for v in net.variables])
    if not observed_score:
        return obs
    groups = discretize_scores(ds)
    sg = net.ids_with_role("scoregroup")
    if not sg:
        raise DataError("observed-score training requested but the model has no scoregroup")
    return Observations(
        obs.columns + (sg[0],),
        np.concatenate([obs.values, groups.states[:, None]], axis=1),
    )


# -- correlations ---------------------------------------------------------------


def grade_correlations(
    ds: Dataset, subjects: Sequence[str] | None = None, allow_partial: bool = False
) -> dict[str, float]:
    """Pearson correlation between total score and each grade column.

    Without an explicit subject list, every 5-state info column is
    treated as a grade.  Grades code 1 as best, so a negative correlation
    means better grades go with better scores.  Zero-variance columns
    yield NaN.
    """
    if subjects is None:
        subjects = [i.id for i in ds.blueprint.info_vars if i.cardinality == 5]
    totals = ds.totals(allow_partial=allow_partial).to_numpy(dtype=float)
    out: dict[str, float] = {}
    for col in subjects:
        if col not in ds.blueprint.info_ids:
            raise DataError(f"{col!r} is not an info column")
        grades = ds.frame[col].to_numpy(dtype=float, na_value=np.nan)
        ok = ~np.isnan(grades)
        g, t = grades[ok], totals[ok]
        if len(g) < 2 or g.std() == 0.0 or t.std() == 0.0:
            out[col] = float("nan")
            continue
        out[col] = float(np.corrcoef(g, t)[0, 1])
    return out
