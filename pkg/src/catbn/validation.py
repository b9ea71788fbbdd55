"""Input coercion and validation helpers shared by the estimator and CLI."""

from __future__ import annotations

import pandas as pd

from .dataset import STUDENT_ID, DataError, Dataset
from .network import SCALES
from .zoo import TestBlueprint


def ensure_dataset(X, blueprint: TestBlueprint, scale: str) -> Dataset:
    """Coerce estimator input into a validated Dataset.

    Accepts a Dataset (blueprint and scale must agree) or a DataFrame
    with the blueprint's question columns; a missing student_id column is
    synthesized and missing info columns are filled as unobserved.
    """
    if scale not in SCALES:
        raise DataError(f"unknown scale {scale!r}")
    if isinstance(X, Dataset):
        if X.blueprint != blueprint:
            raise DataError("dataset was built against a different blueprint")
        if X.scale != scale:
            raise DataError(f"dataset scale {X.scale!r} does not match the model ({scale!r})")
        return X
    if not isinstance(X, pd.DataFrame):
        raise DataError(f"expected a Dataset or DataFrame, got {type(X).__name__}")
    frame = X.copy()
    missing_q = [q for q in blueprint.question_ids if q not in frame.columns]
    if missing_q:
        raise DataError(f"input lacks question columns {missing_q[:5]}")
    if STUDENT_ID not in frame.columns:
        frame[STUDENT_ID] = [f"r{i:05d}" for i in range(len(frame))]
    for info in blueprint.info_ids:
        if info not in frame.columns:
            frame[info] = pd.array([pd.NA] * len(frame), dtype="Int64")
    known = {STUDENT_ID, *blueprint.info_ids, *blueprint.question_ids}
    extra = [c for c in frame.columns if c not in known]
    if extra:
        raise DataError(f"unexpected columns {extra[:5]}")
    ordered = frame[[STUDENT_ID, *blueprint.info_ids, *blueprint.question_ids]]
    return Dataset(ordered, blueprint, scale)
