"""Cross-validated comparison of candidate model structures.

For every model and fold: fit on the other folds with EM, then replay
each held-out student through an adaptive session, recording at every
step the fraction of still-unanswered questions whose argmax prediction
matches the recorded answer.  Curves are reported under two divisor
conventions (see ``ModelEvalResult``), selection frequencies land in a
question-by-step occurrence matrix, and CPT sparsity diagnostics come
along for overfitting comparisons.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

import numpy as np

from .dataset import Dataset, training_observations
from .inference import ImpossibleEvidenceError
from .learning import EmConfig, LearningError, em_fit, sparsity_metrics
from .network import Network, load_network, save_network
from .session import TerminationRule, TestSession
from .zoo import ModelSpec, TestBlueprint, build_model, spec_by_id


class EvaluationError(ValueError):
    """Configuration or truth-data problem in an evaluation run."""


@dataclass(frozen=True)
class EvalConfig:
    specs: tuple[str, ...]
    folds: int = 10
    seed: int = 0
    max_steps: int | None = None  # None: ask every question
    em: EmConfig = field(default_factory=EmConfig)
    cache_dir: Path | None = None
    n_jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "specs", tuple(self.specs))
        if self.folds < 2:
            raise EvaluationError("folds must be >= 2")
        if not self.specs:
            raise EvaluationError("no model specs selected")
        if self.max_steps is not None and self.max_steps < 0:
            raise EvaluationError("max_steps must be >= 0")


@dataclass
class ModelEvalResult:
    """Curves and diagnostics for one model.

    ``sr`` divides every step by the full student count N, so students
    whose test already ran out of questions contribute zero; with
    complete records and step < question count the two conventions
    coincide.  ``sr_conditional`` averages only over students that still
    had questions to predict (NaN when nobody did).
    """

    model_id: str
    question_ids: tuple[str, ...]
    sr: np.ndarray
    sr_conditional: np.ndarray
    defined_counts: np.ndarray
    occurrence: np.ndarray  # (question, step) relative frequencies, step 1-based
    azt: float
    as_: float
    incomplete_folds: list[int]
    contradicted_students: int = 0  # replays truncated by zero-probability answers


@dataclass
class EvalReport:
    models: dict[str, ModelEvalResult]
    fold_of_row: np.ndarray
    n_students: int
    folds: int
    seed: int
    max_steps: int
    dataset_sha256: str
    em: EmConfig


def fold_assignments(n_rows: int, folds: int, seed: int) -> np.ndarray:
    """Deterministic fold index per row; disjoint, exhaustive, sizes
    differing by at most one."""
    if folds > n_rows:
        raise EvaluationError(f"{folds} folds for {n_rows} rows")
    perm = np.random.default_rng(seed).permutation(n_rows)
    out = np.zeros(n_rows, dtype=np.int64)
    for k, chunk in enumerate(np.array_split(perm, folds)):
        out[chunk] = k
    return out


def success_ratio_step(session: TestSession, truth: Mapping[str, int]) -> float | None:
    """Fraction of pending questions predicted correctly, or None when
    nothing is pending (skipped, not zero)."""
    preds = session.predict_answers()
    if not preds:
        return None
    hits = 0
    for q, pred in preds.items():
        if q not in truth:
            raise EvaluationError(f"truth map is missing question {q!r}")
        hits += int(pred.state == truth[q])
    return hits / len(preds)


def _em_seed(seed: int, spec_idx: int, fold: int) -> int:
    return int(np.random.SeedSequence([seed, spec_idx, fold]).generate_state(1)[0])


def _train_observations(data: Dataset, spec: ModelSpec, net: Network, train_rows: np.ndarray):
    return training_observations(data.subset(train_rows), spec.observed_score, net)


def _fit_fold(
    data: Dataset,
    bp: TestBlueprint,
    spec: ModelSpec,
    spec_idx: int,
    fold: int,
    train_rows: np.ndarray,
    cfg: EvalConfig,
) -> Network:
    cache_file = None
    if cfg.cache_dir is not None:
        key = json.dumps(
            {
                "data": data.sha256(),
                "spec": spec.id,
                "fold": fold,
                "folds": cfg.folds,
                "seed": cfg.seed,
                "em": [cfg.em.max_iterations, cfg.em.ll_tolerance, cfg.em.pseudocount],
            },
            sort_keys=True,
        )
        digest = hashlib.sha256(key.encode()).hexdigest()[:16]
        safe_id = spec.id.replace("+", "plus")
        cache_file = Path(cfg.cache_dir) / f"{safe_id}_fold{fold}_{digest}.json"
        if cache_file.exists():
            return load_network(cache_file)
    structure = build_model(spec, bp)
    em_cfg = replace(cfg.em, seed=_em_seed(cfg.seed, spec_idx, fold))
    result = em_fit(structure, _train_observations(data, spec, structure, train_rows), em_cfg)
    if cache_file is not None:
        cache_file.parent.mkdir(parents=True, exist_ok=True)
        save_network(result.network, cache_file)
    return result.network


def simulate_student(
    net: Network,
    answers: Mapping[str, int],
    info_evidence: Mapping[str, int],
    max_steps: int | None = None,
    on_contradiction: str = "raise",
) -> tuple[list[float | None], list[str], TestSession]:
    """Replay one student's recorded answers through an adaptive session.

    Returns (sr_by_step, asked_order, session); sr_by_step[s] is the
    prediction success over the questions still pending after s answers.
    Questions without a recorded answer stay out of the pending pool.

    A recorded answer the model assigns zero probability (possible with
    unsmoothed CPTs) raises by default; with on_contradiction="stop" the
    replay truncates there instead, keeping the steps recorded so far.
    """
    if on_contradiction not in ("raise", "stop"):
        raise EvaluationError(f"unknown contradiction policy {on_contradiction!r}")
    rule = (
        TerminationRule.after_questions(max_steps)
        if max_steps is not None
        else TerminationRule.exhaust()
    )
    questions = [q for q in net.question_ids if q in answers]
    session = TestSession(net, dict(info_evidence), rule=rule, questions=questions)
    sr = [success_ratio_step(session, answers)]
    asked: list[str] = []
    while (q := session.select_next()) is not None:
        try:
            session.submit_answer(q, answers[q])
        except ImpossibleEvidenceError:
            if on_contradiction == "raise":
                raise
            break
        asked.append(q)
        sr.append(success_ratio_step(session, answers))
    return sr, asked, session


def _eval_fold(
    data: Dataset,
    bp: TestBlueprint,
    spec: ModelSpec,
    spec_idx: int,
    fold: int,
    fold_of_row: np.ndarray,
    cfg: EvalConfig,
    n_steps: int,
):
    """Fit and test one fold; returns partial sums for aggregation."""
    q_index = {q: i for i, q in enumerate(bp.question_ids)}
    sr_sum = np.zeros(n_steps + 1)
    defined = np.zeros(n_steps + 1, dtype=np.int64)
    occurrence = np.zeros((len(bp.question_ids), n_steps))
    contradicted = 0
    train_rows = np.flatnonzero(fold_of_row != fold)
    test_rows = np.flatnonzero(fold_of_row == fold)
    try:
        net = _fit_fold(data, bp, spec, spec_idx, fold, train_rows, cfg)
    except LearningError:
        return sr_sum, defined, occurrence, None, contradicted
    use_info = spec.additional_info
    for r in test_rows:
        sid = data.frame.at[int(r), "student_id"]
        answers = data.answers_of(sid)
        info = data.info_of(sid) if use_info else {}
        try:
            sr, asked, session = simulate_student(
                net, answers, info, cfg.max_steps, on_contradiction="stop"
            )
        except ImpossibleEvidenceError:
            contradicted += 1  # even the initial info evidence is impossible
            continue
        if session.remaining and session.step < n_steps:
            contradicted += 1  # truncated mid-test by an impossible answer
        for s, value in enumerate(sr):
            if value is not None:
                sr_sum[s] += value
                defined[s] += 1
        for s, q in enumerate(asked, start=1):
            occurrence[q_index[q], s - 1] += 1
    return sr_sum, defined, occurrence, net, contradicted


def cross_validate(data: Dataset, bp: TestBlueprint, cfg: EvalConfig) -> EvalReport:
    """Run the full protocol over every selected model spec."""
    specs = [spec_by_id(s) for s in cfg.specs]
    for spec in specs:
        if spec.scale != data.scale:
            raise EvaluationError(
                f"model {spec.id!r} expects {spec.scale} answers but the dataset "
                f"is {data.scale}; convert the data or pick matching specs"
            )
        if spec.skill_count > 1 and bp.expert_map is None:
            raise EvaluationError(f"model {spec.id!r} needs an expert map in the blueprint")
    n = data.n_rows
    fold_of_row = fold_assignments(n, cfg.folds, cfg.seed)
    n_questions = len(bp.question_ids)
    n_steps = n_questions if cfg.max_steps is None else min(cfg.max_steps, n_questions)

    results: dict[str, ModelEvalResult] = {}
    for spec_idx, spec in enumerate(specs):
        fold_jobs = [
            (data, bp, spec, spec_idx, fold, fold_of_row, cfg, n_steps)
            for fold in range(cfg.folds)
        ]
        if cfg.n_jobs != 1:
            from joblib import Parallel, delayed

            outputs = Parallel(n_jobs=cfg.n_jobs)(
                delayed(_eval_fold)(*job) for job in fold_jobs
            )
        else:
            outputs = [_eval_fold(*job) for job in fold_jobs]

        sr_sum = np.zeros(n_steps + 1)
        defined = np.zeros(n_steps + 1, dtype=np.int64)
        occurrence = np.zeros((n_questions, n_steps))
        nets: list[Network] = []
        incomplete: list[int] = []
        contradicted = 0
        for fold, (s, d, occ, net, bad) in enumerate(outputs):
            sr_sum += s
            defined += d
            occurrence += occ
            contradicted += bad
            if net is None:
                incomplete.append(fold)
            else:
                nets.append(net)
        with np.errstate(invalid="ignore"):
            sr_conditional = np.where(defined > 0, sr_sum / np.maximum(defined, 1), np.nan)
        azt, as_ = sparsity_metrics(nets) if nets else (float("nan"), float("nan"))
        results[spec.id] = ModelEvalResult(
            model_id=spec.id,
            question_ids=bp.question_ids,
            sr=sr_sum / n,
            sr_conditional=sr_conditional,
            defined_counts=defined,
            occurrence=occurrence / n,
            azt=azt,
            as_=as_,
            incomplete_folds=incomplete,
            contradicted_students=contradicted,
        )
    return EvalReport(
        models=results,
        fold_of_row=fold_of_row,
        n_students=n,
        folds=cfg.folds,
        seed=cfg.seed,
        max_steps=n_steps,
        dataset_sha256=data.sha256(),
        em=cfg.em,
    )


# -- report emission -----------------------------------------------------------


def emit_report(report: EvalReport, out_dir: str | Path) -> list[Path]:
    """Write the report as CSV files plus a reproducibility manifest.

    Files: sr_curves.csv (model,step,sr), sr_curves_conditional.csv,
    occurrence_<model>.csv per model (question,step,freq), sparsity.csv
    (model,azt,as), manifest.json.  Numbers carry six decimals; orderings
    are pinned so identical runs emit identical bytes.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def emit(name: str, header: str, rows) -> None:
        path = out / name
        text = header + "\n" + "".join(f"{row}\n" for row in rows)
        path.write_text(text)
        written.append(path)

    emit(
        "sr_curves.csv",
        "model,step,sr",
        (
            f"{mid},{s},{val:.6f}"
            for mid, res in report.models.items()
            for s, val in enumerate(res.sr)
        ),
    )
    emit(
        "sr_curves_conditional.csv",
        "model,step,sr",
        (
            f"{mid},{s},{val:.6f}"
            for mid, res in report.models.items()
            for s, val in enumerate(res.sr_conditional)
        ),
    )
    for mid, res in report.models.items():
        emit(
            f"occurrence_{mid.replace('+', 'plus')}.csv",
            "question,step,freq",
            (
                f"{q},{s + 1},{res.occurrence[i, s]:.6f}"
                for i, q in enumerate(res.question_ids)
                for s in range(res.occurrence.shape[1])
            ),
        )
    emit(
        "sparsity.csv",
        "model,azt,as",
        (f"{mid},{res.azt:.6f},{res.as_:.6f}" for mid, res in report.models.items()),
    )

    manifest = {
        "models": list(report.models),
        "folds": report.folds,
        "seed": report.seed,
        "max_steps": report.max_steps,
        "n_students": report.n_students,
        "dataset_sha256": report.dataset_sha256,
        "em": {
            "max_iterations": report.em.max_iterations,
            "ll_tolerance": report.em.ll_tolerance,
            "pseudocount": report.em.pseudocount,
        },
        "fold_of_row": report.fold_of_row.tolist(),
        "incomplete_folds": {
            mid: res.incomplete_folds for mid, res in report.models.items() if res.incomplete_folds
        },
        "contradicted_students": {
            mid: res.contradicted_students
            for mid, res in report.models.items()
            if res.contradicted_students
        },
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    written.append(path)
    return written
