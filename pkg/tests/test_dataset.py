from __future__ import annotations

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from catbn.dataset import (
    DataError,
    Dataset,
    discretize_scores,
    generate_synthetic,
    grade_correlations,
    load_csv,
    save_csv,
    to_boolean,
)
from catbn.network import Cpt, Network, Variable
from catbn.zoo import InfoDef, QuestionDef, TestBlueprint, build_model, spec_by_id


def tiny_bp(n=3, max_points=2, with_info=True):
    questions = tuple(QuestionDef(f"q{i:02d}", max_points) for i in range(n))
    info = (InfoDef("gender", 2), InfoDef("grade_math", 5)) if with_info else ()
    return TestBlueprint(questions, info)


def frame_for(bp, rows):
    cols = ["student_id", *bp.info_ids, *bp.question_ids]
    return pd.DataFrame(rows, columns=cols)


def test_well_formed_roundtrip(tmp_path):
    bp = tiny_bp()
    ds = Dataset(
        frame_for(bp, [["a", 1, 3, 0, 1, 2], ["b", 2, 1, 2, 2, 0], ["c", 1, 5, 1, 0, 1]]),
        bp,
        "points",
    )
    assert ds.n_rows == 3
    path = tmp_path / "d.csv"
    save_csv(ds, path)
    back = load_csv(path, bp)
    assert back.frame.equals(ds.frame)
    assert back.scale == "points"


def test_out_of_range_cell_names_row_and_column():
    bp = tiny_bp(max_points=2)
    with pytest.raises(DataError, match=r"row 1.*q01.*outside 0\.\.2"):
        Dataset(
            frame_for(bp, [["a", 1, 3, 0, 1, 2], ["b", 2, 1, 2, 5, 0], ["c", 1, 5, 1, 0, 1]]),
            bp,
            "points",
        )


def test_duplicate_student_id_rejected():
    bp = tiny_bp(with_info=False)
    with pytest.raises(DataError, match="duplicate student id"):
        Dataset(frame_for(bp, [["a", 0, 1, 2], ["a", 1, 1, 1]]), bp, "points")


def test_header_mismatch_rejected(tmp_path):
    bp = tiny_bp()
    path = tmp_path / "bad.csv"
    path.write_text("student_id,oops\nx,1\n")
    with pytest.raises(DataError, match="header"):
        load_csv(path, bp)


def test_missing_cells_allowed_and_marked():
    bp = tiny_bp(with_info=False)
    frame = frame_for(bp, [["a", 0, None, 2], ["b", 1, 1, 1]])
    ds = Dataset(frame, bp, "points")
    assert ds.answers_of("a") == {"q00": 0, "q02": 2}
    obs = ds.observations(bp.question_ids)
    assert obs.values[0].tolist() == [0, -1, 2]


# -- boolean conversion --------------------------------------------------------


def test_to_boolean_full_marks_proxy():
    bp = tiny_bp(max_points=2, with_info=False)
    ds = Dataset(frame_for(bp, [["a", 2, 1, 0], ["b", 2, 2, None]]), bp, "points")
    b = to_boolean(ds)
    assert b.scale == "boolean"
    assert b.frame["q00"].tolist() == [1, 1]
    assert b.frame["q01"].tolist() == [0, 1]
    assert b.frame["q02"][0] == 0 and pd.isna(b.frame["q02"][1])
    # boolean cell = 1 implies the points cell held max marks
    for q in bp.questions:
        hit = b.frame[q.id] == 1
        assert (ds.frame[q.id][hit] == q.max_points).all()


def test_to_boolean_rejects_boolean_input():
    bp = tiny_bp(with_info=False)
    ds = Dataset(frame_for(bp, [["a", 1, 0, 1]]), bp, "boolean")
    with pytest.raises(DataError, match="already boolean"):
        to_boolean(ds)


def test_all_zero_row_stays_all_zero():
    bp = tiny_bp(with_info=False)
    ds = Dataset(frame_for(bp, [["a", 0, 0, 0]]), bp, "points")
    assert to_boolean(ds).frame[list(bp.question_ids)].sum(axis=1)[0] == 0


# -- score groups ---------------------------------------------------------------


def groups_ds(totals, ids=None):
    bp = TestBlueprint((QuestionDef("q00", 100),), ())
    ids = ids or [f"s{i}" for i in range(len(totals))]
    frame = pd.DataFrame({"student_id": ids, "q00": totals})
    return Dataset(frame, bp, "points")


def test_exact_thirds():
    ds = groups_ds([10, 20, 30, 40, 50, 60])
    g = discretize_scores(ds)
    assert g.sizes == (2, 2, 2)
    assert g.labels() == ["bad", "bad", "average", "average", "good", "good"]


def test_remainder_goes_to_lower_groups():
    g = discretize_scores(groups_ds([1, 2, 3, 4, 5, 6, 7]))
    assert g.sizes == (3, 2, 2)


def test_all_ties_assigned_by_student_id():
    ds = groups_ds([5, 5, 5, 5, 5, 5], ids=["f", "e", "d", "c", "b", "a"])
    g = discretize_scores(ds)
    assert g.sizes == (2, 2, 2)
    # ids a,b take the lowest ranks -> bad; they sit at rows 5,4
    assert g.labels() == ["good", "good", "average", "average", "bad", "bad"]


def test_too_few_rows():
    with pytest.raises(DataError, match="at least 3"):
        discretize_scores(groups_ds([1, 2]))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=100), min_size=3, max_size=40))
def test_group_sizes_always_balanced(totals):
    g = discretize_scores(groups_ds(totals))
    assert sum(g.sizes) == len(totals)
    assert max(g.sizes) - min(g.sizes) <= 1
    # permutation invariance over row order
    perm = list(reversed(range(len(totals))))
    ds2 = groups_ds([totals[i] for i in perm], ids=[f"s{i}" for i in perm])
    g2 = discretize_scores(ds2)
    by_id = dict(zip([f"s{i}" for i in perm], g2.labels()))
    assert [by_id[f"s{i}"] for i in range(len(totals))] == g.labels()


# -- synthetic generation ---------------------------------------------------------


def test_generate_rejects_zero(two_node_net):
    bp = TestBlueprint((QuestionDef("X", 1),), ())
    with pytest.raises(DataError):
        generate_synthetic(two_node_net, bp, 0, seed=1)


def test_generate_seed_determinism_and_roundtrip(tmp_path):
    bp = tiny_bp(n=4, max_points=2)
    net = build_model(spec_by_id("n3+"), bp)
    ds1, side1 = generate_synthetic(net, bp, 25, seed=9)
    ds2, side2 = generate_synthetic(net, bp, 25, seed=9)
    assert ds1.frame.equals(ds2.frame)
    assert side1.equals(side2)

    path = tmp_path / "synth.csv"
    save_csv(ds1, path)
    assert load_csv(path, bp, scale=ds1.scale).frame.equals(ds1.frame)


def test_generate_marginal_frequency(two_node_net):
    bp = TestBlueprint((QuestionDef("X", 1),), ())
    ds, _ = generate_synthetic(two_node_net, bp, 10_000, seed=3)
    # P(X=0) = 0.6*0.9 + 0.4*0.2 = 0.62; CLT 4-sigma band ~ +-0.02
    freq = float((ds.frame["X"] == 0).mean())
    assert abs(freq - 0.62) < 0.02


def test_sidecar_keeps_skills_out_of_dataset():
    bp = tiny_bp(n=4)
    net = build_model(spec_by_id("b3"), bp)
    ds, side = generate_synthetic(net, bp, 10, seed=0)
    assert "S1" not in ds.frame.columns
    assert side["S1"].between(1, 3).all()
    # info columns exist in the schema but are empty for a non-plus truth
    assert ds.frame["gender"].isna().all()


# -- correlations -----------------------------------------------------------------


def test_perfectly_inverse_grades():
    bp = TestBlueprint((QuestionDef("q00", 100),), (InfoDef("grade_math", 5),))
    frame = pd.DataFrame(
        {"student_id": list("abcde"), "grade_math": [5, 4, 3, 2, 1], "q00": [10, 20, 30, 40, 50]}
    )
    ds = Dataset(frame, bp, "points")
    corr = grade_correlations(ds)
    assert corr["grade_math"] == pytest.approx(-1.0)


def test_zero_variance_grade_reports_nan():
    bp = TestBlueprint((QuestionDef("q00", 100),), (InfoDef("grade_math", 5),))
    frame = pd.DataFrame(
        {"student_id": list("abc"), "grade_math": [3, 3, 3], "q00": [1, 2, 3]}
    )
    corr = grade_correlations(Dataset(frame, bp, "points"))
    assert np.isnan(corr["grade_math"])


def test_monotone_coupling_gives_negative_sign(rng):
    # truth where a better (lower) grade goes with higher skill and score
    bp = tiny_bp(n=6, max_points=1)
    variables = [Variable("S1", 3, "skill"), ]
    cpts = [Cpt("S1", (), np.array([[1 / 3, 1 / 3, 1 / 3]]))]
    for q in bp.question_ids:
        variables.append(Variable(q, 2, "question", scale="boolean"))
        cpts.append(Cpt(q, ("S1",), np.array([[0.8, 0.2], [0.5, 0.5], [0.15, 0.85]])))
    variables.append(Variable("gender", 2, "info"))
    cpts.append(Cpt("gender", ("S1",), np.full((3, 2), 0.5)))
    grade_rows = np.array(
        [
            [0.05, 0.10, 0.15, 0.30, 0.40],  # weak skill -> bad grades
            [0.10, 0.25, 0.30, 0.25, 0.10],
            [0.45, 0.30, 0.15, 0.07, 0.03],  # strong skill -> grade 1
        ]
    )
    variables.append(Variable("grade_math", 5, "info"))
    cpts.append(Cpt("grade_math", ("S1",), grade_rows))
    truth = Network(tuple(variables), tuple(cpts))
    ds, _ = generate_synthetic(truth, bp, 600, seed=11)
    corr = grade_correlations(ds)
    assert corr["grade_math"] < 0
