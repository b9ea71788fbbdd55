from __future__ import annotations

import numpy as np
import pytest
from fastapi.testclient import TestClient

from catbn.dataset import generate_synthetic
from catbn.learning import EmConfig, em_fit
from catbn.server import create_app
from catbn.session import TestSession
from catbn.zoo import build_model, spec_by_id

from .test_evaluation import boolean_truth


@pytest.fixture(scope="module")
def service():
    truth, bp = boolean_truth(5, 3, seed=17)
    data, _ = generate_synthetic(truth, bp, 60, seed=1)
    structure = build_model(spec_by_id("b3"), bp)
    fitted = em_fit(
        structure, data.observations([v.id for v in structure.variables]),
        EmConfig(max_iterations=25, seed=3),
    ).network
    app = create_app({"b3": fitted}, bp)
    return TestClient(app), fitted, bp


def test_health_and_models(service):
    client, net, bp = service
    assert client.get("/health").json()["status"] == "ok"
    models = client.get("/models").json()["models"]
    assert models[0]["id"] == "b3" and models[0]["questions"] == 5
    doc = client.get("/blueprint").json()
    assert len(doc["questions"]) == 5


def test_session_lifecycle(service):
    client, net, bp = service
    r = client.post("/sessions", json={"model": "b3"})
    assert r.status_code == 201
    body = r.json()
    sid = body["session_id"]
    assert body["first_question"]["id"] in net.question_ids

    nxt = client.get(f"/sessions/{sid}/next").json()
    assert not nxt["done"]
    q = nxt["question"]["id"]
    assert nxt["ig"] >= -1e-9

    ans = client.post(f"/sessions/{sid}/answers", json={"question": q, "state": 2})
    assert ans.status_code == 200
    payload = ans.json()
    assert payload["step"] == 1
    assert "S1" in payload["skill_posteriors"]

    est = client.get(f"/sessions/{sid}/estimates").json()
    assert est["step"] == 1
    assert len(est["predicted"]) == 4
    for pred in est["predicted"].values():
        assert 1 <= pred["state"] <= 2  # wire states are 1-based
        assert abs(sum(pred["probabilities"]) - 1.0) < 1e-9

    assert client.delete(f"/sessions/{sid}").status_code == 204
    assert client.get(f"/sessions/{sid}/next").status_code == 404


def test_error_contract(service):
    client, net, bp = service
    assert client.post("/sessions", json={"model": "nope"}).status_code == 404
    assert client.get("/sessions/missing/next").status_code == 404
    body = client.get("/sessions/missing/next").json()
    assert set(body) == {"code", "message"}

    sid = client.post("/sessions", json={"model": "b3"}).json()["session_id"]
    q = client.get(f"/sessions/{sid}/next").json()["question"]["id"]
    # out-of-range state
    r = client.post(f"/sessions/{sid}/answers", json={"question": q, "state": 9})
    assert r.status_code == 422
    assert r.json()["code"] == "invalid_state"
    # duplicate answer
    assert client.post(f"/sessions/{sid}/answers", json={"question": q, "state": 1}).status_code == 200
    dup = client.post(f"/sessions/{sid}/answers", json={"question": q, "state": 2})
    assert dup.status_code == 409
    assert dup.json()["code"] == "duplicate_answer"
    # malformed body
    assert client.post(f"/sessions/{sid}/answers", json={"question": q}).status_code == 422


def test_done_after_all_answers(service):
    client, net, bp = service
    sid = client.post("/sessions", json={"model": "b3"}).json()["session_id"]
    while True:
        nxt = client.get(f"/sessions/{sid}/next").json()
        if nxt["done"]:
            break
        q = nxt["question"]["id"]
        client.post(f"/sessions/{sid}/answers", json={"question": q, "state": 1})
    transcript = client.get(f"/sessions/{sid}/transcript").json()["records"]
    assert len(transcript) == 5
    assert [r["step"] for r in transcript] == [1, 2, 3, 4, 5]


def test_http_matches_library_bit_for_bit(service):
    client, net, bp = service
    answers = {q: (i % 2) for i, q in enumerate(net.question_ids)}

    lib = TestSession(net)
    while (q := lib.select_next()) is not None:
        lib.submit_answer(q, answers[q])

    sid = client.post("/sessions", json={"model": "b3"}).json()["session_id"]
    while True:
        nxt = client.get(f"/sessions/{sid}/next").json()
        if nxt["done"]:
            break
        q = nxt["question"]["id"]
        client.post(f"/sessions/{sid}/answers", json={"question": q, "state": answers[q] + 1})
    est = client.get(f"/sessions/{sid}/estimates").json()

    [lib_post] = lib.skill_estimates()
    http_post = est["skill_posteriors"]["S1"]
    assert http_post == [float(p) for p in lib_post.probabilities]
    assert est["entropy_trace"] == [float(h) for h in lib.entropy_trace]


def test_hundred_interleaved_sessions_do_not_interfere(service):
    client, net, bp = service
    rng = np.random.default_rng(5)
    n_sessions = 100
    answer_sets = [
        {q: int(rng.integers(2)) for q in net.question_ids} for _ in range(n_sessions)
    ]
    sids = [
        client.post("/sessions", json={"model": "b3"}).json()["session_id"]
        for _ in range(n_sessions)
    ]
    # drive all sessions concurrently, one answer per pass, shuffled order
    for _ in net.question_ids:
        order = rng.permutation(n_sessions)
        for i in order:
            nxt = client.get(f"/sessions/{sids[i]}/next").json()
            if nxt["done"]:
                continue
            q = nxt["question"]["id"]
            r = client.post(
                f"/sessions/{sids[i]}/answers",
                json={"question": q, "state": answer_sets[i][q] + 1},
            )
            assert r.status_code == 200
    for i in (0, 17, 63, 99):
        solo = TestSession(net)
        while (q := solo.select_next()) is not None:
            solo.submit_answer(q, answer_sets[i][q])
        est = client.get(f"/sessions/{sids[i]}/estimates").json()
        [want] = solo.skill_estimates()
        assert est["skill_posteriors"]["S1"] == [float(p) for p in want.probabilities]


def test_server_transcript_equals_cli_simulate(service, tmp_path):
    """Thin-shell check: the HTTP transcript and the CLI transcript for the
    same answer sequence are the same records."""
    import json as json_mod

    from click.testing import CliRunner

    from catbn.cli import cli
    from catbn.dataset import Dataset, save_csv
    from catbn.network import save_network
    from catbn.zoo import save_blueprint
    import pandas as pd

    client, net, bp = service
    answers = {q: (i + 1) % 2 for i, q in enumerate(net.question_ids)}

    # via HTTP
    sid = client.post("/sessions", json={"model": "b3"}).json()["session_id"]
    while True:
        nxt = client.get(f"/sessions/{sid}/next").json()
        if nxt["done"]:
            break
        q = nxt["question"]["id"]
        client.post(f"/sessions/{sid}/answers", json={"question": q, "state": answers[q] + 1})
    http_records = client.get(f"/sessions/{sid}/transcript").json()["records"]

    # via CLI simulate on a one-student dataset with the same answers
    frame = pd.DataFrame([{"student_id": "s1", **answers}])
    ds = Dataset(frame[["student_id", *bp.question_ids]], bp, "boolean")
    save_csv(ds, tmp_path / "one.csv")
    save_blueprint(bp, tmp_path / "bp.json")
    save_network(net, tmp_path / "net.json")
    result = CliRunner().invoke(
        cli,
        [
            "simulate", "--network", str(tmp_path / "net.json"),
            "--blueprint", str(tmp_path / "bp.json"),
            "--data", str(tmp_path / "one.csv"),
            "--student", "s1", "--scale", "boolean",
        ],
    )
    assert result.exit_code == 0, result.output
    cli_records = [json_mod.loads(line) for line in result.output.strip().splitlines()]
    assert cli_records == http_records


def test_info_evidence_on_create():
    truth, bp = boolean_truth(4, 3, seed=23)
    # attach one strongly informative covariate to the truth before fitting
    import numpy as np

    from catbn.network import Cpt, Network, Variable

    variables = truth.variables + (Variable("grade_math", 5, "info"),)
    rows = np.array(
        [
            [0.05, 0.10, 0.15, 0.30, 0.40],
            [0.10, 0.25, 0.30, 0.25, 0.10],
            [0.45, 0.30, 0.15, 0.07, 0.03],
        ]
    )
    cpts = truth.cpts + (Cpt("grade_math", ("S1",), rows),)
    net = Network(variables, cpts)
    client = TestClient(create_app({"m": net}, bp))

    flat = client.post("/sessions", json={"model": "m"}).json()
    informed = client.post(
        "/sessions", json={"model": "m", "info_evidence": {"grade_math": 1}}
    ).json()
    assert informed["skill_posteriors"]["S1"] != flat["skill_posteriors"]["S1"]
    bad = client.post("/sessions", json={"model": "m", "info_evidence": {"grade_math": 9}})
    assert bad.status_code == 422


def test_session_expiry():
    truth, bp = boolean_truth(3, 2, seed=2)
    client = TestClient(create_app({"m": truth}, bp, session_ttl=0.0))
    sid = client.post("/sessions", json={"model": "m"}).json()["session_id"]
    import time

    time.sleep(0.01)
    r = client.get(f"/sessions/{sid}/next")
    assert r.status_code == 404
    assert r.json()["code"] == "session_expired"
