import base64
import json
import threading
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from conftest import make_tuple
from practicegp.dataset import Dataset, PracticeMode, dumps_csv, save_csv
from practicegp.gp import Family, KernelSpec, from_hyperparameters, to_json
from practicegp.policy import policy_map
from practicegp.score_perf import Note, Score, build_smf, score_to_json
from practicegp.service import ServiceConfig, Storage, create_app, derive_tuples
from practicegp.simulator import ImprovementModel, TeacherRule, simulate_dataset


@pytest.fixture
def data_dir(tmp_path):
    return tmp_path / "data"


@pytest.fixture
def client(data_dir):
    app = create_app(ServiceConfig(data_dir=str(data_dir)))
    with TestClient(app) as c:
        yield c


def make_session(client, bpm=80.0):
    response = client.post(
        "/api/sessions", json={"learner_id": "lena", "piece_id": "scale4", "bpm": bpm}
    )
    assert response.status_code == 200
    return response.json()["session_id"]


def install_model(data_dir, timing_bias=0.6):
    """Write a tiny deterministic model and activate it."""
    x = np.array(
        [[0.5, 0.5, 0.0, 80.0], [0.5, 0.5, 1.0, 80.0], [0.2, 0.7, 0.0, 80.0], [0.2, 0.7, 1.0, 80.0]]
    )
    y = np.array([0.1, 0.1 + timing_bias, 0.15, 0.15 + timing_bias])
    spec = KernelSpec(family=Family.RBF, variance=0.5, lengthscales=(1.0, 1.0, 1.0, 50.0))
    model = from_hyperparameters(spec, 1e-6, x, y)
    storage = Storage(data_dir)
    storage.save_model("seed-model", model, {"family": "rbf", "note": "test fixture"})
    storage.write_active_pointer("seed-model")
    return model


class TestHealthAndErrors:
    def test_health(self, client):
        body = client.get("/api/health").json()
        assert body["status"] == "ok"
        assert body["gp_backend"] in ("compiled", "numpy")

    def test_error_envelope_shape(self, client):
        response = client.get("/api/sessions/nope")
        assert response.status_code == 404
        body = response.json()
        assert set(body) == {"code", "message", "detail"}
        assert body["code"] == "not_found"


class TestSessions:
    def test_create_returns_fresh_ids(self, client):
        a = make_session(client)
        b = make_session(client)
        assert a != b

    def test_session_survives_restart(self, data_dir):
        app1 = create_app(ServiceConfig(data_dir=str(data_dir)))
        with TestClient(app1) as c1:
            session_id = make_session(c1)
        app2 = create_app(ServiceConfig(data_dir=str(data_dir)))
        with TestClient(app2) as c2:
            listed = c2.get("/api/sessions").json()["sessions"]
            assert session_id in [s["session_id"] for s in listed]

    def test_phases_progress(self, client):
        session_id = make_session(client)
        view = client.get(f"/api/sessions/{session_id}").json()
        assert view["phase"] == "AWAITING_PRE"
        client.post(
            f"/api/sessions/{session_id}/performances",
            json={"phase": "PRE", "pitch_error": 0.3, "timing_error": 0.2},
        )
        assert client.get(f"/api/sessions/{session_id}").json()["phase"] == "AWAITING_PRACTICE"
        client.post(f"/api/sessions/{session_id}/practice", json={"pm": 1, "bpm": 60})
        assert client.get(f"/api/sessions/{session_id}").json()["phase"] == "AWAITING_POST"


class TestPerformances:
    def test_manual_errors_echoed(self, client):
        session_id = make_session(client)
        body = client.post(
            f"/api/sessions/{session_id}/performances",
            json={"phase": "PRE", "pitch_error": 0.3, "timing_error": 0.2},
        ).json()
        assert body == {"pitch_error": 0.3, "timing_error": 0.2, "tuple_recorded": False}

    def test_full_unit_appends_exactly_one_tuple(self, client, data_dir):
        session_id = make_session(client)
        client.post(
            f"/api/sessions/{session_id}/performances",
            json={"phase": "PRE", "pitch_error": 0.4, "timing_error": 0.3},
        )
        client.post(f"/api/sessions/{session_id}/practice", json={"pm": 0, "bpm": 70})
        body = client.post(
            f"/api/sessions/{session_id}/performances",
            json={"phase": "POST", "pitch_error": 0.2, "timing_error": 0.25},
        ).json()
        assert body["tuple_recorded"] is True
        storage = Storage(data_dir)
        recorded = storage.load_recorded()
        assert len(recorded) == 1
        t = recorded.tuples[0]
        assert (t.p_pre, t.t_pre, int(t.pm), t.bpm, t.p_post, t.t_post) == (
            0.4, 0.3, 0, 70.0, 0.2, 0.25,
        )

    def test_post_without_open_unit_conflict(self, client):
        session_id = make_session(client)
        response = client.post(
            f"/api/sessions/{session_id}/performances",
            json={"phase": "POST", "pitch_error": 0.2, "timing_error": 0.2},
        )
        assert response.status_code == 409

    def test_midi_payload_scored_against_score(self, client, data_dir):
        score = Score(
            notes=tuple(Note(pitch=60 + i, onset_beats=float(i), duration_beats=1.0) for i in range(4)),
            piece_id="scale4",
        )
        Storage(data_dir).save_score(score)
        # perfect performance at 120 BPM: quarter notes each 480 ticks apart
        raw = build_smf([(60 + i, 480 * i, 240) for i in range(4)])
        session_id = make_session(client)
        body = client.post(
            f"/api/sessions/{session_id}/performances",
            json={"phase": "PRE", "midi_base64": base64.b64encode(raw).decode()},
        ).json()
        assert body["pitch_error"] == 0.0
        assert body["timing_error"] == 0.0

    def test_malformed_midi_rejected(self, client, data_dir):
        Storage(data_dir).save_score(
            Score(notes=(Note(pitch=60, onset_beats=0.0, duration_beats=1.0),), piece_id="scale4")
        )
        session_id = make_session(client)
        response = client.post(
            f"/api/sessions/{session_id}/performances",
            json={"phase": "PRE", "midi_base64": base64.b64encode(b"garbage").decode()},
        )
        assert response.status_code == 422

    def test_out_of_range_errors_rejected(self, client):
        session_id = make_session(client)
        response = client.post(
            f"/api/sessions/{session_id}/performances",
            json={"phase": "PRE", "pitch_error": 1.4, "timing_error": 0.2},
        )
        assert response.status_code == 422


class TestRecommendation:
    def test_requires_model(self, client):
        session_id = make_session(client)
        client.post(
            f"/api/sessions/{session_id}/performances",
            json={"phase": "PRE", "pitch_error": 0.5, "timing_error": 0.5},
        )
        response = client.get(f"/api/sessions/{session_id}/recommendation")
        assert response.status_code == 409
        assert response.json()["code"] == "model_not_trained"

    def test_requires_pre(self, data_dir):
        install_model(data_dir)
        with TestClient(create_app(ServiceConfig(data_dir=str(data_dir)))) as client:
            session_id = make_session(client)
            assert client.get(f"/api/sessions/{session_id}/recommendation").status_code == 409

    def test_argmax_over_candidates_matches_direct_predicts(self, data_dir):
        model = install_model(data_dir)
        with TestClient(create_app(ServiceConfig(data_dir=str(data_dir)))) as client:
            session_id = make_session(client)
            client.post(
                f"/api/sessions/{session_id}/performances",
                json={"phase": "PRE", "pitch_error": 0.5, "timing_error": 0.5},
            )
            body = client.get(
                f"/api/sessions/{session_id}/recommendation", params={"bpms": "50,100"}
            ).json()
            from practicegp.policy import recommend

            expected = []
            for bpm in (50.0, 100.0):
                rec = recommend(model, 0.5, 0.5, bpm)
                expected.append((rec.mean_pitch, 0, bpm))
                expected.append((rec.mean_timing, 1, bpm))
            best = max(expected, key=lambda e: e[0])
            assert body["pm"] == best[1]
            assert body["bpm"] == best[2]
            assert body["mean"] == pytest.approx(best[0])
            assert len(body["alternatives"]) == 4

    def test_single_candidate_reduces_to_plain_recommend(self, data_dir):
        model = install_model(data_dir)
        with TestClient(create_app(ServiceConfig(data_dir=str(data_dir)))) as client:
            session_id = make_session(client)
            client.post(
                f"/api/sessions/{session_id}/performances",
                json={"phase": "PRE", "pitch_error": 0.4, "timing_error": 0.6},
            )
            body = client.get(
                f"/api/sessions/{session_id}/recommendation", params={"bpms": "80"}
            ).json()
            from practicegp.policy import recommend

            rec = recommend(model, 0.4, 0.6, 80.0)
            assert body["pm"] == int(rec.chosen_pm)
            assert body["mean"] == pytest.approx(rec.mean)

    def test_recommendation_event_logged(self, data_dir):
        install_model(data_dir)
        with TestClient(create_app(ServiceConfig(data_dir=str(data_dir)))) as client:
            session_id = make_session(client)
            client.post(
                f"/api/sessions/{session_id}/performances",
                json={"phase": "PRE", "pitch_error": 0.5, "timing_error": 0.5},
            )
            client.get(f"/api/sessions/{session_id}/recommendation")
            events = client.get(f"/api/sessions/{session_id}").json()["events"]
            assert events[-1]["kind"] == "RECOMMENDATION"


class TestTraining:
    def test_job_completes_and_activates_model(self, client, data_dir):
        ds = simulate_dataset(TeacherRule.reference(), ImprovementModel(), 24, seed=5)
        save_csv(ds, data_dir / "datasets" / "tiny.csv")
        job_id = client.post(
            "/api/train", json={"dataset": "tiny.csv", "family": "rbf", "budget": 1, "seed": 1}
        ).json()["job_id"]
        deadline = time.time() + 120
        while time.time() < deadline:
            status = client.get(f"/api/jobs/{job_id}").json()
            if status["state"] in ("DONE", "FAILED"):
                break
            time.sleep(0.3)
        assert status["state"] == "DONE", status
        assert status["progress"] == 1.0
        models = client.get("/api/models").json()
        assert models["active"] == status["result_ref"]

    def test_bad_dataset_ref_fails(self, client):
        job_id = client.post(
            "/api/train", json={"dataset": "missing.csv", "budget": 1}
        ).json()["job_id"]
        deadline = time.time() + 30
        while time.time() < deadline:
            status = client.get(f"/api/jobs/{job_id}").json()
            if status["state"] in ("DONE", "FAILED"):
                break
            time.sleep(0.1)
        assert status["state"] == "FAILED"
        assert "missing.csv" in status["message"]

    def test_unknown_family_rejected(self, client):
        response = client.post("/api/train", json={"dataset": "recorded", "family": "cubic"})
        assert response.status_code == 422

    def test_unknown_job_404(self, client):
        assert client.get("/api/jobs/does-not-exist").status_code == 404


class TestPolicyMapEndpoint:
    def test_requires_model(self, client):
        assert client.get("/api/policy-map").status_code == 409

    def test_matches_library_csv_bytes(self, data_dir):
        model = install_model(data_dir)
        with TestClient(create_app(ServiceConfig(data_dir=str(data_dir)))) as client:
            text = client.get(
                "/api/policy-map", params={"bpm": 80, "resolution": 7}
            ).text
            assert text == policy_map(model, bpm=80.0, resolution=7).to_csv()

    def test_resolution_2_has_4_cells(self, data_dir):
        install_model(data_dir)
        with TestClient(create_app(ServiceConfig(data_dir=str(data_dir)))) as client:
            text = client.get("/api/policy-map", params={"bpm": 80, "resolution": 2}).text
            assert len(text.strip().split("\n")) == 1 + 4


class TestEventSourcing:
    def test_replay_reconstructs_recorded_dataset(self, client, data_dir):
        for errors in ((0.4, 0.3, 0.2, 0.25), (0.6, 0.5, 0.5, 0.45)):
            session_id = make_session(client)
            client.post(
                f"/api/sessions/{session_id}/performances",
                json={"phase": "PRE", "pitch_error": errors[0], "timing_error": errors[1]},
            )
            client.post(f"/api/sessions/{session_id}/practice", json={"pm": 1, "bpm": 90})
            client.post(
                f"/api/sessions/{session_id}/performances",
                json={"phase": "POST", "pitch_error": errors[2], "timing_error": errors[3]},
            )
        storage = Storage(data_dir)
        assert storage.replay_recorded().tuples == storage.load_recorded().tuples

    def test_event_log_is_append_only_with_increasing_seq(self, client, data_dir):
        session_id = make_session(client)
        client.post(
            f"/api/sessions/{session_id}/performances",
            json={"phase": "PRE", "pitch_error": 0.4, "timing_error": 0.3},
        )
        client.post(f"/api/sessions/{session_id}/practice", json={"pm": 0, "bpm": 70})
        events = Storage(data_dir).load_events(session_id)
        assert [e.seq for e in events] == list(range(len(events)))

    def test_every_persisted_tuple_validates(self, client, data_dir):
        session_id = make_session(client)
        client.post(
            f"/api/sessions/{session_id}/performances",
            json={"phase": "PRE", "pitch_error": 0.9, "timing_error": 0.8},
        )
        client.post(f"/api/sessions/{session_id}/practice", json={"pm": 1, "bpm": 100})
        client.post(
            f"/api/sessions/{session_id}/performances",
            json={"phase": "POST", "pitch_error": 0.5, "timing_error": 0.4},
        )
        # load_recorded re-validates every row through PracticeTuple
        assert len(Storage(data_dir).load_recorded()) == 1


class TestAtomicActivation:
    def test_concurrent_recommendations_see_old_or_new_model_only(self, data_dir):
        install_model(data_dir, timing_bias=0.6)
        app = create_app(ServiceConfig(data_dir=str(data_dir)))
        registry = app.state.registry
        with TestClient(app) as client:
            session_id = make_session(client)
            client.post(
                f"/api/sessions/{session_id}/performances",
                json={"phase": "PRE", "pitch_error": 0.5, "timing_error": 0.5},
            )
            stop = threading.Event()
            seen = set()
            failures = []

            def hammer():
                while not stop.is_set():
                    body = client.get(
                        f"/api/sessions/{session_id}/recommendation", params={"bpms": "80"}
                    ).json()
                    if "mean" not in body:
                        failures.append(body)
                        return
                    seen.add((body["model_id"], round(body["mean"], 12)))

            threads = [threading.Thread(target=hammer) for _ in range(3)]
            for t in threads:
                t.start()
            # swap the active model several times while requests are in flight
            x = np.array([[0.5, 0.5, 0.0, 80.0], [0.5, 0.5, 1.0, 80.0]])
            spec = KernelSpec(family=Family.RBF, variance=0.5, lengthscales=(1.0, 1.0, 1.0, 50.0))
            for k in range(4):
                model = from_hyperparameters(spec, 1e-6, x, np.array([0.1, 0.2 + 0.1 * k]))
                registry.register_and_activate(model, {"family": "rbf", "k": k})
                time.sleep(0.05)
            stop.set()
            for t in threads:
                t.join()
            assert not failures
            # each model id maps to exactly one mean: no torn reads
            by_model = {}
            for model_id, mean in seen:
                by_model.setdefault(model_id, set()).add(mean)
            assert all(len(means) == 1 for means in by_model.values())
