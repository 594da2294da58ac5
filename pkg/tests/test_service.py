import time

import jsonschema
import numpy as np
import pytest
from fastapi.testclient import TestClient

from motionfield.service import SCHEMAS, build_app
from motionfield.energy import Keyframe


@pytest.fixture(scope="module")
def client(tiny_generative, tiny_global, heldout):
    app = build_app(generative=tiny_generative, global_motion=tiny_global, max_jobs=2)
    with TestClient(app) as c:
        yield c


def wait_for(client, job_id, timeout=120.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        job = client.get(f"/api/jobs/{job_id}").json()
        if job["state"] in ("done", "failed"):
            return job
        time.sleep(0.05)
    raise TimeoutError(f"job {job_id} did not finish")


class TestBasics:
    def test_health(self, client):
        r = client.get("/api/health")
        assert r.status_code == 200
        assert r.json()["status"] == "ok"

    def test_schemas_published(self, client):
        names = client.get("/api/schema").json()["schemas"]
        assert set(names) == {"job", "job-request", "motion"}
        for name in names:
            assert client.get(f"/api/schema/{name}").status_code == 200
        assert client.get("/api/schema/nope").status_code == 404

    def test_motion_crud(self, client, heldout):
        payload = heldout[0].to_dict()
        jsonschema.validate(payload, SCHEMAS["motion"])
        r = client.post("/api/motions", json=payload)
        assert r.status_code == 201
        motion_id = r.json()["id"]
        assert motion_id in client.get("/api/motions").json()["motions"]
        back = client.get(f"/api/motions/{motion_id}")
        assert back.status_code == 200
        assert back.json()["frames"]["xr"] == payload["frames"]["xr"]
        assert client.get("/api/motions/motion-999999").status_code == 404

    def test_malformed_motion_400(self, client):
        r = client.post("/api/motions", json={"version": 1, "nope": True})
        assert r.status_code == 400
        assert r.json()["error"] == "validation"

    def test_encode_endpoint(self, client, heldout):
        r = client.post("/api/encode", json=heldout[0].to_dict())
        assert r.status_code == 200
        body = r.json()
        assert len(body["mu_local"]) == 16
        assert all(s > 0 for s in body["sigma_local"])
        assert client.post("/api/encode", json={"bad": 1}).status_code == 400


class TestJobs:
    def test_inbetween_job_end_to_end(self, client, heldout):
        seq = heldout[0]
        motion_id = client.post("/api/motions", json=seq.to_dict()).json()["id"]
        body = {"kind": "inbetween", "motion_id": motion_id,
                "keyframes": [0, 20, 40, 63], "frames": 64, "budget": 25, "seed": 0}
        jsonschema.validate(body, SCHEMAS["job-request"])
        r = client.post("/api/jobs", json=body)
        assert r.status_code == 202
        job_id = r.json()["id"]
        job = wait_for(client, job_id)
        assert job["state"] == "done"
        jsonschema.validate(job, SCHEMAS["job"])
        result = client.get(f"/api/jobs/{job_id}/result")
        assert result.status_code == 200
        motion = result.json()
        assert len(motion["frames"]["xr"]) == 64
        # best-so-far trace is non-increasing
        bests = [p["best_energy"] for p in job["trace"]]
        assert all(b2 <= b1 + 1e-12 for b1, b2 in zip(bests, bests[1:]))
        assert job["progress"] == 1.0

    def test_sample_job(self, client):
        r = client.post("/api/jobs", json={"kind": "sample", "seed": 3, "frames": 32})
        assert r.status_code == 202
        job = wait_for(client, r.json()["id"])
        assert job["state"] == "done"
        motion = client.get(f"/api/jobs/{job['id']}/result").json()
        assert len(motion["frames"]["xr"]) == 32

    def test_renavigate_job(self, client, heldout):
        seq = heldout[1]
        motion_id = client.post("/api/motions", json=seq.to_dict()).json()["id"]
        traj = [[0.0, 0.0], [0.0, 60.0]]
        body = {"kind": "renavigate", "reference_id": motion_id, "trajectory": traj,
                "frames": 64, "budget": 10, "seed": 1}
        r = client.post("/api/jobs", json=body)
        assert r.status_code == 202
        job = wait_for(client, r.json()["id"])
        assert job["state"] == "failed" or job["state"] == "done"
        assert job["state"] == "done", job.get("error")

    def test_result_404_until_done(self, client, heldout):
        seq = heldout[0]
        motion_id = client.post("/api/motions", json=seq.to_dict()).json()["id"]
        body = {"kind": "inbetween", "motion_id": motion_id,
                "keyframes": [0, 63], "frames": 64, "budget": 200, "seed": 0}
        job_id = client.post("/api/jobs", json=body).json()["id"]
        early = client.get(f"/api/jobs/{job_id}/result")
        # depending on scheduling the job may have already finished; if not,
        # the result endpoint must 404
        if early.status_code != 200:
            assert early.status_code == 404
        wait_for(client, job_id)

    def test_bad_job_kind_400(self, client):
        assert client.post("/api/jobs", json={"kind": "teleport"}).status_code == 400

    def test_unknown_motion_404(self, client):
        body = {"kind": "inbetween", "motion_id": "motion-424242", "keyframes": [0, 5]}
        assert client.post("/api/jobs", json=body).status_code == 404

    def test_invalid_spec_400(self, client, heldout):
        seq = heldout[0]
        motion_id = client.post("/api/motions", json=seq.to_dict()).json()["id"]
        body = {"kind": "inbetween", "motion_id": motion_id, "keyframes": []}
        assert client.post("/api/jobs", json=body).status_code == 400

    def test_failed_job_keeps_store_intact(self, client, heldout):
        seq = heldout[0]
        motion_id = client.post("/api/motions", json=seq.to_dict()).json()["id"]
        before = set(client.get("/api/motions").json()["motions"])
        # frames beyond the model's training window pass submission checks
        # but fail inside the worker when the task grid is built
        body = {"kind": "inbetween", "motion_id": motion_id,
                "keyframes": [0, 63], "frames": 300, "budget": 5, "seed": 0}
        job_id = client.post("/api/jobs", json=body).json()["id"]
        job = wait_for(client, job_id)
        assert job["state"] == "failed"
        assert job["error"]
        after = set(client.get("/api/motions").json()["motions"])
        assert after == before


class TestPersistence:
    def test_data_dir_roundtrip(self, tiny_generative, tiny_global, heldout, tmp_path):
        app = build_app(generative=tiny_generative, global_motion=tiny_global,
                        data_dir=str(tmp_path / "store"))
        with TestClient(app) as c:
            motion_id = c.post("/api/motions", json=heldout[0].to_dict()).json()["id"]
        app2 = build_app(generative=tiny_generative, global_motion=tiny_global,
                         data_dir=str(tmp_path / "store"))
        with TestClient(app2) as c2:
            assert motion_id in c2.get("/api/motions").json()["motions"]
            assert c2.get(f"/api/motions/{motion_id}").status_code == 200
