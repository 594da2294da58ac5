"""HTTP+JSON facade for the web editor: motion CRUD, latent-optimization
jobs with polled progress, and encoding.

Jobs run on a small thread pool (FIFO beyond the concurrency limit); the
motion and job stores are lock-guarded and a failed job never touches the
motion store. State only moves forward: queued -> running -> done|failed.
"""

from __future__ import annotations

import itertools
import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .energy import EnergySpec, EnergyWeights, Keyframe, optimize
from .generative import GenerativeModel, LatentCode, decode_motion, encode
from .globalmotion import GlobalMotionModel
from .motion import MotionSequence, TrajectorySpec, save_motion
from . import __version__

TRACE_LIMIT = 1000  # points of best-energy trace returned while polling


@dataclass
class Job:
    id: str
    kind: str
    state: str = "queued"        # queued -> running -> done | failed
    progress: float = 0.0
    result_motion_id: str | None = None
    error: str | None = None
    trace: list = field(default_factory=list)
    energy: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"id": self.id, "kind": self.kind, "state": self.state,
                "progress": self.progress, "result_motion_id": self.result_motion_id,
                "error": self.error, "trace": self.trace[-TRACE_LIMIT:],
                "energy": self.energy}


class ServiceState:
    def __init__(self, generative: GenerativeModel, global_motion: GlobalMotionModel,
                 data_dir: str | None = None, max_jobs: int = 2):
        self.generative = generative
        self.global_motion = global_motion
        self.lock = threading.Lock()
        self.motions: dict[str, dict] = {}
        self.jobs: dict[str, Job] = {}
        self._counter = itertools.count(1)
        self.executor = ThreadPoolExecutor(max_workers=max_jobs)
        self.data_dir = Path(data_dir) if data_dir else None
        if self.data_dir:
            self.data_dir.mkdir(parents=True, exist_ok=True)
            for path in sorted(self.data_dir.glob("*.motion.json")):
                self.motions[path.stem.replace(".motion", "")] = json.loads(path.read_text())

    def next_id(self, prefix: str) -> str:
        return f"{prefix}-{next(self._counter):06d}"

    def put_motion(self, payload: dict) -> str:
        seq = MotionSequence.from_dict(payload)  # validates
        with self.lock:
            motion_id = self.next_id("motion")
            self.motions[motion_id] = payload
        if self.data_dir:
            save_motion(seq, self.data_dir / f"{motion_id}.motion.json")
        return motion_id

    def get_motion(self, motion_id: str) -> dict | None:
        with self.lock:
            return self.motions.get(motion_id)


def _parse_weights(raw: dict | None) -> EnergyWeights:
    return EnergyWeights.from_dict(raw) if raw else EnergyWeights()


def _spec_from_request(state: ServiceState, kind: str, body: dict) -> EnergySpec:
    """Materialize an EnergySpec from a job request.

    Keyframes may be inline poses or {motion_id, frames} references; the
    renavigate reference may be inline or a motion id.
    """
    gen = state.generative
    fps = gen.config.fps
    frames = int(body.get("frames") or gen.config.frames)
    common = {
        "weights": _parse_weights(body.get("weights")),
        "gamma": float(body.get("gamma", 0.1)),
        "budget": int(body.get("budget", 500)),
        "lr": float(body.get("lr", 0.05)),
        "seed": int(body.get("seed", 0)),
    }
    if kind == "inbetween":
        observed = [Keyframe.from_dict(k) for k in body.get("observed") or []]
        if body.get("motion_id") is not None:
            payload = state.get_motion(body["motion_id"])
            if payload is None:
                raise KeyError(body["motion_id"])
            seq = MotionSequence.from_dict(payload)
            observed += [Keyframe.from_sequence(seq, int(f))
                         for f in body.get("keyframes") or []]
        return EnergySpec(kind="inbetween", frames=frames, fps=fps,
                          observed=observed, **common)
    if kind == "renavigate":
        if body.get("reference_id") is not None:
            payload = state.get_motion(body["reference_id"])
            if payload is None:
                raise KeyError(body["reference_id"])
        else:
            payload = body.get("reference")
        if payload is None:
            raise ValueError("renavigate needs reference or reference_id")
        reference = MotionSequence.from_dict(payload)
        trajectory = TrajectorySpec.from_polyline(
            np.asarray(body["trajectory"], dtype=float), frames)
        return EnergySpec(kind="renavigate", frames=frames, fps=fps,
                          trajectory=trajectory, reference=reference, **common)
    raise ValueError(f"unknown job kind {kind!r}")


def _run_job(state: ServiceState, job: Job, spec_or_cfg) -> None:
    with state.lock:
        job.state = "running"
    try:
        if job.kind == "sample":
            cfg = spec_or_cfg
            rng = np.random.default_rng(cfg["seed"])
            z = LatentCode(rng.standard_normal(state.generative.config.z_local),
                           rng.standard_normal(state.generative.config.z_global))
            motion = decode_motion(state.generative, z, frames=cfg["frames"],
                                   global_model=state.global_motion)
            with state.lock:
                job.progress = 1.0
        else:
            spec = spec_or_cfg

            def on_iteration(it, energy, best):
                with state.lock:
                    job.progress = (it + 1) / max(spec.budget, 1)
                    job.trace.append({"iteration": it, "energy": energy,
                                      "best_energy": best})

            result = optimize(state.generative, state.global_motion, spec,
                              on_iteration=on_iteration)
            motion = result.motion
            with state.lock:
                job.energy = {"initial": result.initial_energy,
                              "best": result.best_energy, "terms": result.terms}
        motion_id = state.put_motion(motion.to_dict())
        with state.lock:
            job.result_motion_id = motion_id
            job.progress = 1.0
            job.state = "done"
    except Exception as err:
        with state.lock:
            job.state = "failed"
            job.error = f"{type(err).__name__}: {err}"


MOTION_SCHEMA = {
    "$id": "motionfield/motion.v1",
    "type": "object",
    "required": ["version", "skeleton", "fps", "frames"],
    "properties": {
        "version": {"const": 1},
        "fps": {"type": "number", "exclusiveMinimum": 0},
        "skeleton": {
            "type": "object",
            "required": ["names", "parents", "offsets"],
            "properties": {
                "names": {"type": "array", "items": {"type": "string"}},
                "parents": {"type": "array", "items": {"type": "integer"}},
                "offsets": {"type": "array",
                            "items": {"type": "array", "items": {"type": "number"},
                                      "minItems": 3, "maxItems": 3}},
                "foot_joints": {"type": "array", "items": {"type": "string"}},
            },
        },
        "frames": {
            "type": "object",
            "required": ["xr", "ro", "root_pos"],
            "properties": {
                "xr": {"type": "array"},
                "ro": {"type": "array"},
                "root_pos": {"type": "array"},
            },
        },
    },
}

JOB_REQUEST_SCHEMA = {
    "$id": "motionfield/job-request.v1",
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["inbetween", "renavigate", "sample"]},
        "frames": {"type": "integer", "minimum": 2},
        "budget": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer"},
        "gamma": {"type": "number", "exclusiveMinimum": 0},
        "lr": {"type": "number", "exclusiveMinimum": 0},
        "weights": {"type": "object"},
        "observed": {"type": "array"},
        "motion_id": {"type": "string"},
        "keyframes": {"type": "array", "items": {"type": "integer"}},
        "reference_id": {"type": "string"},
        "reference": {"type": "object"},
        "trajectory": {"type": "array",
                       "items": {"type": "array", "items": {"type": "number"},
                                 "minItems": 2, "maxItems": 2}},
    },
}

JOB_SCHEMA = {
    "$id": "motionfield/job.v1",
    "type": "object",
    "required": ["id", "kind", "state", "progress"],
    "properties": {
        "id": {"type": "string"},
        "kind": {"enum": ["inbetween", "renavigate", "sample"]},
        "state": {"enum": ["queued", "running", "done", "failed"]},
        "progress": {"type": "number", "minimum": 0, "maximum": 1},
        "result_motion_id": {"type": ["string", "null"]},
        "error": {"type": ["string", "null"]},
        "trace": {"type": "array"},
        "energy": {"type": "object"},
    },
}

SCHEMAS = {"motion": MOTION_SCHEMA, "job-request": JOB_REQUEST_SCHEMA, "job": JOB_SCHEMA}


def build_app(checkpoint=None, global_checkpoint=None, generative=None,
              global_motion=None, data_dir=None, max_jobs: int = 2,
              cors_origin: str = "*") -> FastAPI:
    if generative is None:
        generative = GenerativeModel.load(checkpoint)
    if global_motion is None:
        global_motion = GlobalMotionModel.load(global_checkpoint)
    state = ServiceState(generative, global_motion, data_dir=data_dir, max_jobs=max_jobs)
    app = FastAPI(title="motionfield service")
    app.state.service = state
    app.add_middleware(CORSMiddleware, allow_origins=[cors_origin],
                       allow_methods=["*"], allow_headers=["*"])

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        fields = [{"path": ".".join(str(p) for p in e["loc"]), "message": e["msg"]}
                  for e in exc.errors()]
        return JSONResponse(status_code=400, content={"error": "validation", "fields": fields})

    @app.get("/api/health")
    def health():
        return {"status": "ok", "version": __version__,
                "models": {"generative": generative.config.to_dict(),
                           "global_motion": global_motion.config.to_dict()}}

    @app.get("/api/schema")
    def schema_index():
        return {"schemas": sorted(SCHEMAS)}

    @app.get("/api/schema/{name}")
    def schema(name: str):
        if name not in SCHEMAS:
            return JSONResponse(status_code=404, content={"error": f"no schema {name!r}"})
        return SCHEMAS[name]

    @app.post("/api/motions", status_code=201)
    async def post_motion(request: Request):
        try:
            payload = await request.json()
            motion_id = state.put_motion(payload)
        except Exception as err:
            return JSONResponse(status_code=400,
                                content={"error": "validation",
                                         "fields": [{"path": "body", "message": str(err)}]})
        return {"id": motion_id}

    @app.get("/api/motions")
    def list_motions():
        with state.lock:
            return {"motions": sorted(state.motions)}

    @app.get("/api/motions/{motion_id}")
    def get_motion(motion_id: str):
        payload = state.get_motion(motion_id)
        if payload is None:
            return JSONResponse(status_code=404, content={"error": f"no motion {motion_id!r}"})
        return payload

    @app.post("/api/jobs", status_code=202)
    async def post_job(request: Request):
        body = await request.json()
        kind = body.get("kind")
        try:
            if kind == "sample":
                payload = {"seed": int(body.get("seed", 0)),
                           "frames": int(body.get("frames") or generative.config.frames)}
            elif kind in ("inbetween", "renavigate"):
                payload = _spec_from_request(state, kind, body)
            else:
                raise ValueError(f"unknown job kind {kind!r}")
        except KeyError as err:
            return JSONResponse(status_code=404, content={"error": f"no motion {err}"})
        except Exception as err:
            return JSONResponse(status_code=400,
                                content={"error": "validation",
                                         "fields": [{"path": "body", "message": str(err)}]})
        with state.lock:
            job = Job(id=state.next_id("job"), kind=kind)
            state.jobs[job.id] = job
        state.executor.submit(_run_job, state, job, payload)
        return {"id": job.id}

    @app.get("/api/jobs/{job_id}")
    def get_job(job_id: str):
        with state.lock:
            job = state.jobs.get(job_id)
            if job is None:
                return JSONResponse(status_code=404, content={"error": f"no job {job_id!r}"})
            return job.to_dict()

    @app.get("/api/jobs/{job_id}/result")
    def get_result(job_id: str):
        with state.lock:
            job = state.jobs.get(job_id)
            if job is None:
                return JSONResponse(status_code=404, content={"error": f"no job {job_id!r}"})
            if job.state != "done":
                return JSONResponse(status_code=404,
                                    content={"error": f"job {job_id!r} is {job.state}"})
            motion_id = job.result_motion_id
        return state.get_motion(motion_id)

    @app.post("/api/encode")
    async def post_encode(request: Request):
        body = await request.json()
        try:
            seq = MotionSequence.from_dict(body)
            posterior = encode(generative, seq)
        except Exception as err:
            return JSONResponse(status_code=400,
                                content={"error": "validation",
                                         "fields": [{"path": "body", "message": str(err)}]})
        return {"mu_local": posterior.mu_local.tolist(),
                "mu_global": posterior.mu_global.tolist(),
                "sigma_local": posterior.sigma_local.tolist(),
                "sigma_global": posterior.sigma_global.tolist()}

    return app
