"""HTTP translation service: translate, build, poll, list.

Build jobs run strictly one at a time in submission order on a single
worker thread; clients poll GET /jobs/{id} for progress. Models that
finish a build are registered and immediately servable. All request
validation is done by hand so error payloads carry stable ``code``
fields (malformed JSON is 400, an unknown model 404, everything else
422) instead of framework-shaped ones.
"""

import json
import queue
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import __version__
from .checkpoint import load_model, read_manifest
from .config import config_from_dict
from .errors import EnsembleError, ForgeError
from .green import green_report
from .inference import DECODE_MODES, DecodeConfig, check_ensemble_fingerprints, decode
from .pipeline import run_pipeline
from .registry import ModelRegistry
from .subword import decode_pieces, encode

JOB_STATES = ("queued", "running", "done", "failed")


def _error(status, code, message):
    return JSONResponse(status_code=status, content={"code": code, "message": message})


class RequestProblem(Exception):
    """Carries a ready-to-send error response for bad input."""

    def __init__(self, status, code, message):
        super().__init__(message)
        self.response = _error(status, code, message)


@dataclass
class BuildJob:
    job_id: str
    config: object
    state: str = "queued"
    error: str = None
    model_id: str = None
    progress: dict = field(default_factory=lambda: {"step": 0, "accuracy": None, "ppl": None})
    telemetry: list = field(default_factory=list)
    started_at: float = None
    finished_at: float = None

    def running_hours(self, now):
        if self.started_at is None:
            return 0.0
        end = self.finished_at if self.finished_at is not None else now
        return max(end - self.started_at, 0.0) / 3600.0


class ForgeService:
    """Registry, model cache, and the single-worker build queue."""

    def __init__(self, registry_root):
        self.registry = ModelRegistry(registry_root)
        self._models = {}
        self._jobs = {}
        self._queue = queue.Queue()
        self._lock = threading.Lock()
        self._job_counter = 0
        self._worker = None

    # -- models -------------------------------------------------------

    def load(self, model_id):
        entry = self.registry.get(model_id)
        if entry is None:
            raise RequestProblem(404, "model_not_found", "unknown model: %s" % model_id)
        with self._lock:
            cached = self._models.get(model_id)
        if cached is not None:
            return cached
        loaded = load_model(entry["path"])
        with self._lock:
            self._models[model_id] = loaded
        return loaded

    def translate(self, model_ids, sentences, decode_config):
        loaded = [self.load(mid) for mid in model_ids]
        check_ensemble_fingerprints([m[2].get("subword_fingerprint") for m in loaded])
        models = [m[0] for m in loaded]
        subword = loaded[0][1]
        translations, logprobs = [], []
        for sentence in sentences:
            src = encode(subword, sentence)
            if not src.ids:
                translations.append("")
                logprobs.append(0.0)
                continue
            hyp = decode(models, src, decode_config)
            translations.append(decode_pieces(subword, list(hyp.tokens)))
            logprobs.append(hyp.score)
        return translations, logprobs

    # -- build jobs ---------------------------------------------------

    def submit(self, config):
        with self._lock:
            self._job_counter += 1
            job = BuildJob(job_id="job-%d" % self._job_counter, config=config)
            self._jobs[job.job_id] = job
            if self._worker is None:
                self._worker = threading.Thread(target=self._run_jobs, daemon=True,
                                                name="nmtforge-build-worker")
                self._worker.start()
        self._queue.put(job)
        return job

    def get_job(self, job_id):
        with self._lock:
            return self._jobs.get(job_id)

    def _run_jobs(self):
        while True:
            job = self._queue.get()
            with self._lock:
                job.state = "running"
                job.started_at = time.monotonic()
            try:
                result = run_pipeline(job.config, on_record=lambda r: self._record(job, r))
                manifest = read_manifest(result.model_dir)
                model_id = self.registry.unique_id(result.model_id)
                self.registry.register(
                    model_id, result.model_dir,
                    config={"model": manifest["config"],
                            "optimizer": job.config.optimizer.to_dict(),
                            "seed": job.config.seed},
                    metrics=manifest.get("metrics", {}),
                    fingerprint=manifest.get("subword_fingerprint"))
                with self._lock:
                    job.model_id = model_id
                    job.state = "done"
                    job.finished_at = time.monotonic()
            except Exception as exc:
                with self._lock:
                    job.state = "failed"
                    job.error = str(exc)
                    job.finished_at = time.monotonic()

    def _record(self, job, record):
        with self._lock:
            job.telemetry.append(record)
            job.progress = {"step": record["step"], "accuracy": record["acc"],
                            "ppl": record["ppl"]}

    def job_status(self, job):
        with self._lock:
            green_cfg = job.config.green
            snapshot = green_report(job.running_hours(time.monotonic()),
                                    green_cfg.watts, green_cfg.factor_g_per_kwh,
                                    green_cfg.region)
            return {
                "job_id": job.job_id,
                "state": job.state,
                "model_id": job.model_id,
                "error": job.error,
                "progress": dict(job.progress),
                "telemetry": [dict(r) for r in job.telemetry],
                "latest": dict(job.telemetry[-1]) if job.telemetry else None,
                "green": snapshot.to_dict(),
            }


async def _json_body(request):
    raw = await request.body()
    try:
        body = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as exc:
        raise RequestProblem(400, "malformed_json", "request body is not valid JSON: %s" % exc)
    if not isinstance(body, dict):
        raise RequestProblem(400, "malformed_json", "request body must be a JSON object")
    return body


_TRANSLATE_KEYS = frozenset(("model", "ensemble", "sentences", "beam_width", "mode"))


def _parse_translate(body):
    unknown = sorted(set(body) - _TRANSLATE_KEYS)
    if unknown:
        raise RequestProblem(422, "invalid_request",
                             "unknown keys: %s" % ", ".join(unknown))
    has_model = body.get("model") is not None
    has_ensemble = body.get("ensemble") is not None
    if has_model == has_ensemble:
        raise RequestProblem(422, "invalid_request",
                             "provide exactly one of 'model' or 'ensemble'")
    if has_model:
        if not isinstance(body["model"], str):
            raise RequestProblem(422, "invalid_request", "model must be a string id")
        model_ids = [body["model"]]
    else:
        ids = body["ensemble"]
        if not isinstance(ids, list) or not ids or \
                any(not isinstance(i, str) for i in ids):
            raise RequestProblem(422, "invalid_request",
                                 "ensemble must be a non-empty list of model ids")
        model_ids = ids
    sentences = body.get("sentences")
    if not isinstance(sentences, list) or any(not isinstance(s, str) for s in sentences):
        raise RequestProblem(422, "invalid_request", "sentences must be a list of strings")
    decode_config = DecodeConfig()
    if body.get("beam_width") is not None:
        width = body["beam_width"]
        if isinstance(width, bool) or not isinstance(width, int) or width < 1:
            raise RequestProblem(422, "invalid_request",
                                 "beam_width must be a positive integer")
        decode_config = replace(decode_config, beam_width=width)
    if body.get("mode") is not None:
        mode = body["mode"]
        if mode not in DECODE_MODES:
            raise RequestProblem(422, "invalid_request",
                                 "mode must be one of: %s" % ", ".join(DECODE_MODES))
        decode_config = replace(decode_config, mode=mode)
    return model_ids, sentences, decode_config.validate()


def create_app(registry_root, ui_dir=None):
    service = ForgeService(registry_root)
    app = FastAPI(title="nmtforge", version=__version__)
    app.state.service = service

    @app.exception_handler(RequestProblem)
    async def handle_problem(request, exc):
        return exc.response

    @app.exception_handler(ForgeError)
    async def handle_forge_error(request, exc):
        if isinstance(exc, EnsembleError):
            return _error(422, exc.code, str(exc))
        return _error(500, exc.code, str(exc))

    @app.get("/health")
    async def health():
        return {"status": "ok", "version": __version__, "models": len(service.registry)}

    @app.get("/models")
    async def models():
        return {"models": service.registry.list_entries()}

    @app.post("/translate")
    async def translate(request: Request):
        body = await _json_body(request)
        model_ids, sentences, decode_config = _parse_translate(body)
        translations, logprobs = service.translate(model_ids, sentences, decode_config)
        return {"translations": translations, "logprobs": logprobs}

    @app.post("/build")
    async def build(request: Request):
        body = await _json_body(request)
        try:
            config = config_from_dict(body)
        except ForgeError as exc:
            raise RequestProblem(422, "invalid_config", str(exc))
        missing = [k for k in ("source", "target") if not getattr(config, k)]
        if missing:
            raise RequestProblem(422, "invalid_config",
                                 "config is missing corpus paths: %s" % ", ".join(missing))
        # models built by the service live under its own registry root
        config = replace(config, out_dir=str(service.registry.root / "models"))
        job = service.submit(config)
        return {"job_id": job.job_id}

    @app.get("/jobs/{job_id}")
    async def job_status(job_id: str):
        job = service.get_job(job_id)
        if job is None:
            raise RequestProblem(404, "job_not_found", "unknown job: %s" % job_id)
        return service.job_status(job)

    if ui_dir is None:
        ui_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    ui_dir = Path(ui_dir)
    if ui_dir.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
