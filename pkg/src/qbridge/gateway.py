"""Client-facing gateway: sessions, config-driven dispatch, result fan-in.

Each session gets its own randomly named output topic; a per-session
consumer thread turns result events from that topic into job records and
pushes finalized records to any connected live channels. Dispatch to the
function runtime is entirely config-driven: the gateway only knows how to
render a config record into an HTTP call.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import queue
import random
import threading
import time
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import requests

from . import config_store, qsim
from .broker import Broker, Subscription
from .config_store import ConfigSet, InvocationRequest, UnknownAlgorithm
from .events import EventParseError, ResultEvent
from .functions import EMOTICON_ALGORITHM_ID
from .httpd import HttpServer, Request, Response, Router
from .remote import add_broker_routes

log = logging.getLogger(__name__)

GATEWAY_GROUP = "gateway"

# status -> response doc; raises FunctionUnreachable on transport failure
Invoker = Callable[[InvocationRequest], tuple[int, dict]]
PostProcessor = Callable[[dict[str, int]], dict]


class GatewayError(Exception):
    """Base class for gateway errors."""


class UnknownSession(GatewayError):
    pass


class UnknownJob(GatewayError):
    pass


class WrongClient(GatewayError):
    pass


class FunctionUnreachable(GatewayError):
    pass


class FunctionRejected(GatewayError):
    """The function endpoint answered with an error response."""

    def __init__(self, process_job_id: str, message: str):
        self.process_job_id = process_job_id
        self.message = message
        super().__init__(message)


@dataclass(frozen=True)
class ClientSession:
    client_id: str
    output_topic: str
    created_at: float


@dataclass
class JobRecord:
    process_job_id: str
    client_id: str
    algorithm_id: str
    status: str  # PENDING | DONE | ERROR
    submitted_at: float
    completed_at: float | None = None
    result_payload: dict | None = None

    def to_wire(self) -> dict:
        return {
            "processJobId": self.process_job_id,
            "clientId": self.client_id,
            "algorithmId": self.algorithm_id,
            "status": self.status,
            "submittedAt": self.submitted_at,
            "completedAt": self.completed_at,
            "resultPayload": self.result_payload,
        }


def emoticon_post_processor(counts: dict[str, int]) -> dict:
    return {"frequencies": qsim.decode_counts(counts)}


DEFAULT_POST_PROCESSORS: dict[str, PostProcessor] = {
    EMOTICON_ALGORITHM_ID: emoticon_post_processor,
}


def default_invoker(invocation: InvocationRequest) -> tuple[int, dict]:
    try:
        response = requests.request(
            invocation.method,
            invocation.url,
            headers=invocation.headers,
            data=invocation.body.encode("utf-8"),
            timeout=30,
        )
    except requests.RequestException as exc:
        raise FunctionUnreachable(f"function endpoint unreachable: {exc}") from exc
    try:
        doc = response.json()
    except ValueError:
        doc = {}
    return response.status_code, doc if isinstance(doc, dict) else {}


class Gateway:
    """Session, dispatch and result-cache core (transport-independent)."""

    def __init__(
        self,
        broker: Broker,
        config: ConfigSet,
        token: str,
        seed: int = 0,
        invoker: Invoker | None = None,
        post_processors: dict[str, PostProcessor] | None = None,
    ):
        self._broker = broker
        self._config = config
        self._token = token
        self._rng = random.Random(seed)
        self._invoker = invoker or default_invoker
        self._post_processors = dict(
            DEFAULT_POST_PROCESSORS if post_processors is None else post_processors
        )
        self._lock = threading.RLock()
        self._sessions: dict[str, ClientSession] = {}
        self._jobs: dict[str, JobRecord] = {}
        self._subscribers: dict[str, list[queue.Queue]] = {}
        self._consumers: list[threading.Thread] = []
        self._stop = threading.Event()

    # -- sessions ------------------------------------------------------------

    def create_session(self) -> ClientSession:
        with self._lock:
            client_id = f"client-{self._rng.getrandbits(48):012x}"
            while True:
                topic = f"topic-{self._rng.getrandbits(32):08x}"
                if not self._broker.topic_exists(topic):
                    break
            self._broker.create_topic(topic)
            session = ClientSession(client_id=client_id, output_topic=topic, created_at=time.time())
            self._sessions[client_id] = session
            self._subscribers[client_id] = []
        consumer = threading.Thread(
            target=self._run_result_consumer,
            args=(session,),
            name=f"gateway-consumer-{topic}",
            daemon=True,
        )
        consumer.start()
        self._consumers.append(consumer)
        return session

    def get_session(self, client_id: str) -> ClientSession:
        with self._lock:
            session = self._sessions.get(client_id)
        if session is None:
            raise UnknownSession(f"no such session {client_id!r}")
        return session

    def sessions(self) -> list[ClientSession]:
        with self._lock:
            return list(self._sessions.values())

    # -- config --------------------------------------------------------------

    def algorithms(self) -> list[str]:
        return self._config.ids()

    def reload_config(self, path, variables: dict[str, str] | None = None) -> None:
        """Atomically swap in a freshly loaded config set."""
        new_set = config_store.load(path, variables)
        self._config = new_set

    # -- submission ----------------------------------------------------------

    def handle_submit(
        self,
        client_id: str,
        algorithm_id: str,
        params: dict,
        backend_type: str,
        shots: int,
    ) -> str:
        session = self.get_session(client_id)
        config = config_store.get(self._config, algorithm_id)  # raises before any network call

        process_job_id = str(uuid.UUID(int=self._rng.getrandbits(128), version=4))
        body = json.dumps(
            {
                "params": params,
                "backendType": backend_type,
                "clientId": session.client_id,
                "processJobId": process_job_id,
                "outputTopic": session.output_topic,
                "shots": shots,
            }
        )
        invocation = config_store.render_invocation(config, body, self._token)
        record = JobRecord(
            process_job_id=process_job_id,
            client_id=session.client_id,
            algorithm_id=algorithm_id,
            status="PENDING",
            submitted_at=time.time(),
        )
        # Stored before the call: a fast result may land while we wait.
        with self._lock:
            self._jobs[process_job_id] = record

        try:
            status, doc = self._invoker(invocation)
        except FunctionUnreachable:
            with self._lock:
                record.status = "ERROR"
                record.completed_at = time.time()
                record.result_payload = {"errorMessage": "function endpoint unreachable"}
            raise
        if status == 200 and doc.get("ok"):
            return process_job_id

        message = str(doc.get("errorMessage") or f"function returned HTTP {status}")
        with self._lock:
            record.status = "ERROR"
            record.completed_at = time.time()
            record.result_payload = {"errorMessage": message}
        raise FunctionRejected(process_job_id, message)

    # -- job queries ---------------------------------------------------------

    def get_job(self, client_id: str, process_job_id: str) -> JobRecord:
        with self._lock:
            record = self._jobs.get(process_job_id)
            if record is None:
                raise UnknownJob(f"no such job {process_job_id!r}")
            if record.client_id != client_id:
                raise WrongClient(f"job {process_job_id!r} belongs to another client")
            return record

    # -- live channel ----------------------------------------------------------

    def subscribe(self, client_id: str) -> queue.Queue:
        self.get_session(client_id)
        channel: queue.Queue = queue.Queue()
        with self._lock:
            self._subscribers[client_id].append(channel)
        return channel

    def unsubscribe(self, client_id: str, channel: queue.Queue) -> None:
        with self._lock:
            channels = self._subscribers.get(client_id, [])
            if channel in channels:
                channels.remove(channel)

    # -- result consumption ----------------------------------------------------

    def _run_result_consumer(self, session: ClientSession) -> None:
        subscription = Subscription(session.output_topic, GATEWAY_GROUP)
        while not self._stop.is_set():
            messages = self._broker.consume(subscription, max_messages=32, timeout=0.25)
            if not messages:
                continue
            for message in messages:
                try:
                    event = ResultEvent.from_json(message.payload)
                    self._apply_result(session, event)
                except EventParseError as exc:
                    log.warning(
                        "skipping malformed result event on %s at offset %d: %s",
                        session.output_topic,
                        message.offset,
                        exc,
                    )
            self._broker.commit(subscription, messages[-1].offset)

    def _apply_result(self, session: ClientSession, event: ResultEvent) -> None:
        with self._lock:
            record = self._jobs.get(event.process_job_id)
            if record is None:
                log.warning(
                    "result event for unknown job %s on %s; skipping",
                    event.process_job_id,
                    session.output_topic,
                )
                return
            if record.status != "PENDING":
                return  # duplicate delivery; already finalized
            if event.client_id != record.client_id:
                log.error(
                    "client mismatch on %s: event %s vs record %s; skipping",
                    session.output_topic,
                    event.client_id,
                    record.client_id,
                )
                return

            if event.status == "DONE":
                payload: dict = {"counts": event.counts, "backendName": event.backend_name}
                processor = self._post_processors.get(record.algorithm_id)
                if processor is not None:
                    try:
                        payload.update(processor(event.counts or {}))
                    except Exception as exc:  # noqa: BLE001 - decode failure becomes job error
                        record.status = "ERROR"
                        record.completed_at = time.time()
                        record.result_payload = {
                            "errorMessage": f"post-processing failed: {exc}",
                            "backendName": event.backend_name,
                        }
                        self._push_locked(session.client_id, record)
                        return
                record.status = "DONE"
                record.result_payload = payload
            else:
                message = event.error_message if event.status == "ERROR" else "job cancelled"
                record.status = "ERROR"
                record.result_payload = {
                    "errorMessage": message,
                    "backendName": event.backend_name,
                }
            record.completed_at = time.time()
            self._push_locked(session.client_id, record)

    def _push_locked(self, client_id: str, record: JobRecord) -> None:
        for channel in self._subscribers.get(client_id, []):
            channel.put(record.to_wire())

    def stop(self) -> None:
        self._stop.set()
        for consumer in self._consumers:
            consumer.join(timeout=5.0)
        self._consumers = []


class GatewayServer:
    """HTTP + live-channel surface over a Gateway.

    Also mounts the broker facade (for detached services and external
    verification tools) and optionally serves a static UI directory.
    """

    def __init__(
        self,
        gateway: Gateway,
        broker: Broker,
        host: str = "127.0.0.1",
        port: int = 0,
        health_callback: Callable[[], dict] | None = None,
        ui_dir: str | None = None,
    ):
        self.gateway = gateway
        self._health_callback = health_callback
        self._ui_dir = ui_dir
        self._closing = threading.Event()

        router = Router()
        router.add("POST", "/api/sessions", self._create_session)
        router.add("POST", "/api/jobs", self._submit_job)
        router.add("GET", "/api/jobs/{job_id}", self._get_job)
        router.add("GET", "/api/algorithms", self._algorithms)
        router.add("GET", "/api/stream", self._stream)
        router.add("GET", "/api/health", self._health)
        add_broker_routes(router, broker)
        if ui_dir:
            router.fallback = self._static
        self.http = HttpServer(router, host=host, port=port)

    @property
    def base_url(self) -> str:
        return self.http.base_url

    def start(self) -> None:
        self.http.start()

    def stop(self) -> None:
        self._closing.set()
        self.http.stop()

    # -- handlers -------------------------------------------------------------

    def _create_session(self, _request: Request) -> Response:
        session = self.gateway.create_session()
        return Response(
            200, {"clientId": session.client_id, "outputTopic": session.output_topic}
        )

    def _submit_job(self, request: Request) -> Response:
        doc = request.json()
        try:
            process_job_id = self.gateway.handle_submit(
                client_id=str(doc.get("clientId", "")),
                algorithm_id=str(doc.get("algorithmId", "")),
                params=doc.get("params") or {},
                backend_type=str(doc.get("backendType", "NOISELESS_SIM")),
                shots=int(doc.get("shots", 1024)),
            )
        except UnknownSession as exc:
            return Response(404, {"error": str(exc)})
        except UnknownAlgorithm as exc:
            return Response(404, {"error": str(exc)})
        except FunctionRejected as exc:
            return Response(
                502, {"error": exc.message, "processJobId": exc.process_job_id}
            )
        except FunctionUnreachable as exc:
            return Response(502, {"error": str(exc)})
        return Response(200, {"processJobId": process_job_id})

    def _get_job(self, request: Request) -> Response:
        client_id = request.query.get("clientId", "")
        try:
            record = self.gateway.get_job(client_id, request.path_params["job_id"])
        except UnknownJob as exc:
            return Response(404, {"error": str(exc)})
        except WrongClient as exc:
            return Response(403, {"error": str(exc)})
        return Response(200, record.to_wire())

    def _algorithms(self, _request: Request) -> Response:
        return Response(200, {"algorithms": self.gateway.algorithms()})

    def _health(self, _request: Request) -> Response:
        components = self._health_callback() if self._health_callback else {"gateway": True}
        all_up = all(components.values())
        return Response(
            200 if all_up else 503,
            {"status": "ok" if all_up else "degraded", "components": components},
        )

    def _stream(self, request: Request) -> Response:
        client_id = request.query.get("clientId", "")
        try:
            self.gateway.get_session(client_id)
        except UnknownSession as exc:
            return Response(404, {"error": str(exc)})

        def stream(wfile) -> None:
            channel = self.gateway.subscribe(client_id)
            try:
                wfile.write(b"retry: 1000\n\n")
                wfile.flush()
                idle = 0
                while not self._closing.is_set():
                    try:
                        item = channel.get(timeout=0.5)
                    except queue.Empty:
                        idle += 1
                        if idle % 10 == 0:
                            wfile.write(b": keep-alive\n\n")
                            wfile.flush()
                        continue
                    idle = 0
                    wfile.write(b"data: " + json.dumps(item).encode("utf-8") + b"\n\n")
                    wfile.flush()
            finally:
                self.gateway.unsubscribe(client_id, channel)

        return Response(200, stream=stream, content_type="text/event-stream")

    def _static(self, request: Request) -> Response:
        if request.method != "GET":
            return Response(405, {"error": "method not allowed"})
        base = Path(self._ui_dir).resolve()
        relative = request.path.lstrip("/") or "index.html"
        target = (base / relative).resolve()
        if not target.is_file() or base not in target.parents:
            return Response(404, {"error": f"no such file {request.path!r}"})
        content_type = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        return Response(200, raw=target.read_bytes(), content_type=content_type)
