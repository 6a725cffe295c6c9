"""HTTP facades for the broker and the provider.

The in-process objects stay the source of truth; these classes expose them
over HTTP (server side) and mirror their interfaces from another process
(client side), so the function runtime and the collector can run detached
from the gateway that owns the broker.
"""

from __future__ import annotations

import logging

import requests

from . import broker as broker_mod
from . import provider as provider_mod
from .broker import Message, Subscription
from .httpd import HttpServer, Request, Response, Router
from .provider import Device, JobState, ProviderJob
from .qsim import CircuitSpec, NoiseModel

log = logging.getLogger(__name__)

_BROKER_ERRORS = {
    "DuplicateTopic": (409, broker_mod.DuplicateTopic),
    "InvalidName": (400, broker_mod.InvalidName),
    "UnknownTopic": (404, broker_mod.UnknownTopic),
    "OffsetRegression": (409, broker_mod.OffsetRegression),
}
_PROVIDER_ERRORS = {
    "UnknownDevice": (404, provider_mod.UnknownDevice),
    "UnknownJob": (404, provider_mod.UnknownJob),
    "CircuitTooWide": (422, provider_mod.CircuitTooWide),
    "WaitTimeout": (408, provider_mod.WaitTimeout),
}


def _error_response(exc: Exception, table: dict) -> Response:
    name = type(exc).__name__
    status = table.get(name, (500, None))[0]
    doc = {"error": str(exc), "errorType": name}
    if hasattr(exc, "provider_job_id"):
        doc["providerJobId"] = exc.provider_job_id
    return Response(status, doc)


def _raise_remote(doc: dict, table: dict, fallback: type[Exception]) -> None:
    name = doc.get("errorType", "")
    message = doc.get("error", "remote call failed")
    entry = table.get(name)
    if entry is not None:
        exc_type = entry[1]
        if exc_type is provider_mod.UnknownJob:
            raise exc_type(doc.get("providerJobId", message))
        raise exc_type(message)
    raise fallback(message)


# -- broker over HTTP ---------------------------------------------------------


def add_broker_routes(router: Router, broker: broker_mod.Broker) -> None:
    """Mount the broker facade under /broker on an existing router."""

    def create_topic(request: Request) -> Response:
        try:
            broker.create_topic(str(request.json().get("name", "")))
        except broker_mod.BrokerError as exc:
            return _error_response(exc, _BROKER_ERRORS)
        return Response(201, {"created": True})

    def topic_info(request: Request) -> Response:
        name = request.path_params["topic"]
        if not broker.topic_exists(name):
            return Response(404, {"error": f"no such topic {name!r}", "errorType": "UnknownTopic"})
        return Response(200, {"name": name})

    def produce(request: Request) -> Response:
        doc = request.json()
        try:
            offset = broker.produce(request.path_params["topic"], str(doc.get("payload", "")))
        except broker_mod.BrokerError as exc:
            return _error_response(exc, _BROKER_ERRORS)
        except ValueError as exc:
            return Response(400, {"error": str(exc), "errorType": "ValueError"})
        return Response(200, {"offset": offset})

    def consume(request: Request) -> Response:
        subscription = Subscription(
            request.path_params["topic"], request.query.get("group", "default")
        )
        max_messages = int(request.query.get("max", "1"))
        timeout = float(request.query.get("timeoutMs", "0")) / 1000.0
        try:
            messages = broker.consume(subscription, max_messages, timeout=timeout)
        except broker_mod.BrokerError as exc:
            return _error_response(exc, _BROKER_ERRORS)
        except ValueError as exc:
            return Response(400, {"error": str(exc), "errorType": "ValueError"})
        return Response(
            200,
            {
                "messages": [
                    {"offset": m.offset, "payload": m.payload, "producedAt": m.produced_at}
                    for m in messages
                ]
            },
        )

    def commit(request: Request) -> Response:
        doc = request.json()
        subscription = Subscription(request.path_params["topic"], str(doc.get("group", "default")))
        try:
            broker.commit(subscription, int(doc.get("offset", -1)))
        except broker_mod.BrokerError as exc:
            return _error_response(exc, _BROKER_ERRORS)
        return Response(200, {"committed": True})

    router.add("POST", "/broker/topics", create_topic)
    router.add("GET", "/broker/topics/{topic}", topic_info)
    router.add("POST", "/broker/topics/{topic}/messages", produce)
    router.add("GET", "/broker/topics/{topic}/messages", consume)
    router.add("POST", "/broker/topics/{topic}/commit", commit)


class HttpBroker:
    """Client-side mirror of the Broker interface over the gateway facade."""

    def __init__(self, base_url: str, session: requests.Session | None = None):
        self._base = base_url.rstrip("/")
        self._http = session or requests.Session()

    def create_topic(self, name: str) -> None:
        self._call("POST", "/broker/topics", json={"name": name})

    def topic_exists(self, name: str) -> bool:
        response = self._http.get(f"{self._base}/broker/topics/{name}", timeout=10)
        return response.status_code == 200

    def produce(self, topic_name: str, payload: str) -> int:
        doc = self._call("POST", f"/broker/topics/{topic_name}/messages", json={"payload": payload})
        return int(doc["offset"])

    def consume(self, subscription: Subscription, max_messages: int, timeout: float = 0.0) -> list[Message]:
        doc = self._call(
            "GET",
            f"/broker/topics/{subscription.topic_name}/messages",
            params={
                "group": subscription.group_id,
                "max": str(max_messages),
                "timeoutMs": str(int(timeout * 1000)),
            },
            read_timeout=timeout + 10,
        )
        return [
            Message(offset=int(m["offset"]), payload=m["payload"], produced_at=float(m["producedAt"]))
            for m in doc["messages"]
        ]

    def commit(self, subscription: Subscription, offset: int) -> None:
        self._call(
            "POST",
            f"/broker/topics/{subscription.topic_name}/commit",
            json={"group": subscription.group_id, "offset": offset},
        )

    def _call(self, method: str, path: str, json=None, params=None, read_timeout: float = 10.0) -> dict:
        response = self._http.request(
            method, self._base + path, json=json, params=params, timeout=read_timeout
        )
        doc = response.json()
        if response.status_code >= 400:
            _raise_remote(doc, _BROKER_ERRORS, broker_mod.BrokerError)
        return doc


# -- provider over HTTP ---------------------------------------------------------


def _job_to_wire(job: ProviderJob) -> dict:
    return {
        "providerJobId": job.provider_job_id,
        "deviceName": job.device_name,
        "shots": job.shots,
        "state": job.state.value,
        "counts": job.counts,
        "errorMessage": job.error_message,
        "estimatedCompletionAt": job.estimated_completion_at,
    }


def _device_to_wire(device: Device) -> dict:
    return {
        "name": device.name,
        "numQubits": device.num_qubits,
        "isSimulator": device.is_simulator,
        "serviceTimePerJob": device.service_time_per_job,
        "readoutFlipProb": device.noise_profile.readout_flip_prob if device.noise_profile else 0.0,
        "pendingJobs": device.pending_jobs,
    }


class ProviderServer:
    """HTTP surface over a Provider instance."""

    def __init__(self, provider: provider_mod.Provider, host: str = "127.0.0.1", port: int = 0):
        self.provider = provider
        router = Router()
        router.add("GET", "/devices", self._devices)
        router.add("POST", "/jobs", self._submit)
        router.add("GET", "/jobs/{job_id}", self._get_job)
        router.add("GET", "/jobs/{job_id}/queue_info", self._queue_info)
        router.add("DELETE", "/jobs/{job_id}", self._cancel)
        router.add("GET", "/health", lambda _req: Response(200, {"status": "ok"}))
        self.http = HttpServer(router, host=host, port=port)

    @property
    def base_url(self) -> str:
        return self.http.base_url

    def start(self) -> None:
        self.http.start()

    def stop(self) -> None:
        self.http.stop()

    def _devices(self, _request: Request) -> Response:
        return Response(200, {"devices": [_device_to_wire(d) for d in self.provider.devices_snapshot()]})

    def _submit(self, request: Request) -> Response:
        doc = request.json()
        try:
            circuit = CircuitSpec.from_wire(doc["circuit"])
            noise_doc = doc.get("noise")
            noise = NoiseModel(float(noise_doc["readoutFlipProb"])) if noise_doc else None
            job_id = self.provider.submit(
                str(doc["deviceName"]), circuit, int(doc["shots"]), noise=noise
            )
        except provider_mod.ProviderError as exc:
            return _error_response(exc, _PROVIDER_ERRORS)
        except (KeyError, TypeError, ValueError) as exc:
            return Response(400, {"error": f"bad submission: {exc}", "errorType": "ValueError"})
        return Response(200, {"providerJobId": job_id})

    def _get_job(self, request: Request) -> Response:
        job_id = request.path_params["job_id"]
        wait_ms = request.query.get("waitMs")
        try:
            if wait_ms is not None:
                job = self.provider.wait_for_result(job_id, timeout=float(wait_ms) / 1000.0)
            else:
                job = self.provider.get_job(job_id)
        except provider_mod.ProviderError as exc:
            return _error_response(exc, _PROVIDER_ERRORS)
        return Response(200, _job_to_wire(job))

    def _queue_info(self, request: Request) -> Response:
        try:
            estimate = self.provider.queue_info(request.path_params["job_id"])
        except provider_mod.ProviderError as exc:
            return _error_response(exc, _PROVIDER_ERRORS)
        return Response(200, {"estimatedCompletionAt": estimate})

    def _cancel(self, request: Request) -> Response:
        try:
            cancelled = self.provider.cancel(request.path_params["job_id"])
        except provider_mod.ProviderError as exc:
            return _error_response(exc, _PROVIDER_ERRORS)
        return Response(200, {"cancelled": cancelled})


class HttpProvider:
    """Client-side mirror of the Provider interface."""

    def __init__(self, base_url: str, session: requests.Session | None = None):
        self._base = base_url.rstrip("/")
        self._http = session or requests.Session()

    def devices_snapshot(self) -> list[Device]:
        doc = self._call("GET", "/devices")
        devices = []
        for raw in doc["devices"]:
            flip = float(raw.get("readoutFlipProb", 0.0))
            devices.append(
                Device(
                    name=raw["name"],
                    num_qubits=int(raw["numQubits"]),
                    is_simulator=bool(raw["isSimulator"]),
                    service_time_per_job=float(raw.get("serviceTimePerJob", 0.0)),
                    noise_profile=NoiseModel(flip) if flip > 0 else None,
                    pending_jobs=int(raw.get("pendingJobs", 0)),
                )
            )
        return devices

    def submit(self, device_name: str, circuit: CircuitSpec, shots: int, noise: NoiseModel | None = None) -> str:
        body = {
            "deviceName": device_name,
            "circuit": circuit.to_wire(),
            "shots": shots,
            "noise": {"readoutFlipProb": noise.readout_flip_prob} if noise else None,
        }
        return str(self._call("POST", "/jobs", json=body)["providerJobId"])

    def job_status(self, provider_job_id: str) -> JobState:
        return self.get_job(provider_job_id).state

    def get_job(self, provider_job_id: str) -> ProviderJob:
        return self._job_from_wire(self._call("GET", f"/jobs/{provider_job_id}"))

    def queue_info(self, provider_job_id: str) -> float | None:
        doc = self._call("GET", f"/jobs/{provider_job_id}/queue_info")
        estimate = doc.get("estimatedCompletionAt")
        return float(estimate) if estimate is not None else None

    def wait_for_result(self, provider_job_id: str, timeout: float) -> ProviderJob:
        doc = self._call(
            "GET",
            f"/jobs/{provider_job_id}",
            params={"waitMs": str(int(timeout * 1000))},
            read_timeout=timeout + 10,
        )
        return self._job_from_wire(doc)

    def cancel(self, provider_job_id: str) -> bool:
        return bool(self._call("DELETE", f"/jobs/{provider_job_id}")["cancelled"])

    @staticmethod
    def _job_from_wire(doc: dict) -> ProviderJob:
        return ProviderJob(
            provider_job_id=doc["providerJobId"],
            device_name=doc["deviceName"],
            circuit=CircuitSpec(num_qubits=1),  # not transported; callers use counts/state
            shots=int(doc.get("shots", 0)),
            state=JobState(doc["state"]),
            counts=doc.get("counts"),
            error_message=doc.get("errorMessage"),
            estimated_completion_at=doc.get("estimatedCompletionAt"),
        )

    def _call(self, method: str, path: str, json=None, params=None, read_timeout: float = 10.0) -> dict:
        response = self._http.request(
            method, self._base + path, json=json, params=params, timeout=read_timeout
        )
        doc = response.json()
        if response.status_code >= 400:
            _raise_remote(doc, _PROVIDER_ERRORS, provider_mod.ProviderError)
        return doc
