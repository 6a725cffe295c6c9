"""Function runtime: one registered algorithm behind one HTTP action.

Each algorithm is a builder that turns raw request parameters into a
circuit. Invoking the action builds the circuit, picks an execution
backend, submits the job to the provider and publishes a submission event
on the input topic. Submission and publication are kept atomic from the
caller's point of view: if the publish fails the provider job is cancelled
best-effort and the caller gets an error instead of a half-tracked job.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from typing import Callable

from . import provider as provider_mod
from . import qsim
from .events import BACKEND_TYPES, SubmissionEvent
from .httpd import HttpServer, Request, Response, Router
from .provider import Device, NoEligibleDevice, least_busy
from .qsim import CircuitSpec, NoiseModel

log = logging.getLogger(__name__)

DEFAULT_SHOTS = 1024

CircuitBuilder = Callable[[dict], CircuitSpec]


class FunctionError(Exception):
    """Base class for action failures; carries the HTTP status to report."""

    http_status = 500


class Unauthorized(FunctionError):
    http_status = 401


class UnknownAlgorithm(FunctionError):
    http_status = 404


class DuplicateAlgorithm(FunctionError):
    http_status = 409


class BuildError(FunctionError):
    http_status = 422


class InvalidRequest(FunctionError):
    http_status = 422


class BrokerUnavailable(FunctionError):
    http_status = 502


class SubmitFailed(FunctionError):
    http_status = 502


@dataclass(frozen=True)
class ActionRequest:
    algorithm_id: str
    params: dict
    backend_type: str
    client_id: str
    process_job_id: str
    output_topic: str
    shots: int = DEFAULT_SHOTS

    @classmethod
    def from_payload(cls, algorithm_id: str, payload: dict) -> "ActionRequest":
        backend_type = payload.get("backendType", "NOISELESS_SIM")
        if backend_type not in BACKEND_TYPES:
            raise InvalidRequest(f"backendType must be one of {BACKEND_TYPES}")
        params = payload.get("params")
        if not isinstance(params, dict):
            raise InvalidRequest("params must be a JSON object")
        shots = payload.get("shots", DEFAULT_SHOTS)
        if not isinstance(shots, int) or shots < 1:
            raise InvalidRequest("shots must be a positive integer")
        request = cls(
            algorithm_id=algorithm_id,
            params=params,
            backend_type=backend_type,
            client_id=str(payload.get("clientId") or ""),
            process_job_id=str(payload.get("processJobId") or ""),
            output_topic=str(payload.get("outputTopic") or ""),
            shots=shots,
        )
        for name, value in (
            ("clientId", request.client_id),
            ("processJobId", request.process_job_id),
            ("outputTopic", request.output_topic),
        ):
            if not value:
                raise InvalidRequest(f"{name} must be a non-empty string")
        return request


@dataclass(frozen=True)
class ActionResponse:
    ok: bool
    provider_job_id: str | None = None
    backend_name: str | None = None
    error_message: str | None = None

    def to_wire(self) -> dict:
        if self.ok:
            return {
                "ok": True,
                "providerJobId": self.provider_job_id,
                "backendName": self.backend_name,
            }
        return {"ok": False, "errorMessage": self.error_message}


class FunctionRuntime:
    """Registry of algorithm builders plus the invoke pipeline."""

    def __init__(self, broker, provider, input_topic: str, token: str):
        self._broker = broker
        self._provider = provider
        self._input_topic = input_topic
        self._token = token
        self._builders: dict[str, CircuitBuilder] = {}

    def authorize(self, presented_token: str) -> None:
        if presented_token != self._token:
            raise Unauthorized("invalid bearer token")

    def rebind_broker(self, broker) -> None:
        """Swap the broker handle (used when wiring detached services)."""
        self._broker = broker

    def register_algorithm(self, algorithm_id: str, builder: CircuitBuilder) -> None:
        if algorithm_id in self._builders:
            raise DuplicateAlgorithm(f"algorithm {algorithm_id!r} already registered")
        self._builders[algorithm_id] = builder

    def algorithm_ids(self) -> list[str]:
        return sorted(self._builders)

    def select_backend(self, backend_type: str, required_qubits: int) -> tuple[Device, NoiseModel | None]:
        """Resolve a backend type to a concrete device and execution noise.

        REAL picks the least-busy real device wide enough for the circuit.
        NOISELESS_SIM picks the least-busy simulator. NOISY_SIM runs on the
        simulator too but borrows the noise profile of the least-busy real
        device (whatever its size — only its noise is used).
        """
        devices = self._provider.devices_snapshot()
        if backend_type == "REAL":
            return least_busy(devices, required_qubits, real_only=True), None
        simulators = [d for d in devices if d.is_simulator]
        sim = least_busy(simulators, required_qubits, real_only=False)
        if backend_type == "NOISELESS_SIM":
            return sim, None
        donor = least_busy(devices, 1, real_only=True)
        return sim, donor.noise_profile

    def invoke(self, request: ActionRequest, presented_token: str) -> ActionResponse:
        """Run one action invocation; raises a FunctionError subclass on failure."""
        self.authorize(presented_token)
        builder = self._builders.get(request.algorithm_id)
        if builder is None:
            raise UnknownAlgorithm(f"no registered algorithm {request.algorithm_id!r}")

        try:
            circuit = builder(request.params)
        except (qsim.QsimError, KeyError, TypeError, ValueError) as exc:
            raise BuildError(f"circuit build failed: {exc}") from exc

        device, applied_noise = self.select_backend(request.backend_type, circuit.num_qubits)
        try:
            provider_job_id = self._provider.submit(
                device.name, circuit, request.shots, noise=applied_noise
            )
        except NoEligibleDevice:
            raise
        except provider_mod.ProviderError as exc:
            raise SubmitFailed(f"provider rejected the job: {exc}") from exc

        event = SubmissionEvent(
            provider_job_id=provider_job_id,
            backend_name=device.name,
            backend_type=request.backend_type,
            client_id=request.client_id,
            process_job_id=request.process_job_id,
            output_topic=request.output_topic,
            submitted_at=time.time(),
        )
        try:
            self._broker.produce(self._input_topic, event.to_json())
        except Exception as exc:  # noqa: BLE001 - any publish failure voids the submission
            try:
                self._provider.cancel(provider_job_id)
            except Exception:  # noqa: BLE001 - best effort only
                log.warning("could not cancel job %s after publish failure", provider_job_id)
            raise BrokerUnavailable(f"could not publish submission event: {exc}") from exc

        return ActionResponse(ok=True, provider_job_id=provider_job_id, backend_name=device.name)


def build_emoticon_superposition(params: dict) -> CircuitSpec:
    """Builder for the bundled demo: two emoticons in equal superposition."""
    bits_a = qsim.encode_emoticon(str(params["emoticonA"]))
    bits_b = qsim.encode_emoticon(str(params["emoticonB"]))
    return qsim.build_superposition_circuit(bits_a, bits_b)


EMOTICON_ALGORITHM_ID = "smile_super_position"


def register_default_algorithms(runtime: FunctionRuntime) -> None:
    runtime.register_algorithm(EMOTICON_ALGORITHM_ID, build_emoticon_superposition)


class FunctionsServer:
    """HTTP surface: POST /fn/{algorithmId} with a bearer token."""

    def __init__(self, runtime: FunctionRuntime, host: str = "127.0.0.1", port: int = 0):
        self.runtime = runtime
        router = Router()
        router.add("POST", "/fn/{algorithm_id}", self._handle_invoke)
        router.add("GET", "/health", lambda _req: Response(200, {"status": "ok"}))
        self.http = HttpServer(router, host=host, port=port)

    @property
    def base_url(self) -> str:
        return self.http.base_url

    def start(self) -> None:
        self.http.start()

    def stop(self) -> None:
        self.http.stop()

    def _handle_invoke(self, request: Request) -> Response:
        token = _bearer_token(request.headers.get("Authorization", ""))
        try:
            self.runtime.authorize(token)
            action = ActionRequest.from_payload(request.path_params["algorithm_id"], request.json())
            response = self.runtime.invoke(action, token)
        except FunctionError as exc:
            body = ActionResponse(ok=False, error_message=str(exc)).to_wire()
            return Response(exc.http_status, body)
        return Response(200, response.to_wire())


def _bearer_token(header_value: str) -> str:
    if header_value.startswith("Bearer "):
        return header_value[len("Bearer ") :]
    return ""
