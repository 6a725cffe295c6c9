"""Mock quantum provider: named devices, FIFO queues and a job state machine.

Each device runs one worker thread that pops its queue in order, holds the
job in RUNNING for the device's configured service time (simulators skip
the delay), executes the circuit on the embedded statevector simulator and
finalizes it. Real devices get a completion estimate at submission time:

    estimated_completion_at = now + (jobs already pending + 1) * service_time

Simulators never expose an estimate — callers are expected to just wait.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from collections import deque
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

from . import qsim
from .qsim import CircuitSpec, NoiseModel

log = logging.getLogger(__name__)


class ProviderError(Exception):
    """Base class for provider errors."""


class UnknownDevice(ProviderError):
    pass


class UnknownJob(ProviderError):
    def __init__(self, provider_job_id: str):
        self.provider_job_id = provider_job_id
        super().__init__(f"no such provider job {provider_job_id!r}")


class CircuitTooWide(ProviderError):
    pass


class NoEligibleDevice(ProviderError):
    pass


class WaitTimeout(ProviderError):
    pass


class JobState(str, Enum):
    QUEUED = "QUEUED"
    RUNNING = "RUNNING"
    DONE = "DONE"
    CANCELLED = "CANCELLED"
    ERROR = "ERROR"


FINAL_STATES = frozenset({JobState.DONE, JobState.CANCELLED, JobState.ERROR})


@dataclass(frozen=True)
class Device:
    name: str
    num_qubits: int
    is_simulator: bool
    service_time_per_job: float = 0.0
    noise_profile: NoiseModel | None = None
    pending_jobs: int = 0


@dataclass
class ProviderJob:
    provider_job_id: str
    device_name: str
    circuit: CircuitSpec
    shots: int
    state: JobState = JobState.QUEUED
    counts: dict[str, int] | None = None
    error_message: str | None = None
    estimated_completion_at: float | None = None
    applied_noise: NoiseModel | None = None
    seed: int = 0


def least_busy(devices: list[Device], min_qubits: int, real_only: bool) -> Device:
    """Pick the eligible device with the fewest pending jobs (ties by name)."""
    if not devices:
        raise NoEligibleDevice("empty device list")
    eligible = [
        d
        for d in devices
        if d.num_qubits >= min_qubits and not (real_only and d.is_simulator)
    ]
    if not eligible:
        raise NoEligibleDevice(
            f"no device with >= {min_qubits} qubits (real_only={real_only})"
        )
    return min(eligible, key=lambda d: (d.pending_jobs, d.name))


def load_fleet(path: str | Path) -> list[Device]:
    """Read a device fleet file (JSON array of device records)."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, list) or not doc:
        raise ProviderError(f"{path}: fleet file must be a non-empty JSON array")
    devices = []
    for raw in doc:
        flip = float(raw.get("readoutFlipProb", 0.0))
        devices.append(
            Device(
                name=str(raw["name"]),
                num_qubits=int(raw["numQubits"]),
                is_simulator=bool(raw.get("isSimulator", False)),
                service_time_per_job=float(raw.get("serviceTimePerJob", 0.0)),
                noise_profile=NoiseModel(flip) if flip > 0 else None,
            )
        )
    return devices


def default_fleet() -> list[Device]:
    """Two real devices plus one ideal simulator."""
    return [
        Device("canary-5q", 5, False, service_time_per_job=0.1, noise_profile=NoiseModel(0.02)),
        Device("condor-16q", 16, False, service_time_per_job=0.25, noise_profile=NoiseModel(0.02)),
        Device("sim-statevector", 20, True),
    ]


class Provider:
    """Job store plus one worker thread per device."""

    def __init__(self, devices: list[Device] | None = None, seed: int = 0):
        fleet = devices if devices is not None else default_fleet()
        names = [d.name for d in fleet]
        if len(set(names)) != len(names):
            raise ProviderError(f"duplicate device names in fleet: {names}")
        self._devices = {d.name: d for d in fleet}
        self._cv = threading.Condition()
        self._jobs: dict[str, ProviderJob] = {}
        self._queues: dict[str, deque[str]] = {d.name: deque() for d in fleet}
        self._pending: dict[str, int] = {d.name: 0 for d in fleet}
        self._seq = 0
        self._seed = seed
        self._stop = threading.Event()
        self._workers: list[threading.Thread] = []

    def start(self) -> None:
        if self._workers:
            return
        for name in self._devices:
            worker = threading.Thread(
                target=self._run_device_worker, args=(name,), name=f"device-{name}", daemon=True
            )
            worker.start()
            self._workers.append(worker)

    def stop(self) -> None:
        self._stop.set()
        with self._cv:
            self._cv.notify_all()
        for worker in self._workers:
            worker.join(timeout=5.0)
        self._workers = []

    def devices_snapshot(self) -> list[Device]:
        """Current fleet with live pending-job counts filled in."""
        with self._cv:
            return [
                replace(d, pending_jobs=self._pending[d.name])
                for d in self._devices.values()
            ]

    def submit(
        self,
        device_name: str,
        circuit: CircuitSpec,
        shots: int,
        noise: NoiseModel | None = None,
    ) -> str:
        """Queue a job; returns its provider job id.

        ``noise`` overrides the execution noise (used when a simulator mimics
        a real device); otherwise real devices apply their own profile.
        """
        device = self._devices.get(device_name)
        if device is None:
            raise UnknownDevice(f"no such device {device_name!r}")
        if circuit.num_qubits > device.num_qubits:
            raise CircuitTooWide(
                f"circuit needs {circuit.num_qubits} qubits, {device_name} has {device.num_qubits}"
            )
        circuit.validate()
        if shots < 1:
            raise ValueError("shots must be >= 1")

        applied = noise if noise is not None else (None if device.is_simulator else device.noise_profile)
        with self._cv:
            self._seq += 1
            job = ProviderJob(
                provider_job_id=f"pj-{self._seq:06d}",
                device_name=device_name,
                circuit=circuit,
                shots=shots,
                applied_noise=applied,
                seed=self._seed + self._seq,
            )
            if not device.is_simulator:
                pending_ahead = self._pending[device_name]
                job.estimated_completion_at = (
                    time.time() + (pending_ahead + 1) * device.service_time_per_job
                )
            self._jobs[job.provider_job_id] = job
            self._queues[device_name].append(job.provider_job_id)
            self._pending[device_name] += 1
            self._cv.notify_all()
            return job.provider_job_id

    def job_status(self, provider_job_id: str) -> JobState:
        with self._cv:
            return self._job(provider_job_id).state

    def get_job(self, provider_job_id: str) -> ProviderJob:
        """Snapshot copy of the job record."""
        with self._cv:
            job = self._job(provider_job_id)
            return replace(job, counts=dict(job.counts) if job.counts else job.counts)

    def queue_info(self, provider_job_id: str) -> float | None:
        """Estimated completion time; absent for simulators and finished jobs."""
        with self._cv:
            job = self._job(provider_job_id)
            if job.state in FINAL_STATES:
                return None
            return job.estimated_completion_at

    def wait_for_result(self, provider_job_id: str, timeout: float) -> ProviderJob:
        """Block until the job is final (or raise WaitTimeout, job unharmed)."""
        deadline = time.monotonic() + timeout
        with self._cv:
            job = self._job(provider_job_id)
            while job.state not in FINAL_STATES:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise WaitTimeout(
                        f"job {provider_job_id} still {job.state.value} after {timeout:.3f}s"
                    )
                self._cv.wait(timeout=remaining)
            return replace(job, counts=dict(job.counts) if job.counts else job.counts)

    def cancel(self, provider_job_id: str) -> bool:
        """Cancel a queued job. Returns False (no-op) once it left the queue."""
        with self._cv:
            job = self._job(provider_job_id)
            if job.state is not JobState.QUEUED:
                return False
            job.state = JobState.CANCELLED
            try:
                self._queues[job.device_name].remove(provider_job_id)
            except ValueError:
                pass
            self._pending[job.device_name] -= 1
            self._cv.notify_all()
            return True

    # -- device workers ----------------------------------------------------

    def _run_device_worker(self, device_name: str) -> None:
        device = self._devices[device_name]
        queue = self._queues[device_name]
        while not self._stop.is_set():
            with self._cv:
                while not queue and not self._stop.is_set():
                    self._cv.wait(timeout=0.2)
                if self._stop.is_set():
                    return
                job = self._jobs[queue.popleft()]
                job.state = JobState.RUNNING
                self._cv.notify_all()

            if not device.is_simulator and device.service_time_per_job > 0:
                self._stop.wait(device.service_time_per_job)

            try:
                counts = qsim.simulate(job.circuit, job.shots, seed=job.seed, noise=job.applied_noise)
                error = None
            except Exception as exc:  # noqa: BLE001 - execution failures become job errors
                counts = None
                error = f"{type(exc).__name__}: {exc}"

            with self._cv:
                if error is None:
                    job.state = JobState.DONE
                    job.counts = counts
                else:
                    job.state = JobState.ERROR
                    job.error_message = error
                    log.warning("job %s failed on %s: %s", job.provider_job_id, device_name, error)
                self._pending[device_name] -= 1
                self._cv.notify_all()

    def _job(self, provider_job_id: str) -> ProviderJob:
        try:
            return self._jobs[provider_job_id]
        except KeyError:
            raise UnknownJob(provider_job_id) from None
