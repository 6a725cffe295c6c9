"""Multi-client load generator: drives the gateway HTTP API and verifies
that every result lands on (and only on) its submitting client's topic."""

from __future__ import annotations

import statistics
import threading
import time
from dataclasses import dataclass, field

import requests

from .broker import Subscription
from .events import ResultEvent
from .remote import HttpBroker

VERIFY_GROUP = "loadgen-verify"

EMOTICON_PAIRS = [
    (";)", ";("),
    (":D", ":P"),
    ("^^", "^-"),
    ("<3", "</"),
]


@dataclass
class ClientOutcome:
    client_id: str
    output_topic: str
    submitted: list[str] = field(default_factory=list)
    completed: list[str] = field(default_factory=list)
    latencies: list[float] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)


@dataclass
class LoadgenReport:
    clients: int
    jobs_per_client: int
    expected: int
    completed: int
    segregation_ok: bool
    leaks: list[str]
    latencies_ms: list[float]
    elapsed_s: float

    @property
    def passed(self) -> bool:
        return self.segregation_ok and self.completed == self.expected

    def summary_lines(self) -> list[str]:
        lines = [
            f"clients={self.clients} jobs/client={self.jobs_per_client} "
            f"results={self.completed}/{self.expected} elapsed={self.elapsed_s:.1f}s"
        ]
        if self.latencies_ms:
            ordered = sorted(self.latencies_ms)
            p50 = statistics.median(ordered)
            p95 = ordered[min(len(ordered) - 1, int(len(ordered) * 0.95))]
            lines.append(
                f"latency ms: p50={p50:.0f} p95={p95:.0f} max={ordered[-1]:.0f}"
            )
        verdict = "PASS" if self.segregation_ok else "FAIL"
        lines.append(f"segregation: {verdict}")
        for leak in self.leaks:
            lines.append(f"  leak: {leak}")
        if self.completed != self.expected:
            lines.append(f"completeness: FAIL ({self.completed}/{self.expected})")
        return lines


def run_loadgen(
    gateway_url: str,
    clients: int,
    jobs_per_client: int,
    backend_type: str = "NOISELESS_SIM",
    shots: int = 256,
    timeout: float = 60.0,
) -> LoadgenReport:
    """Run the swarm, wait for all results, then audit every output topic."""
    started = time.monotonic()
    outcomes = [ClientOutcome("", "") for _ in range(clients)]
    threads = []
    for index in range(clients):
        thread = threading.Thread(
            target=_run_client,
            args=(gateway_url, jobs_per_client, backend_type, shots, timeout, outcomes, index),
            name=f"loadgen-client-{index}",
            daemon=True,
        )
        thread.start()
        threads.append(thread)
    deadline = time.monotonic() + timeout
    for thread in threads:
        thread.join(timeout=max(0.1, deadline - time.monotonic()))

    completed = sum(len(o.completed) for o in outcomes)
    latencies = [latency * 1000 for o in outcomes for latency in o.latencies]

    # Independent audit: drain each output topic with a fresh group and check
    # the events' client ids against the topic owner.
    broker = HttpBroker(gateway_url)
    leaks: list[str] = []
    for outcome in outcomes:
        if not outcome.output_topic:
            continue
        subscription = Subscription(outcome.output_topic, VERIFY_GROUP)
        seen = 0
        while True:
            messages = broker.consume(subscription, max_messages=64, timeout=0.2)
            if not messages:
                break
            for message in messages:
                event = ResultEvent.from_json(message.payload)
                seen += 1
                if event.client_id != outcome.client_id:
                    leaks.append(
                        f"topic {outcome.output_topic} owned by {outcome.client_id} "
                        f"carried event for {event.client_id}"
                    )
            broker.commit(subscription, messages[-1].offset)
        if seen < len(outcome.completed):
            leaks.append(
                f"topic {outcome.output_topic}: {seen} events but "
                f"{len(outcome.completed)} completions observed"
            )

    return LoadgenReport(
        clients=clients,
        jobs_per_client=jobs_per_client,
        expected=clients * jobs_per_client,
        completed=completed,
        segregation_ok=not leaks,
        leaks=leaks,
        latencies_ms=latencies,
        elapsed_s=time.monotonic() - started,
    )


def _run_client(
    gateway_url: str,
    jobs: int,
    backend_type: str,
    shots: int,
    timeout: float,
    outcomes: list[ClientOutcome],
    index: int,
) -> None:
    http = requests.Session()
    deadline = time.monotonic() + timeout
    try:
        doc = http.post(f"{gateway_url}/api/sessions", json={}, timeout=10).json()
    except requests.RequestException as exc:
        outcomes[index] = ClientOutcome("", "", errors=[f"session: {exc}"])
        return
    outcome = ClientOutcome(doc["clientId"], doc["outputTopic"])
    outcomes[index] = outcome

    for job_number in range(jobs):
        pair = EMOTICON_PAIRS[job_number % len(EMOTICON_PAIRS)]
        submit_at = time.monotonic()
        try:
            response = http.post(
                f"{gateway_url}/api/jobs",
                json={
                    "clientId": outcome.client_id,
                    "algorithmId": "smile_super_position",
                    "params": {"emoticonA": pair[0], "emoticonB": pair[1]},
                    "backendType": backend_type,
                    "shots": shots,
                },
                timeout=30,
            )
        except requests.RequestException as exc:
            outcome.errors.append(f"submit: {exc}")
            continue
        if response.status_code != 200:
            outcome.errors.append(f"submit rejected: {response.text}")
            continue
        process_job_id = response.json()["processJobId"]
        outcome.submitted.append(process_job_id)

        final = _poll_until_final(http, gateway_url, outcome.client_id, process_job_id, deadline)
        if final is None:
            outcome.errors.append(f"timeout waiting for {process_job_id}")
            continue
        outcome.latencies.append(time.monotonic() - submit_at)
        if final.get("clientId") != outcome.client_id:
            outcome.errors.append(f"record client mismatch for {process_job_id}")
            continue
        if final.get("status") == "DONE":
            outcome.completed.append(process_job_id)
        else:
            outcome.errors.append(f"{process_job_id} ended {final.get('status')}")


def _poll_until_final(http, gateway_url, client_id, process_job_id, deadline) -> dict | None:
    while time.monotonic() < deadline:
        try:
            record = http.get(
                f"{gateway_url}/api/jobs/{process_job_id}",
                params={"clientId": client_id},
                timeout=10,
            ).json()
        except requests.RequestException:
            time.sleep(0.1)
            continue
        if record.get("status") in ("DONE", "ERROR"):
            return record
        time.sleep(0.05)
    return None
