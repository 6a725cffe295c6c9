"""Results collector: input-topic consumer, poll workers, re-enqueue policy.

The main loop drains submission events from the input topic into a shared
work queue; a pool of workers drives each item to exactly one result event
on the item's output topic. A worker never sits on a far-away job: when a
real device's estimated completion is more than ``wait_threshold`` ahead,
the event goes back to the input topic (attempt + 1, estimate attached)
and the worker moves on to readier work. Re-enqueued events are produced
after a short pause scaled to the threshold so that the loop re-checks
each job roughly once per threshold period instead of spinning.
"""

from __future__ import annotations

import logging
import queue
import threading
import time
from dataclasses import dataclass, replace
from enum import Enum

from .broker import Subscription, UnknownTopic
from .events import EventParseError, ResultEvent, SubmissionEvent
from .provider import FINAL_STATES, JobState, UnknownJob, WaitTimeout

log = logging.getLogger(__name__)

COLLECTOR_GROUP = "collector"
PUBLISH_RETRIES = 3
PUBLISH_RETRY_PAUSE = 0.1


class PollDecision(Enum):
    FINALIZE = "FINALIZE"
    WAIT = "WAIT"
    RE_ENQUEUE = "RE_ENQUEUE"


@dataclass(frozen=True)
class CollectorConfig:
    wait_threshold: float = 30.0
    worker_count: int = 4
    max_attempts: int = 100
    wait_timeout: float | None = None  # defaults to 2 * wait_threshold

    def __post_init__(self):
        if self.wait_threshold <= 0:
            raise ValueError("wait_threshold must be positive")
        if self.worker_count < 1:
            raise ValueError("worker_count must be >= 1")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.wait_timeout is not None and self.wait_timeout <= 0:
            raise ValueError("wait_timeout must be positive")

    @property
    def effective_wait_timeout(self) -> float:
        return self.wait_timeout if self.wait_timeout is not None else 2 * self.wait_threshold


def decide_poll_action(
    state: JobState,
    is_simulator: bool,
    estimated_completion_at: float | None,
    now: float,
    threshold: float,
) -> PollDecision:
    """Pure decision: finalize finished jobs, wait for near/simulator jobs,
    re-enqueue anything whose estimate is further out than the threshold."""
    if state in FINAL_STATES:
        return PollDecision.FINALIZE
    if is_simulator:
        return PollDecision.WAIT
    if estimated_completion_at is None:
        return PollDecision.WAIT
    if estimated_completion_at - now <= threshold:
        return PollDecision.WAIT
    return PollDecision.RE_ENQUEUE


class Collector:
    """Wires the consumer loop, the worker pool and the re-enqueue timers."""

    def __init__(self, broker, provider, input_topic: str, config: CollectorConfig | None = None):
        self._broker = broker
        self._provider = provider
        self._input_topic = input_topic
        self.config = config or CollectorConfig()
        self._queue: queue.Queue[SubmissionEvent] = queue.Queue(maxsize=1024)
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._timers: list[threading.Timer] = []
        self._timer_lock = threading.Lock()

    def start(self) -> None:
        if self._threads:
            return
        main = threading.Thread(target=self._run_main_loop, name="collector-main", daemon=True)
        main.start()
        self._threads.append(main)
        for index in range(self.config.worker_count):
            worker = threading.Thread(
                target=self._run_worker, name=f"collector-worker-{index}", daemon=True
            )
            worker.start()
            self._threads.append(worker)

    def stop(self) -> None:
        self._stop.set()
        with self._timer_lock:
            for timer in self._timers:
                timer.cancel()
            self._timers = []
        for thread in self._threads:
            thread.join(timeout=5.0)
        self._threads = []

    # -- consumer loop -------------------------------------------------------

    def _run_main_loop(self) -> None:
        subscription = Subscription(self._input_topic, COLLECTOR_GROUP)
        while not self._stop.is_set():
            messages = self._broker.consume(subscription, max_messages=16, timeout=0.25)
            if not messages:
                continue
            for message in messages:
                try:
                    event = SubmissionEvent.from_json(message.payload)
                except EventParseError as exc:
                    log.warning(
                        "skipping unparseable submission at offset %d: %s", message.offset, exc
                    )
                    continue
                self._queue.put(event)
            self._broker.commit(subscription, messages[-1].offset)

    # -- workers ---------------------------------------------------------------

    def _run_worker(self) -> None:
        while not self._stop.is_set():
            try:
                item = self._queue.get(timeout=0.25)
            except queue.Empty:
                continue
            try:
                self._process(item)
            except Exception as exc:  # noqa: BLE001 - never kill the worker
                log.exception("worker failed on %s", item.process_job_id)
                self._publish_error(item, f"internal collector failure: {exc}")

    def _process(self, item: SubmissionEvent) -> None:
        if item.attempt > self.config.max_attempts:
            self._publish_error(item, f"poll budget exhausted after {item.attempt - 1} attempts")
            return

        try:
            state = self._provider.job_status(item.provider_job_id)
        except UnknownJob:
            self._publish_error(item, f"provider job {item.provider_job_id} does not exist")
            return

        is_simulator = item.backend_type in ("NOISELESS_SIM", "NOISY_SIM")
        estimate = None
        if not is_simulator:
            try:
                estimate = self._provider.queue_info(item.provider_job_id)
            except UnknownJob:
                self._publish_error(item, f"provider job {item.provider_job_id} does not exist")
                return

        decision = decide_poll_action(
            state, is_simulator, estimate, time.time(), self.config.wait_threshold
        )
        if decision is PollDecision.RE_ENQUEUE:
            self._re_enqueue(item, estimate)
            return
        if decision is PollDecision.WAIT:
            try:
                job = self._provider.wait_for_result(
                    item.provider_job_id, timeout=self.config.effective_wait_timeout
                )
            except WaitTimeout:
                # Recycle through the shared queue so the worker stays free.
                log.info("wait timed out for %s; recycling", item.provider_job_id)
                self._queue.put(item)
                return
            except UnknownJob:
                self._publish_error(item, f"provider job {item.provider_job_id} does not exist")
                return
            self._finalize(item, job.state, job.counts, job.error_message)
            return
        # FINALIZE: the job already reached a final state.
        job = self._provider.get_job(item.provider_job_id)
        self._finalize(item, job.state, job.counts, job.error_message)

    def _finalize(self, item, state: JobState, counts, error_message) -> None:
        if state is JobState.DONE:
            event = self._result(item, "DONE", counts=counts)
        elif state is JobState.CANCELLED:
            event = self._result(item, "CANCELLED")
        else:
            event = self._result(
                item, "ERROR", error_message=error_message or "job failed on the provider"
            )
        self.publish_result(event, item.output_topic)

    def _re_enqueue(self, item: SubmissionEvent, estimate: float | None) -> None:
        next_attempt = item.attempt + 1
        if next_attempt > self.config.max_attempts:
            self._publish_error(item, f"poll budget exhausted after {item.attempt} attempts")
            return
        updated = replace(item, estimated_completion_at=estimate, attempt=next_attempt)
        remaining = (estimate or time.time()) - time.time()
        delay = min(self.config.wait_threshold, max(0.0, remaining - self.config.wait_threshold))

        def produce() -> None:
            if self._stop.is_set():
                return
            try:
                self._broker.produce(self._input_topic, updated.to_json())
            except Exception:  # noqa: BLE001
                log.exception("failed to re-enqueue %s", updated.process_job_id)

        timer = threading.Timer(delay, produce)
        timer.daemon = True
        with self._timer_lock:
            self._timers = [t for t in self._timers if t.is_alive()]
            self._timers.append(timer)
        timer.start()

    def _publish_error(self, item: SubmissionEvent, message: str) -> None:
        self.publish_result(self._result(item, "ERROR", error_message=message), item.output_topic)

    def _result(self, item: SubmissionEvent, status: str, counts=None, error_message=None) -> ResultEvent:
        return ResultEvent(
            client_id=item.client_id,
            process_job_id=item.process_job_id,
            provider_job_id=item.provider_job_id,
            backend_name=item.backend_name,
            status=status,
            completed_at=time.time(),
            attempt=item.attempt,
            counts=counts,
            error_message=error_message,
        )

    def publish_result(self, event: ResultEvent, topic: str) -> None:
        """Produce one result event; retries a missing topic, then drops."""
        payload = event.to_json()
        for attempt in range(1, PUBLISH_RETRIES + 1):
            try:
                self._broker.produce(topic, payload)
                return
            except UnknownTopic:
                if attempt < PUBLISH_RETRIES:
                    time.sleep(PUBLISH_RETRY_PAUSE)
        log.error(
            "dropping result for %s: output topic %r unavailable after %d attempts",
            event.process_job_id,
            topic,
            PUBLISH_RETRIES,
        )
