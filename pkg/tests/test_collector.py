"""Collector: the poll decision table, worker outcomes, the re-enqueue
path and readiness ordering with a single worker."""

import itertools
import json
import time

from conftest import wait_until
from qbridge.broker import Broker, Subscription
from qbridge.collector import Collector, CollectorConfig, PollDecision, decide_poll_action
from qbridge.events import ResultEvent, SubmissionEvent
from qbridge.provider import Device, JobState, Provider
from qbridge.qsim import CircuitSpec, H, X

INPUT_TOPIC = "qbridge-in"
OUT_TOPIC = "topic-out1"


def make_rig(
    fleet=None,
    wait_threshold=0.5,
    worker_count=2,
    max_attempts=100,
    start=True,
):
    broker = Broker()
    broker.create_topic(INPUT_TOPIC)
    broker.create_topic(OUT_TOPIC)
    provider = Provider(
        fleet
        or [
            Device("real-fast", 16, False, service_time_per_job=0.05),
            Device("sim-20q", 20, True),
        ]
    )
    provider.start()
    collector = Collector(
        broker,
        provider,
        INPUT_TOPIC,
        CollectorConfig(
            wait_threshold=wait_threshold,
            worker_count=worker_count,
            max_attempts=max_attempts,
        ),
    )
    if start:
        collector.start()
    return broker, provider, collector


def submission(provider_job_id, backend_type="NOISELESS_SIM", backend_name="sim-20q", **overrides):
    base = dict(
        provider_job_id=provider_job_id,
        backend_name=backend_name,
        backend_type=backend_type,
        client_id="client-1",
        process_job_id=f"proc-{provider_job_id}",
        output_topic=OUT_TOPIC,
        submitted_at=time.time(),
    )
    base.update(overrides)
    return SubmissionEvent(**base)


def drain_results(broker, group="res-probe", topic=OUT_TOPIC):
    sub = Subscription(topic, group)
    messages = broker.consume(sub, 100, timeout=0.05)
    if messages:
        broker.commit(sub, messages[-1].offset)
    return [ResultEvent.from_json(m.payload) for m in messages]


# -- decision table ---------------------------------------------------------------


def test_decide_poll_action_exhaustive_grid():
    now = 1000.0
    threshold = 120.0
    estimates = {
        "none": None,
        "below": now + 30.0,
        "equal": now + threshold,
        "above": now + 600.0,
    }
    for state, sim_flag, (est_name, estimate) in itertools.product(
        JobState, (True, False), estimates.items()
    ):
        decision = decide_poll_action(state, sim_flag, estimate, now, threshold)
        if state in (JobState.DONE, JobState.CANCELLED, JobState.ERROR):
            expected = PollDecision.FINALIZE
        elif sim_flag:
            expected = PollDecision.WAIT
        elif est_name in ("none", "below", "equal"):
            expected = PollDecision.WAIT
        else:
            expected = PollDecision.RE_ENQUEUE
        assert decision is expected, (state, sim_flag, est_name)


def test_decide_poll_action_is_pure():
    args = (JobState.QUEUED, False, 2000.0, 1000.0, 100.0)
    assert decide_poll_action(*args) is decide_poll_action(*args)


# -- happy path -------------------------------------------------------------------


def test_simulator_job_produces_done_result():
    broker, provider, collector = make_rig()
    try:
        job_id = provider.submit("sim-20q", CircuitSpec(1, (X(0),)), 32)
        broker.produce(INPUT_TOPIC, submission(job_id).to_json())
        events = wait_until(lambda: drain_results(broker), message="no result")
        assert len(events) == 1
        assert events[0].status == "DONE"
        assert events[0].counts == {"1": 32}
        assert events[0].process_job_id == f"proc-{job_id}"
    finally:
        collector.stop()
        provider.stop()


def test_three_events_three_results():
    broker, provider, collector = make_rig()
    try:
        ids = [provider.submit("sim-20q", CircuitSpec(1, (H(0),)), 16) for _ in range(3)]
        for job_id in ids:
            broker.produce(INPUT_TOPIC, submission(job_id).to_json())
        collected = []

        def gather():
            collected.extend(drain_results(broker))
            return len(collected) >= 3

        wait_until(gather, message="3 results")
        assert {e.process_job_id for e in collected} == {f"proc-{j}" for j in ids}
    finally:
        collector.stop()
        provider.stop()


def test_garbage_payload_skipped_loop_continues():
    broker, provider, collector = make_rig()
    try:
        broker.produce(INPUT_TOPIC, "{this is not json")
        job_id = provider.submit("sim-20q", CircuitSpec(1, (X(0),)), 8)
        broker.produce(INPUT_TOPIC, submission(job_id).to_json())
        events = wait_until(lambda: drain_results(broker), message="no result after garbage")
        assert events[0].status == "DONE"
    finally:
        collector.stop()
        provider.stop()


def test_unknown_provider_job_yields_error_naming_id():
    broker, provider, collector = make_rig()
    try:
        broker.produce(INPUT_TOPIC, submission("pj-does-not-exist").to_json())
        events = wait_until(lambda: drain_results(broker), message="no error result")
        assert events[0].status == "ERROR"
        assert "pj-does-not-exist" in events[0].error_message
    finally:
        collector.stop()
        provider.stop()


def test_cancelled_job_yields_cancelled_result():
    fleet = [Device("slow", 16, False, service_time_per_job=5.0),
             Device("sim-20q", 20, True)]
    broker, provider, collector = make_rig(fleet=fleet, wait_threshold=30.0)
    try:
        provider.submit("slow", CircuitSpec(1, (X(0),)), 8)  # occupies the device
        target = provider.submit("slow", CircuitSpec(1, (X(0),)), 8)
        assert provider.cancel(target) is True
        broker.produce(INPUT_TOPIC, submission(target, backend_type="REAL", backend_name="slow").to_json())
        events = wait_until(lambda: drain_results(broker), message="no cancelled result")
        assert events[0].status == "CANCELLED"
        assert events[0].counts is None and events[0].error_message is None
    finally:
        collector.stop()
        provider.stop()


# -- re-enqueue path -----------------------------------------------------------------


def test_far_estimate_re_enqueues_with_attempt_and_estimate():
    fleet = [Device("glacial", 16, False, service_time_per_job=5.0),
             Device("sim-20q", 20, True)]
    broker, provider, collector = make_rig(fleet=fleet, wait_threshold=0.3, worker_count=1)
    probe = Subscription(INPUT_TOPIC, "input-probe")
    try:
        job_id = provider.submit("glacial", CircuitSpec(1, (X(0),)), 8)
        original = submission(job_id, backend_type="REAL", backend_name="glacial")
        broker.produce(INPUT_TOPIC, original.to_json())

        def find_requeued():
            messages = broker.consume(probe, 100, timeout=0.05)
            if messages:
                broker.commit(probe, messages[-1].offset)
            for message in messages:
                event = SubmissionEvent.from_json(message.payload)
                if event.attempt >= 2:
                    return event
            return None

        requeued = wait_until(find_requeued, timeout=8.0, message="no re-enqueued event")
        assert requeued.estimated_completion_at is not None
        # identity fields preserved verbatim
        assert requeued.provider_job_id == original.provider_job_id
        assert requeued.client_id == original.client_id
        assert requeued.process_job_id == original.process_job_id
        assert requeued.backend_name == original.backend_name
        assert requeued.output_topic == original.output_topic

        events = wait_until(lambda: drain_results(broker), timeout=15.0, message="job never finalized")
        assert events[0].status == "DONE"
        # exactly one result despite the re-enqueue cycles
        time.sleep(0.3)
        assert drain_results(broker, group="res-probe") == []
    finally:
        collector.stop()
        provider.stop()


def test_attempt_budget_exhaustion_yields_error():
    broker, provider, collector = make_rig(max_attempts=3)
    try:
        job_id = provider.submit("sim-20q", CircuitSpec(1, (X(0),)), 8)
        event = submission(job_id, attempt=4)  # already over budget
        broker.produce(INPUT_TOPIC, event.to_json())
        events = wait_until(lambda: drain_results(broker), message="no budget error")
        assert events[0].status == "ERROR"
        assert "poll budget exhausted" in events[0].error_message
    finally:
        collector.stop()
        provider.stop()


def test_re_enqueue_stops_at_budget():
    fleet = [Device("glacial", 16, False, service_time_per_job=30.0),
             Device("sim-20q", 20, True)]
    broker, provider, collector = make_rig(fleet=fleet, wait_threshold=0.05, worker_count=1, max_attempts=3)
    try:
        job_id = provider.submit("glacial", CircuitSpec(1, (X(0),)), 8)
        broker.produce(INPUT_TOPIC, submission(job_id, backend_type="REAL", backend_name="glacial").to_json())
        events = wait_until(lambda: drain_results(broker), timeout=10.0, message="no exhaustion error")
        assert events[0].status == "ERROR"
        assert "poll budget exhausted" in events[0].error_message
    finally:
        collector.stop()
        provider.stop()


def test_wait_timeout_recycles_item_until_done():
    # An event marked as simulator-backed but pointing at a slow real job
    # forces the WAIT branch to time out; the item must recycle through the
    # queue (not hang a worker) and still finalize exactly once.
    fleet = [Device("tortoise", 16, False, service_time_per_job=1.5),
             Device("sim-20q", 20, True)]
    broker, provider, collector = make_rig(fleet=fleet, wait_threshold=0.2, worker_count=1)
    try:
        job_id = provider.submit("tortoise", CircuitSpec(1, (X(0),)), 8)
        broker.produce(INPUT_TOPIC, submission(job_id).to_json())  # claims NOISELESS_SIM
        events = wait_until(lambda: drain_results(broker), timeout=10.0, message="never finalized")
        assert [e.status for e in events] == ["DONE"]
        time.sleep(0.3)
        assert drain_results(broker) == []  # exactly one result
    finally:
        collector.stop()
        provider.stop()


# -- readiness ordering ----------------------------------------------------------------


def test_simulator_result_overtakes_slow_real_job():
    fleet = [Device("glacial", 16, False, service_time_per_job=10.0),
             Device("sim-20q", 20, True)]
    broker, provider, collector = make_rig(fleet=fleet, wait_threshold=0.1, worker_count=1)
    try:
        slow_id = provider.submit("glacial", CircuitSpec(1, (X(0),)), 8)
        sim_id = provider.submit("sim-20q", CircuitSpec(1, (X(0),)), 8)
        broker.produce(INPUT_TOPIC, submission(slow_id, backend_type="REAL", backend_name="glacial").to_json())
        broker.produce(INPUT_TOPIC, submission(sim_id).to_json())

        events = wait_until(lambda: drain_results(broker), timeout=10.0, message="no result at all")
        assert events[0].process_job_id == f"proc-{sim_id}"  # simulator first
    finally:
        collector.stop()
        provider.stop()


# -- publishing -------------------------------------------------------------------------


def test_publish_result_retries_then_drops(caplog):
    broker, provider, collector = make_rig(start=False)
    event = ResultEvent(
        client_id="c",
        process_job_id="p",
        provider_job_id="pj",
        backend_name="b",
        status="DONE",
        completed_at=time.time(),
        attempt=1,
        counts={"0": 1},
    )
    with caplog.at_level("ERROR"):
        collector.publish_result(event, "missing-topic")
    assert any("dropping result" in r.message for r in caplog.records)
    provider.stop()


def test_publish_result_roundtrip():
    broker, provider, collector = make_rig(start=False)
    event = ResultEvent(
        client_id="c",
        process_job_id="p",
        provider_job_id="pj",
        backend_name="b",
        status="DONE",
        completed_at=time.time(),
        attempt=2,
        counts={"01": 5},
    )
    collector.publish_result(event, OUT_TOPIC)
    [received] = drain_results(broker)
    assert received == event
    provider.stop()
