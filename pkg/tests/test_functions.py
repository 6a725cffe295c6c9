"""Function runtime: registry, backend selection, the invoke pipeline's
atomicity, and the HTTP action surface."""

import json
import threading

import pytest
import requests

from qbridge.broker import Broker, Subscription
from qbridge.events import SubmissionEvent
from qbridge.functions import (
    ActionRequest,
    BrokerUnavailable,
    BuildError,
    DuplicateAlgorithm,
    EMOTICON_ALGORITHM_ID,
    FunctionRuntime,
    FunctionsServer,
    Unauthorized,
    UnknownAlgorithm,
    register_default_algorithms,
)
from qbridge.provider import Device, NoEligibleDevice, Provider
from qbridge.qsim import CircuitSpec, NoiseModel, X

TOKEN = "secret-token"
INPUT_TOPIC = "qbridge-in"


def make_runtime(provider=None, broker=None):
    broker = broker or Broker()
    if not broker.topic_exists(INPUT_TOPIC):
        broker.create_topic(INPUT_TOPIC)
    provider = provider or Provider(
        [
            Device("real-5q", 5, False, service_time_per_job=0.05, noise_profile=NoiseModel(0.02)),
            Device("real-16q", 16, False, service_time_per_job=0.05, noise_profile=NoiseModel(0.05)),
            Device("sim-20q", 20, True),
        ]
    )
    runtime = FunctionRuntime(broker, provider, INPUT_TOPIC, TOKEN)
    register_default_algorithms(runtime)
    return runtime, broker, provider


def action(**overrides):
    payload = dict(
        params={"emoticonA": ";)", "emoticonB": ";("},
        backendType="NOISELESS_SIM",
        clientId="client-1",
        processJobId="job-1",
        outputTopic="topic-1",
        shots=128,
    )
    payload.update(overrides)
    return ActionRequest.from_payload(EMOTICON_ALGORITHM_ID, payload)


def drain(broker, group="probe"):
    sub = Subscription(INPUT_TOPIC, group)
    messages = broker.consume(sub, 100, timeout=0.05)
    if messages:
        broker.commit(sub, messages[-1].offset)
    return messages


# -- registry ----------------------------------------------------------------


def test_register_duplicate_rejected():
    runtime, _, _ = make_runtime()
    with pytest.raises(DuplicateAlgorithm):
        register_default_algorithms(runtime)


def test_invoke_unregistered_algorithm():
    runtime, _, _ = make_runtime()
    request = ActionRequest.from_payload(
        "missing_algo",
        {
            "params": {},
            "backendType": "NOISELESS_SIM",
            "clientId": "c",
            "processJobId": "p",
            "outputTopic": "t",
        },
    )
    with pytest.raises(UnknownAlgorithm):
        runtime.invoke(request, TOKEN)


# -- backend selection ------------------------------------------------------------


def test_select_backend_noiseless_sim():
    runtime, _, _ = make_runtime()
    device, noise = runtime.select_backend("NOISELESS_SIM", 16)
    assert device.name == "sim-20q"
    assert noise is None


def test_select_backend_real_picks_only_wide_device():
    runtime, _, _ = make_runtime()
    device, noise = runtime.select_backend("REAL", 16)
    assert device.name == "real-16q"
    assert noise is None


def test_select_backend_noisy_sim_borrows_least_busy_profile():
    runtime, _, provider = make_runtime()
    # park a job on the 16q device (workers not started) so 5q is least busy
    provider.submit("real-16q", CircuitSpec(1, (X(0),)), 1)
    device, noise = runtime.select_backend("NOISY_SIM", 16)
    assert device.name == "sim-20q"
    assert noise == NoiseModel(0.02)  # borrowed from the idle 5q device


def test_select_backend_no_eligible():
    runtime, _, _ = make_runtime()
    with pytest.raises(NoEligibleDevice):
        runtime.select_backend("REAL", 17)


# -- invoke ---------------------------------------------------------------------


def test_invoke_happy_path_publishes_event():
    runtime, broker, _ = make_runtime()
    response = runtime.invoke(action(), TOKEN)
    assert response.ok
    assert response.backend_name == "sim-20q"
    [message] = drain(broker)
    event = SubmissionEvent.from_json(message.payload)
    assert event.client_id == "client-1"
    assert event.process_job_id == "job-1"
    assert event.attempt == 1
    assert event.estimated_completion_at is None
    assert event.provider_job_id == response.provider_job_id


def test_invoke_bad_token():
    runtime, broker, _ = make_runtime()
    with pytest.raises(Unauthorized):
        runtime.invoke(action(), "wrong")
    assert drain(broker) == []


def test_invoke_build_error_publishes_nothing():
    runtime, broker, _ = make_runtime()
    with pytest.raises(BuildError):
        runtime.invoke(action(params={"emoticonA": "😀!", "emoticonB": ";("}), TOKEN)
    assert drain(broker) == []


def test_invoke_missing_param_is_build_error():
    runtime, broker, _ = make_runtime()
    with pytest.raises(BuildError):
        runtime.invoke(action(params={"emoticonA": ";)"}), TOKEN)
    assert drain(broker) == []


def test_invoke_real_backend_on_wide_circuit():
    runtime, broker, _ = make_runtime()
    response = runtime.invoke(action(backendType="REAL"), TOKEN)
    assert response.backend_name == "real-16q"  # 16-qubit circuit fits only there
    [message] = drain(broker)
    assert SubmissionEvent.from_json(message.payload).backend_type == "REAL"


def test_invoke_broker_failure_cancels_job():
    class FailingBroker:
        def produce(self, *_a, **_k):
            raise RuntimeError("broker down")

    runtime, _, provider = make_runtime()
    runtime.rebind_broker(FailingBroker())
    with pytest.raises(BrokerUnavailable):
        runtime.invoke(action(), TOKEN)
    # the submitted job must not linger in the queue
    snapshot = {d.name: d.pending_jobs for d in provider.devices_snapshot()}
    assert snapshot["sim-20q"] == 0


def test_invoke_emoticon_circuit_is_16_qubits():
    runtime, broker, provider = make_runtime()
    runtime.invoke(action(), TOKEN)
    [message] = drain(broker)
    event = SubmissionEvent.from_json(message.payload)
    job = provider.get_job(event.provider_job_id)
    assert job.circuit.num_qubits == 16


def test_concurrent_invocations_do_not_mix_identities():
    runtime, broker, _ = make_runtime()
    errors = []

    def fire(index: int):
        try:
            runtime.invoke(
                action(clientId=f"client-{index}", processJobId=f"job-{index}"), TOKEN
            )
        except Exception as exc:  # noqa: BLE001
            errors.append(exc)

    threads = [threading.Thread(target=fire, args=(i,)) for i in range(12)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert errors == []
    events = [SubmissionEvent.from_json(m.payload) for m in drain(broker)]
    pairs = {(e.client_id, e.process_job_id) for e in events}
    assert pairs == {(f"client-{i}", f"job-{i}") for i in range(12)}


# -- HTTP surface -------------------------------------------------------------------


@pytest.fixture
def server():
    runtime, broker, provider = make_runtime()
    provider.start()
    srv = FunctionsServer(runtime, port=0)
    srv.start()
    yield srv, broker
    srv.stop()
    provider.stop()


def post(server_url, algorithm, payload, token=TOKEN):
    return requests.post(
        f"{server_url}/fn/{algorithm}",
        data=json.dumps(payload),
        headers={"Authorization": f"Bearer {token}", "Content-Type": "application/json"},
        timeout=10,
    )


def test_http_invoke_ok(server):
    srv, broker = server
    response = post(
        srv.base_url,
        EMOTICON_ALGORITHM_ID,
        {
            "params": {"emoticonA": ";)", "emoticonB": ";("},
            "backendType": "NOISELESS_SIM",
            "clientId": "c1",
            "processJobId": "p1",
            "outputTopic": "t1",
            "shots": 64,
        },
    )
    assert response.status_code == 200
    doc = response.json()
    assert doc["ok"] is True and doc["backendName"] == "sim-20q"
    assert len(drain(broker)) == 1


def test_http_invoke_unauthorized(server):
    srv, broker = server
    response = post(srv.base_url, EMOTICON_ALGORITHM_ID, {"params": {}}, token="nope")
    assert response.status_code == 401
    assert response.json()["ok"] is False
    assert drain(broker) == []


def test_http_invoke_unknown_algorithm(server):
    srv, _ = server
    response = post(
        srv.base_url,
        "missing",
        {
            "params": {},
            "backendType": "NOISELESS_SIM",
            "clientId": "c",
            "processJobId": "p",
            "outputTopic": "t",
        },
    )
    assert response.status_code == 404


def test_http_invoke_build_error(server):
    srv, broker = server
    response = post(
        srv.base_url,
        EMOTICON_ALGORITHM_ID,
        {
            "params": {"emoticonA": "😀x", "emoticonB": ";("},
            "backendType": "NOISELESS_SIM",
            "clientId": "c",
            "processJobId": "p",
            "outputTopic": "t",
        },
    )
    assert response.status_code == 422
    assert "errorMessage" in response.json()
    assert drain(broker) == []
