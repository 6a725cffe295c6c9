"""Shared fixtures: polling helpers and a full-stack factory."""

import json
import time

import pytest

from qbridge.stack import Stack, StackConfig


def wait_until(predicate, timeout=10.0, interval=0.02, message="condition not met"):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        value = predicate()
        if value:
            return value
        time.sleep(interval)
    raise AssertionError(f"timed out after {timeout}s: {message}")


@pytest.fixture
def stack_factory(tmp_path):
    """Builds started stacks on ephemeral ports; tears them all down."""
    stacks = []

    def make(
        fleet: list[dict] | None = None,
        config_records: list[dict] | None = None,
        wait_threshold: float = 30.0,
        worker_count: int = 4,
        max_attempts: int = 100,
        seed: int = 0,
        detached_services: bool = False,
    ) -> Stack:
        kwargs = {}
        if fleet is not None:
            fleet_path = tmp_path / f"fleet-{len(stacks)}.json"
            fleet_path.write_text(json.dumps(fleet))
            kwargs["fleet_path"] = str(fleet_path)
        if config_records is not None:
            config_path = tmp_path / f"config-{len(stacks)}.json"
            config_path.write_text(json.dumps(config_records))
            kwargs["config_path"] = str(config_path)
        stack = Stack(
            StackConfig(
                wait_threshold=wait_threshold,
                worker_count=worker_count,
                max_attempts=max_attempts,
                seed=seed,
                detached_services=detached_services,
                **kwargs,
            )
        )
        stack.start()
        stacks.append(stack)
        return stack

    yield make
    for stack in stacks:
        stack.stop()


SLOW_REAL_FLEET = [
    {"name": "sluggish-5q", "numQubits": 16, "isSimulator": False, "serviceTimePerJob": 5.0},
    {"name": "sim-statevector", "numQubits": 20, "isSimulator": True},
]
