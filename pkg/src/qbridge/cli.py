"""Operator entry point: boot the stack, submit jobs, run the load generator.

Exit codes: 0 success, 1 usage error, 2 configuration error, 3 runtime
failure (unreachable services, job errors, failed verification).
"""

from __future__ import annotations

import argparse
import json
import logging
import queue
import sys
import threading
import time
from pathlib import Path

import requests

from . import qsim
from .config_store import ConfigError
from .loadgen import run_loadgen
from .provider import ProviderError
from .stack import Stack, StackConfig

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

DEFAULT_GATEWAY = "http://127.0.0.1:8080"
BACKEND_CHOICES = ("REAL", "NOISELESS_SIM", "NOISY_SIM")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; keep 2 for config only
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qbridge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="boot broker, provider, functions, gateway and collector")
    run.add_argument("--config", help="function dispatch config file (JSON)")
    run.add_argument("--fleet", help="provider device fleet file (JSON)")
    run.add_argument("--gateway-port", type=int, default=8080)
    run.add_argument("--functions-port", type=int, default=8081)
    run.add_argument("--provider-port", type=int, default=8082)
    run.add_argument("--threshold", type=float, default=30.0, help="collector wait threshold, seconds")
    run.add_argument("--workers", type=int, default=4, help="collector poll workers")
    run.add_argument("--max-attempts", type=int, default=100, help="re-enqueue budget per job")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument(
        "--detached-services",
        action="store_true",
        help="wire functions and collector to the broker/provider HTTP facades",
    )

    submit = sub.add_parser("submit", help="submit two emoticons and wait for the result")
    submit.add_argument("emoticon_a", metavar="EMOTICON_A")
    submit.add_argument("emoticon_b", metavar="EMOTICON_B")
    submit.add_argument("--backend", choices=BACKEND_CHOICES, default="NOISELESS_SIM")
    submit.add_argument("--shots", type=int, default=1024)
    submit.add_argument("--gateway", default=DEFAULT_GATEWAY)
    submit.add_argument("--timeout", type=float, default=120.0)

    load = sub.add_parser("loadgen", help="concurrent multi-client verification run")
    load.add_argument("--clients", type=int, default=5)
    load.add_argument("--jobs-per-client", type=int, default=4)
    load.add_argument("--backend", choices=BACKEND_CHOICES, default="NOISELESS_SIM")
    load.add_argument("--shots", type=int, default=256)
    load.add_argument("--gateway", default=DEFAULT_GATEWAY)
    load.add_argument("--timeout", type=float, default=60.0)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(asctime)s %(levelname)s %(name)s %(message)s"
    )
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "submit":
        return _cmd_submit(args)
    return _cmd_loadgen(args)


def _cmd_run(args) -> int:
    ui_dir = Path("frontend/dist")
    config = StackConfig(
        config_path=args.config,
        fleet_path=args.fleet,
        gateway_port=args.gateway_port,
        functions_port=args.functions_port,
        provider_port=args.provider_port,
        wait_threshold=args.threshold,
        worker_count=args.workers,
        max_attempts=args.max_attempts,
        seed=args.seed,
        detached_services=args.detached_services,
        ui_dir=str(ui_dir) if ui_dir.is_dir() else None,
    )
    stack = None
    try:
        stack = Stack(config)
        stack.start()
    except (ConfigError, ProviderError, FileNotFoundError, ValueError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"startup failed: {exc}", file=sys.stderr)
        if stack is not None:
            stack.stop()
        return EXIT_RUNTIME

    up = sum(1 for ok in stack.health().values() if ok)
    print(
        f"qbridge stack ready ({up}/5 components up): "
        f"gateway={stack.gateway_url} functions={stack.functions_url} "
        f"provider={stack.provider_url}"
    )
    if config.ui_dir:
        print(f"web UI served from {config.ui_dir} at {stack.gateway_url}/")
    print("press Ctrl-C to stop")
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        print("shutting down")
    finally:
        stack.stop()
    return EXIT_OK


def _cmd_submit(args) -> int:
    for label, value in (("EMOTICON_A", args.emoticon_a), ("EMOTICON_B", args.emoticon_b)):
        try:
            qsim.encode_emoticon(value)
        except qsim.QsimError as exc:
            print(f"invalid {label}: {exc}", file=sys.stderr)
            return EXIT_USAGE
    if args.shots < 1:
        print("shots must be >= 1", file=sys.stderr)
        return EXIT_USAGE

    http = requests.Session()
    try:
        session = http.post(f"{args.gateway}/api/sessions", json={}, timeout=10).json()
    except requests.RequestException as exc:
        print(f"gateway unreachable: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    events: queue.Queue = queue.Queue()
    stream_thread = threading.Thread(
        target=_pump_stream,
        args=(args.gateway, session["clientId"], events),
        daemon=True,
    )
    stream_thread.start()

    try:
        response = http.post(
            f"{args.gateway}/api/jobs",
            json={
                "clientId": session["clientId"],
                "algorithmId": "smile_super_position",
                "params": {"emoticonA": args.emoticon_a, "emoticonB": args.emoticon_b},
                "backendType": args.backend,
                "shots": args.shots,
            },
            timeout=30,
        )
    except requests.RequestException as exc:
        print(f"submission failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    doc = response.json()
    if response.status_code != 200:
        print(f"submission rejected: {doc.get('error')}", file=sys.stderr)
        return EXIT_RUNTIME
    process_job_id = doc["processJobId"]
    print(f"submitted {process_job_id} (backend type {args.backend}, {args.shots} shots)")

    record = _await_record(events, process_job_id, args.timeout)
    if record is None:
        print("timed out waiting for the result", file=sys.stderr)
        return EXIT_RUNTIME
    return _print_record(record)


def _pump_stream(gateway: str, client_id: str, events: queue.Queue) -> None:
    try:
        response = requests.get(
            f"{gateway}/api/stream",
            params={"clientId": client_id},
            stream=True,
            timeout=(10, None),
        )
        for line in response.iter_lines():
            if line.startswith(b"data: "):
                events.put(json.loads(line[len(b"data: ") :]))
    except (requests.RequestException, json.JSONDecodeError) as exc:
        log.debug("stream ended: %s", exc)


def _await_record(events: queue.Queue, process_job_id: str, timeout: float) -> dict | None:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        try:
            record = events.get(timeout=0.25)
        except queue.Empty:
            continue
        if record.get("processJobId") == process_job_id:
            return record
    return None


def _print_record(record: dict) -> int:
    payload = record.get("resultPayload") or {}
    if record.get("status") != "DONE":
        print(f"job failed: {payload.get('errorMessage', 'unknown error')}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"backend: {payload.get('backendName')}")
    frequencies = payload.get("frequencies") or {}
    for emoticon, share in sorted(frequencies.items(), key=lambda kv: -kv[1]):
        print(f"  {emoticon}  {share * 100:.1f}%")
    return EXIT_OK


def _cmd_loadgen(args) -> int:
    if args.clients < 1 or args.jobs_per_client < 1:
        print("clients and jobs-per-client must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        report = run_loadgen(
            args.gateway,
            clients=args.clients,
            jobs_per_client=args.jobs_per_client,
            backend_type=args.backend,
            shots=args.shots,
            timeout=args.timeout,
        )
    except requests.RequestException as exc:
        print(f"gateway unreachable: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for line in report.summary_lines():
        print(line)
    return EXIT_OK if report.passed else EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
