"""Boots the whole service stack in one process.

Wiring order: broker (plus input topic) -> provider with device workers ->
function runtime behind its HTTP endpoint -> gateway (config rendered
against the live functions URL) -> collector. In detached mode the
function runtime and the collector talk to the broker and the provider
exclusively through the HTTP facades, mirroring a multi-service
deployment while still living in a single process.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .broker import Broker
from .collector import Collector, CollectorConfig
from .config_store import load as load_config
from .functions import FunctionRuntime, FunctionsServer, register_default_algorithms
from .gateway import Gateway, GatewayServer
from .provider import Provider, default_fleet, load_fleet
from .remote import HttpBroker, HttpProvider, ProviderServer

log = logging.getLogger(__name__)

INPUT_TOPIC = "qbridge-in"
DEFAULT_TOKEN = "qbridge-dev-token"


@dataclass
class StackConfig:
    config_path: str | None = None  # None -> bundled default
    fleet_path: str | None = None
    host: str = "127.0.0.1"
    gateway_port: int = 0  # 0 -> ephemeral
    functions_port: int = 0
    provider_port: int = 0
    wait_threshold: float = 30.0
    worker_count: int = 4
    max_attempts: int = 100
    seed: int = 0
    token: str = DEFAULT_TOKEN
    detached_services: bool = False
    ui_dir: str | None = None
    input_topic: str = INPUT_TOPIC


def default_config_path() -> Path:
    return Path(str(resources.files("qbridge").joinpath("data/config.json")))


def default_fleet_path() -> Path:
    return Path(str(resources.files("qbridge").joinpath("data/fleet.json")))


class Stack:
    """Handle over all running components; start() returns when healthy."""

    def __init__(self, config: StackConfig | None = None):
        self.config = config or StackConfig()
        self.broker = Broker()
        devices = (
            load_fleet(self.config.fleet_path) if self.config.fleet_path else default_fleet()
        )
        self.provider = Provider(devices, seed=self.config.seed)
        self.provider_server: ProviderServer | None = None
        self.functions_runtime: FunctionRuntime | None = None
        self.functions_server: FunctionsServer | None = None
        self.gateway: Gateway | None = None
        self.gateway_server: GatewayServer | None = None
        self.collector: Collector | None = None
        self._started = False

    # -- lifecycle -------------------------------------------------------------

    def start(self) -> "Stack":
        cfg = self.config
        self.broker.create_topic(cfg.input_topic)
        self.provider.start()

        self.provider_server = ProviderServer(self.provider, host=cfg.host, port=cfg.provider_port)
        self.provider_server.start()

        if cfg.detached_services:
            # The broker facade lives on the gateway server, which cannot be
            # bound until the functions URL is known; wire the runtime to the
            # in-process broker for now and rebind once the facade is up.
            functions_broker = self.broker
            functions_provider = HttpProvider(self.provider_server.base_url)
        else:
            functions_broker = self.broker
            functions_provider = self.provider

        self.functions_runtime = FunctionRuntime(
            broker=functions_broker,
            provider=functions_provider,
            input_topic=cfg.input_topic,
            token=cfg.token,
        )
        register_default_algorithms(self.functions_runtime)
        self.functions_server = FunctionsServer(
            self.functions_runtime, host=cfg.host, port=cfg.functions_port
        )
        self.functions_server.start()

        config_set = load_config(
            cfg.config_path or default_config_path(),
            variables={"FUNCTIONS_BASE_URL": self.functions_server.base_url},
        )
        self.gateway = Gateway(
            broker=self.broker,
            config=config_set,
            token=cfg.token,
            seed=cfg.seed,
        )
        self.gateway_server = GatewayServer(
            self.gateway,
            self.broker,
            host=cfg.host,
            port=cfg.gateway_port,
            health_callback=self.health,
            ui_dir=cfg.ui_dir,
        )
        self.gateway_server.start()

        if cfg.detached_services:
            self.functions_runtime.rebind_broker(HttpBroker(self.gateway_server.base_url))
            collector_broker = HttpBroker(self.gateway_server.base_url)
            collector_provider = HttpProvider(self.provider_server.base_url)
        else:
            collector_broker = self.broker
            collector_provider = self.provider

        self.collector = Collector(
            broker=collector_broker,
            provider=collector_provider,
            input_topic=cfg.input_topic,
            config=CollectorConfig(
                wait_threshold=cfg.wait_threshold,
                worker_count=cfg.worker_count,
                max_attempts=cfg.max_attempts,
            ),
        )
        self.collector.start()
        self._started = True
        return self

    def stop(self) -> None:
        for component in (self.collector, self.gateway, self.gateway_server,
                          self.functions_server, self.provider_server, self.provider):
            if component is not None:
                try:
                    component.stop()
                except Exception:  # noqa: BLE001 - teardown must not mask earlier failures
                    log.exception("error stopping %s", type(component).__name__)
        self._started = False

    def __enter__(self) -> "Stack":
        return self.start()

    def __exit__(self, *_exc) -> None:
        self.stop()

    # -- introspection -----------------------------------------------------------

    def health(self) -> dict:
        return {
            "broker": True,
            "provider": self.provider is not None,
            "functions": self.functions_server is not None,
            "gateway": self.gateway is not None,
            "collector": self.collector is not None and self._started,
        }

    @property
    def gateway_url(self) -> str:
        assert self.gateway_server is not None
        return self.gateway_server.base_url

    @property
    def functions_url(self) -> str:
        assert self.functions_server is not None
        return self.functions_server.base_url

    @property
    def provider_url(self) -> str:
        assert self.provider_server is not None
        return self.provider_server.base_url
