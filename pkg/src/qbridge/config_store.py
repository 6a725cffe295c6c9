"""Dispatch configuration: which HTTP call serves which algorithm.

The config file is a JSON array of records; each record tells the gateway
how to reach one function endpoint. Record shape (verbatim keys):

    {
      "_id": "smile_super_position",
      "functionHttpMethod": "POST",
      "functionBackendUrl": "http://127.0.0.1:8081/fn/smile_super_position",
      "functionParams": {
        "body": "incomingRequestBody",
        "headers": {
          "Authorization": "IAMBearerToken",
          "Content-Type": "application/json",
          "Accept": "application/json"
        }
      }
    }

"IAMBearerToken" and "incomingRequestBody" are placeholders: rendering an
invocation substitutes the real bearer token and the incoming request body.
URLs may contain ``${VAR}`` references resolved from the ``variables``
mapping at load time, so one config file can serve any port layout.
Adding a record (and registering the function it points at) is all it
takes to make a new algorithm callable.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass
from pathlib import Path
from urllib.parse import urlparse

HTTP_METHODS = ("POST",)
BODY_BINDING = "incomingRequestBody"
AUTH_PLACEHOLDER = "IAMBearerToken"
REQUIRED_HEADERS = ("Authorization", "Content-Type", "Accept")


class ConfigError(Exception):
    """Base class for configuration errors."""


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    def __init__(self, record_id: str, field: str, reason: str):
        self.record_id = record_id
        self.field = field
        super().__init__(f"record {record_id!r}: field {field!r}: {reason}")


class UnknownAlgorithm(ConfigError):
    def __init__(self, algorithm_id: str):
        self.algorithm_id = algorithm_id
        super().__init__(f"no config record for algorithm {algorithm_id!r}")


@dataclass(frozen=True)
class FunctionConfig:
    id: str
    http_method: str
    backend_url: str
    headers: dict[str, str]
    body_binding: str = BODY_BINDING


@dataclass(frozen=True)
class ConfigSet:
    records: dict[str, FunctionConfig]

    def ids(self) -> list[str]:
        return sorted(self.records)


@dataclass(frozen=True)
class InvocationRequest:
    method: str
    url: str
    headers: dict[str, str]
    body: str


def load(path: str | Path, variables: dict[str, str] | None = None) -> ConfigSet:
    """Load and validate the config file; ``variables`` fills ``${VAR}`` refs."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, list):
        raise ParseError(f"{path}: expected a JSON array of records")
    if not doc:
        raise ParseError(f"{path}: config must contain at least one record")

    records: dict[str, FunctionConfig] = {}
    for raw in doc:
        record = _parse_record(raw, variables or {})
        if record.id in records:
            raise ValidationError(record.id, "_id", "duplicate record id")
        records[record.id] = record
    return ConfigSet(records=records)


def save(config_set: ConfigSet, path: str | Path) -> None:
    """Write the set back in the on-disk record shape (inverse of load)."""
    doc = []
    for record in config_set.records.values():
        doc.append(
            {
                "_id": record.id,
                "functionHttpMethod": record.http_method,
                "functionBackendUrl": record.backend_url,
                "functionParams": {
                    "body": record.body_binding,
                    "headers": dict(record.headers),
                },
            }
        )
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def get(config_set: ConfigSet, algorithm_id: str) -> FunctionConfig:
    try:
        return config_set.records[algorithm_id]
    except KeyError:
        raise UnknownAlgorithm(algorithm_id) from None


def render_invocation(config: FunctionConfig, request_body: str, auth_token: str) -> InvocationRequest:
    """Turn a config record plus a request body into a concrete HTTP call.

    The Authorization placeholder becomes ``Bearer <token>``; the body is
    passed through byte-identically.
    """
    if not request_body:
        raise ValueError("request body must be non-empty")
    headers = dict(config.headers)
    headers["Authorization"] = "Bearer " + auth_token
    return InvocationRequest(
        method=config.http_method,
        url=config.backend_url,
        headers=headers,
        body=request_body,
    )


def _parse_record(raw: object, variables: dict[str, str]) -> FunctionConfig:
    if not isinstance(raw, dict):
        raise ParseError(f"record is not an object: {raw!r}")
    record_id = raw.get("_id")
    if not isinstance(record_id, str) or not record_id:
        raise ValidationError(str(record_id), "_id", "missing or empty")

    method = raw.get("functionHttpMethod")
    if method not in HTTP_METHODS:
        raise ValidationError(record_id, "functionHttpMethod", f"must be one of {HTTP_METHODS}")

    url = raw.get("functionBackendUrl")
    if not isinstance(url, str) or not url:
        raise ValidationError(record_id, "functionBackendUrl", "missing or empty")
    url = _substitute(url, variables, record_id)
    parsed = urlparse(url)
    if not (parsed.scheme and parsed.netloc):
        raise ValidationError(record_id, "functionBackendUrl", f"not an absolute URL: {url!r}")

    params = raw.get("functionParams")
    if not isinstance(params, dict):
        raise ValidationError(record_id, "functionParams", "missing or not an object")
    body = params.get("body")
    if body != BODY_BINDING:
        raise ValidationError(record_id, "functionParams.body", f"must be {BODY_BINDING!r}")
    headers = params.get("headers")
    if not isinstance(headers, dict):
        raise ValidationError(record_id, "functionParams.headers", "missing or not an object")
    for name in REQUIRED_HEADERS:
        if name not in headers:
            raise ValidationError(record_id, f"functionParams.headers.{name}", "missing")

    return FunctionConfig(
        id=record_id,
        http_method=method,
        backend_url=url,
        headers={str(k): str(v) for k, v in headers.items()},
    )


def _substitute(value: str, variables: dict[str, str], record_id: str) -> str:
    try:
        return string.Template(value).substitute(variables)
    except KeyError as exc:
        raise ValidationError(
            record_id, "functionBackendUrl", f"unresolved variable {exc.args[0]!r}"
        ) from exc
