"""Wire schemas carried over broker topics.

SubmissionEvent rides the input topic (function runtime -> collector, and
back onto the tail on re-enqueue); ResultEvent rides each client's output
topic (collector -> gateway). Both are flat JSON objects; optional fields
are omitted when absent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

BACKEND_TYPES = ("REAL", "NOISELESS_SIM", "NOISY_SIM")
RESULT_STATUSES = ("DONE", "CANCELLED", "ERROR")


class EventParseError(Exception):
    """Payload is not a well-formed event."""


@dataclass(frozen=True)
class SubmissionEvent:
    provider_job_id: str
    backend_name: str
    backend_type: str
    client_id: str
    process_job_id: str
    output_topic: str
    submitted_at: float
    estimated_completion_at: float | None = None
    attempt: int = 1

    def to_json(self) -> str:
        doc = {
            "providerJobId": self.provider_job_id,
            "backendName": self.backend_name,
            "backendType": self.backend_type,
            "clientId": self.client_id,
            "processJobId": self.process_job_id,
            "outputTopic": self.output_topic,
            "submittedAt": self.submitted_at,
            "attempt": self.attempt,
        }
        if self.estimated_completion_at is not None:
            doc["estimatedCompletionAt"] = self.estimated_completion_at
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "SubmissionEvent":
        doc = _load_object(text)
        try:
            event = cls(
                provider_job_id=_string(doc, "providerJobId"),
                backend_name=_string(doc, "backendName"),
                backend_type=_string(doc, "backendType"),
                client_id=_string(doc, "clientId"),
                process_job_id=_string(doc, "processJobId"),
                output_topic=_string(doc, "outputTopic"),
                submitted_at=float(doc["submittedAt"]),
                estimated_completion_at=(
                    float(doc["estimatedCompletionAt"])
                    if doc.get("estimatedCompletionAt") is not None
                    else None
                ),
                attempt=int(doc.get("attempt", 1)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise EventParseError(f"bad submission event: {exc}") from exc
        if event.backend_type not in BACKEND_TYPES:
            raise EventParseError(f"bad backendType {event.backend_type!r}")
        if event.attempt < 1:
            raise EventParseError(f"attempt must be >= 1, got {event.attempt}")
        return event


@dataclass(frozen=True)
class ResultEvent:
    client_id: str
    process_job_id: str
    provider_job_id: str
    backend_name: str
    status: str
    completed_at: float
    attempt: int
    counts: dict[str, int] | None = None
    error_message: str | None = None

    def __post_init__(self):
        if self.status not in RESULT_STATUSES:
            raise ValueError(f"bad status {self.status!r}")
        if (self.counts is not None) != (self.status == "DONE"):
            raise ValueError("counts must be present exactly when status is DONE")
        if (self.error_message is not None) != (self.status == "ERROR"):
            raise ValueError("errorMessage must be present exactly when status is ERROR")

    def to_json(self) -> str:
        doc = {
            "clientId": self.client_id,
            "processJobId": self.process_job_id,
            "providerJobId": self.provider_job_id,
            "backendName": self.backend_name,
            "status": self.status,
            "completedAt": self.completed_at,
            "attempt": self.attempt,
        }
        if self.counts is not None:
            doc["counts"] = self.counts
        if self.error_message is not None:
            doc["errorMessage"] = self.error_message
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "ResultEvent":
        doc = _load_object(text)
        try:
            counts = doc.get("counts")
            if counts is not None:
                counts = {str(k): int(v) for k, v in counts.items()}
            return cls(
                client_id=_string(doc, "clientId"),
                process_job_id=_string(doc, "processJobId"),
                provider_job_id=_string(doc, "providerJobId"),
                backend_name=_string(doc, "backendName"),
                status=_string(doc, "status"),
                completed_at=float(doc["completedAt"]),
                attempt=int(doc.get("attempt", 1)),
                counts=counts,
                error_message=doc.get("errorMessage"),
            )
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise EventParseError(f"bad result event: {exc}") from exc


def _load_object(text: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise EventParseError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise EventParseError("event payload must be a JSON object")
    return doc


def _string(doc: dict, key: str) -> str:
    value = doc[key]
    if not isinstance(value, str) or not value:
        raise EventParseError(f"field {key!r} must be a non-empty string")
    return value
