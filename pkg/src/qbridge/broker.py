"""In-process message broker: append-only topic logs with group offsets.

Stands in for a hosted streaming queue. Topics are single ordered logs
(no partitions); consumer groups track one committed offset per topic and
get at-least-once delivery — anything consumed but not committed is
redelivered on the next consume.
"""

from __future__ import annotations

import re
import threading
import time
from dataclasses import dataclass

_TOPIC_NAME_RE = re.compile(r"^[A-Za-z0-9._-]{1,128}$")


class BrokerError(Exception):
    """Base class for broker errors."""


class DuplicateTopic(BrokerError):
    pass


class InvalidName(BrokerError):
    pass


class UnknownTopic(BrokerError):
    pass


class OffsetRegression(BrokerError):
    pass


@dataclass(frozen=True)
class Message:
    offset: int
    payload: str
    produced_at: float


@dataclass(frozen=True)
class Subscription:
    """Handle naming a (topic, consumer group) pair.

    The committed offset itself lives in the broker so that every
    subscription with the same group shares it.
    """

    topic_name: str
    group_id: str


class _Topic:
    def __init__(self, name: str):
        self.name = name
        self.cond = threading.Condition()
        self.log: list[Message] = []
        self.committed: dict[str, int] = {}  # group id -> committed offset


class Broker:
    """Thread-safe topic registry with produce/consume/commit semantics."""

    def __init__(self):
        self._lock = threading.Lock()
        self._topics: dict[str, _Topic] = {}
        self._group_locks: dict[tuple[str, str], threading.Lock] = {}

    def create_topic(self, name: str) -> None:
        if not _TOPIC_NAME_RE.match(name or ""):
            raise InvalidName(f"invalid topic name {name!r}")
        with self._lock:
            if name in self._topics:
                raise DuplicateTopic(f"topic {name!r} already exists")
            self._topics[name] = _Topic(name)

    def topic_exists(self, name: str) -> bool:
        with self._lock:
            return name in self._topics

    def topic_names(self) -> list[str]:
        with self._lock:
            return sorted(self._topics)

    def produce(self, topic_name: str, payload: str) -> int:
        if not payload:
            raise ValueError("payload must be non-empty")
        topic = self._get(topic_name)
        with topic.cond:
            offset = len(topic.log)
            topic.log.append(Message(offset=offset, payload=payload, produced_at=time.monotonic()))
            topic.cond.notify_all()
            return offset

    def consume(
        self,
        subscription: Subscription,
        max_messages: int,
        timeout: float = 0.0,
    ) -> list[Message]:
        """Return up to ``max_messages`` past the group's committed offset.

        Blocks up to ``timeout`` seconds when nothing is available; an empty
        list means the timeout elapsed. Does not advance the committed
        offset — call :meth:`commit` once the batch is processed.
        """
        if max_messages < 1:
            raise ValueError("max_messages must be >= 1")
        topic = self._get(subscription.topic_name)
        group_lock = self._group_lock(subscription)
        with group_lock:
            with topic.cond:
                def available() -> bool:
                    return len(topic.log) > topic.committed.get(subscription.group_id, -1) + 1

                if not available() and timeout > 0:
                    topic.cond.wait_for(available, timeout=timeout)
                start = topic.committed.get(subscription.group_id, -1) + 1
                return list(topic.log[start : start + max_messages])

    def commit(self, subscription: Subscription, offset: int) -> None:
        topic = self._get(subscription.topic_name)
        group_lock = self._group_lock(subscription)
        with group_lock:
            with topic.cond:
                current = topic.committed.get(subscription.group_id, -1)
                if offset < current:
                    raise OffsetRegression(
                        f"commit {offset} below committed {current} for group "
                        f"{subscription.group_id!r} on {subscription.topic_name!r}"
                    )
                topic.committed[subscription.group_id] = offset

    def committed_offset(self, subscription: Subscription) -> int:
        topic = self._get(subscription.topic_name)
        with topic.cond:
            return topic.committed.get(subscription.group_id, -1)

    def _get(self, name: str) -> _Topic:
        with self._lock:
            try:
                return self._topics[name]
            except KeyError:
                raise UnknownTopic(f"no such topic {name!r}") from None

    def _group_lock(self, subscription: Subscription) -> threading.Lock:
        key = (subscription.topic_name, subscription.group_id)
        with self._lock:
            lock = self._group_locks.get(key)
            if lock is None:
                lock = threading.Lock()
                self._group_locks[key] = lock
            return lock
