"""FIFO queues, capacitated resources and waiting-number tickets."""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Iterator, Optional

from isstsim.kernel import EventCalendar, RngStream, ServiceDist, sample_exponential


class EntityKind(str, enum.Enum):
    STUDENT_GENERAL = "StudentGeneral"
    STUDENT_ADVISORY = "StudentAdvisory"
    PHONE_CALL = "PhoneCall"

    @property
    def is_student(self) -> bool:
        return self is not EntityKind.PHONE_CALL


@dataclass
class QueueEntry:
    queue_id: str
    enter_time: float
    leave_time: Optional[float] = None

    @property
    def wait(self) -> float:
        if self.leave_time is None:
            raise ValueError(f"entry in {self.queue_id!r} is still open")
        return self.leave_time - self.enter_time


@dataclass
class Entity:
    id: int
    kind: EntityKind
    arrival_time: float
    queue_entries: list[QueueEntry] = field(default_factory=list)
    served: bool = False
    turned_away: bool = False
    quick: bool = False
    ticket: Optional[int] = None

    @property
    def total_wait(self) -> float:
        return sum(q.wait for q in self.queue_entries if q.leave_time is not None)

    def mark_served(self) -> None:
        if self.turned_away:
            raise ValueError(f"entity {self.id} was turned away and cannot be served")
        self.served = True

    def mark_turned_away(self) -> None:
        if self.served:
            raise ValueError(f"entity {self.id} was served and cannot be turned away")
        self.turned_away = True


class QueueError(RuntimeError):
    pass


class FifoQueue:
    """First-in-first-out line that also keeps wait and length statistics."""

    def __init__(self, queue_id: str, start: float = 0.0):
        self.queue_id = queue_id
        self._items: deque[Entity] = deque()
        self._ids: set[int] = set()
        self.n_departed = 0
        self.total_wait = 0.0
        self._area = 0.0
        self._last_change = start

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self) -> Iterator[Entity]:
        return iter(self._items)

    def __contains__(self, e: Entity) -> bool:
        return e.id in self._ids

    @property
    def head(self) -> Optional[Entity]:
        return self._items[0] if self._items else None

    def _accumulate(self, now: float) -> None:
        self._area += len(self._items) * (now - self._last_change)
        self._last_change = now

    def enqueue(self, e: Entity, now: float, at_front: bool = False) -> None:
        if e.id in self._ids:
            raise QueueError(f"entity {e.id} is already in queue {self.queue_id!r}")
        self._accumulate(now)
        if at_front:
            self._items.appendleft(e)
        else:
            self._items.append(e)
        self._ids.add(e.id)
        e.queue_entries.append(QueueEntry(self.queue_id, now))

    def dequeue(self, now: float) -> Entity:
        if not self._items:
            raise QueueError(f"dequeue from empty queue {self.queue_id!r}")
        self._accumulate(now)
        e = self._items.popleft()
        self._ids.discard(e.id)
        entry = e.queue_entries[-1]
        entry.leave_time = now
        self.n_departed += 1
        self.total_wait += entry.wait
        return e

    def time_average_length(self, now: float) -> float:
        self._accumulate(now)
        return self._area / now if now > 0 else 0.0


class Resource:
    def __init__(self, resource_id: str, capacity: int):
        if capacity < 1:
            raise ValueError(f"resource {resource_id!r} needs capacity >= 1, got {capacity}")
        self.resource_id = resource_id
        self.capacity = int(capacity)
        self.busy_count = 0

    @property
    def idle(self) -> bool:
        return self.busy_count < self.capacity

    def release(self) -> None:
        if self.busy_count <= 0:
            raise QueueError(f"release of idle resource {self.resource_id!r}")
        self.busy_count -= 1


def enqueue(q: FifoQueue, e: Entity, now: float, at_front: bool = False) -> FifoQueue:
    q.enqueue(e, now, at_front)
    return q


def seize(r: Resource, q: FifoQueue, now: float) -> Optional[Entity]:
    """Move the head of ``q`` into service on ``r`` if both allow it."""
    if r.busy_count >= r.capacity or not len(q):
        return None
    e = q.dequeue(now)
    r.busy_count += 1
    return e


def release(r: Resource) -> Resource:
    r.release()
    return r


@dataclass(frozen=True)
class WaitingTicket:
    number: int
    holder: int
    issue_time: float


class TicketCounter:
    """Hands out waiting numbers 1, 2, 3, ... for one day."""

    def __init__(self):
        self.last = 0
        self.issued: list[WaitingTicket] = []

    def issue(self, e: Entity, now: float) -> WaitingTicket:
        self.last += 1
        ticket = WaitingTicket(self.last, e.id, now)
        e.ticket = ticket.number
        self.issued.append(ticket)
        return ticket


def issue_ticket(counter: TicketCounter, e: Entity, now: float) -> WaitingTicket:
    return counter.issue(e, now)


@dataclass
class StationResult:
    n_served: int
    mean_wait: float
    time_average_queue_length: float
    observed_arrival_rate: float
    end_time: float


def run_station(
    arrival_rate: float,
    service: ServiceDist,
    servers: int,
    n_customers: int,
    arrivals: RngStream,
    services: RngStream,
) -> StationResult:
    """Single FIFO queue with Poisson arrivals and ``servers`` parallel servers.

    Admits exactly ``n_customers`` arrivals and runs until all of them have
    been served; the long-run counterpart of a reception or advisory desk,
    used for queueing-theory checks.
    """
    cal = EventCalendar()
    q = FifoQueue("station")
    r = Resource("station", servers)
    arrived = 0

    def start_services(now: float) -> None:
        while True:
            e = seize(r, q, now)
            if e is None:
                return
            cal.schedule(now + service.sample(services), ("done", e))

    cal.schedule(sample_exponential(arrival_rate, arrivals), ("arrive", None))
    while True:
        ev = cal.pop_next()
        if ev is None:
            break
        tag, e = ev.action
        if tag == "arrive":
            arrived += 1
            q.enqueue(Entity(arrived, EntityKind.STUDENT_GENERAL, ev.time), ev.time)
            if arrived < n_customers:
                cal.schedule(ev.time + sample_exponential(arrival_rate, arrivals), ("arrive", None))
        else:
            r.release()
        start_services(ev.time)
    now = cal.clock
    return StationResult(
        n_served=q.n_departed,
        mean_wait=q.total_wait / q.n_departed if q.n_departed else 0.0,
        time_average_queue_length=q.time_average_length(now),
        observed_arrival_rate=arrived / now if now > 0 else 0.0,
        end_time=now,
    )
