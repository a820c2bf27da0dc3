"""The support-office model in process-oriented and agent-based form.

Visitors and phone calls arrive at a single reception. Students who want an
advisory meeting fill in a form there and receive a waiting number; the two
advisors see numbered students during the afternoon walk-in window.

``run_day_des`` treats visitors and staff as passive records pushed through
process logic. ``run_day_hybrid`` keeps the same process skeleton but the
people in it are state-chart agents that react to messages and timers. Both
consume random numbers in the same order, so with all variates fixed they
produce identical event traces.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Mapping, Optional, Sequence

from isstsim.behavior import (
    BehaviorRuleSet,
    Message,
    StateChart,
    Timer,
    advisor_chart,
    decide_skip,
    effective_service_time,
    needs_ticket,
    phone_caller_chart,
    receptionist_chart,
    should_issue_number,
    student_chart,
)
from isstsim.kernel import (
    HORIZON,
    ArrivalSchedule,
    EventCalendar,
    ExponentialParams,
    ServiceDist,
    TriangularParams,
    make_streams,
    next_arrival,
)
from isstsim.queueing import (
    Entity,
    EntityKind,
    FifoQueue,
    Resource,
    TicketCounter,
    seize,
)

MODES = ("des", "hybrid")
KIND_STREAM = {
    EntityKind.STUDENT_GENERAL: "arrivals-general",
    EntityKind.STUDENT_ADVISORY: "arrivals-advisory",
    EntityKind.PHONE_CALL: "arrivals-phone",
}


class ConfigError(ValueError):
    """Invalid scenario; the message names the offending field."""


@dataclass(frozen=True)
class ScenarioConfig:
    arrivals: Mapping[EntityKind, ArrivalSchedule]
    reception_service: ServiceDist
    advisory_service: ServiceDist
    rules: BehaviorRuleSet = field(default_factory=BehaviorRuleSet)
    day_open: float = 0.0
    day_close: float = HORIZON
    walkin_open: float = 240.0
    walkin_close: float = 420.0
    reception_capacity: int = 1
    advisory_capacity: int = 2
    split_reception_queues: bool = False
    mode: str = "des"
    # (time, kind) pairs replacing the Poisson arrival processes.
    scripted_arrivals: Optional[tuple[tuple[float, EntityKind], ...]] = None

    def validate(self) -> "ScenarioConfig":
        for name in ("day_open", "day_close", "walkin_open", "walkin_close"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"day.{name}: must be a finite number of minutes, got {v!r}")
        if not 0 <= self.day_open < self.day_close <= HORIZON:
            raise ConfigError(
                f"day: need 0 <= open < close <= {HORIZON:g}, got open={self.day_open} close={self.day_close}"
            )
        if not self.day_open <= self.walkin_open <= self.walkin_close <= self.day_close:
            raise ConfigError(
                "day.walkin_open/day.walkin_close: walk-in window must lie inside the opening hours"
            )
        for name in ("reception_capacity", "advisory_capacity"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"resources.{name.split('_')[0]}: capacity must be an integer >= 1, got {v!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode: must be one of {MODES}, got {self.mode!r}")
        missing = [k.value for k in EntityKind if k not in self.arrivals]
        if missing:
            raise ConfigError(f"arrivals: missing schedule for {', '.join(missing)}")
        for name in ("reception_service", "advisory_service"):
            if not isinstance(getattr(self, name), (TriangularParams, ExponentialParams)):
                raise ConfigError(f"service.{name.split('_')[0]}: unsupported distribution")
        if self.scripted_arrivals is not None:
            for i, (t, kind) in enumerate(self.scripted_arrivals):
                if not (self.day_open <= t < self.day_close):
                    raise ConfigError(f"scripted_arrivals[{i}]: time {t} outside opening hours")
                if not isinstance(kind, EntityKind):
                    raise ConfigError(f"scripted_arrivals[{i}]: unknown kind {kind!r}")
        return self

    def with_rules(self, rules: BehaviorRuleSet) -> "ScenarioConfig":
        return replace(self, rules=rules)

    def with_mode(self, mode: str) -> "ScenarioConfig":
        return replace(self, mode=mode)


@dataclass
class ReplicationMetrics:
    """Outcome of one simulated day.

    ``n_not_served`` counts customers still waiting for reception or an
    advisor when the office shuts. Students refused a waiting number are
    counted separately in ``turned_away``.
    """

    mean_wait_minutes: float
    n_arrivals: int
    n_served: int
    n_not_served: int
    turned_away: int
    leftover_reception: int
    leftover_advisory: int
    per_kind: dict[str, dict[str, Any]] = field(default_factory=dict)
    per_queue: dict[str, dict[str, Any]] = field(default_factory=dict)

    @property
    def leftover(self) -> int:
        return self.leftover_reception + self.leftover_advisory

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ReplicationMetrics":
        return cls(**d)


def _mean(xs: Sequence[float]) -> float:
    return math.fsum(xs) / len(xs) if xs else 0.0


class _Day:
    """State and bookkeeping shared by both modelling paradigms."""

    def __init__(self, cfg: ScenarioConfig, master_seed: int, replication_index: int, trace=None):
        self.cfg = cfg.validate()
        self.rules = cfg.rules
        self.streams = make_streams(master_seed, replication_index)
        self.cal = EventCalendar(cfg.day_open)
        self.trace = trace
        self._seq = -1
        self.entities: list[Entity] = []

        if cfg.split_reception_queues:
            desk = FifoQueue("reception-desk", cfg.day_open)
            phone = FifoQueue("reception-phone", cfg.day_open)
            self.reception_queues = [desk, phone]
            self._queue_for = {
                EntityKind.STUDENT_GENERAL: desk,
                EntityKind.STUDENT_ADVISORY: desk,
                EntityKind.PHONE_CALL: phone,
            }
        else:
            merged = FifoQueue("reception", cfg.day_open)
            self.reception_queues = [merged]
            self._queue_for = dict.fromkeys(EntityKind, merged)
        self.advisory_queue = FifoQueue("advisory", cfg.day_open)
        self.reception = Resource("reception", cfg.reception_capacity)
        self.advisory = Resource("advisory", cfg.advisory_capacity)
        self.tickets = TicketCounter()
        self.mean_adv_service = cfg.advisory_service.mean

    # -- helpers -------------------------------------------------------------

    @property
    def now(self) -> float:
        return self.cal.clock

    def emit(self, event: str, e: Optional[Entity] = None, **extra) -> None:
        if self.trace is None:
            return
        rec = {
            "t": self.now,
            "seq": self._seq,
            "event": event,
            "entity": e.id if e is not None else None,
            "kind": e.kind.value if e is not None else None,
        }
        rec.update(extra)
        self.trace.append(rec)

    def reception_len(self) -> int:
        return sum(len(q) for q in self.reception_queues)

    def next_reception_queue(self) -> Optional[FifoQueue]:
        for q in self.reception_queues:
            if len(q):
                return q
        return None

    def reception_open(self) -> bool:
        return self.now < self.cfg.day_close

    def advisory_open(self) -> bool:
        return self.cfg.walkin_open <= self.now < self.cfg.walkin_close and self.now < self.cfg.day_close

    def reception_duration(self, e: Entity) -> float:
        s = self.streams["service-reception"]
        if e.quick:
            return self.rules.quick_service.sample(s)
        return self.cfg.reception_service.sample(s)

    def advisory_duration(self) -> tuple[float, float]:
        base = self.cfg.advisory_service.sample(self.streams["service-advisor"])
        eff = effective_service_time(
            base,
            len(self.advisory_queue),
            self.now,
            self.mean_adv_service,
            self.cfg.advisory_capacity,
            self.rules,
        )
        return base, eff

    def ticket_allowed(self) -> bool:
        return should_issue_number(
            len(self.advisory_queue),
            self.now,
            self.mean_adv_service,
            self.cfg.advisory_capacity,
            self.rules,
            self.cfg.walkin_close,
        )

    def new_entity(self, kind: EntityKind) -> Entity:
        e = Entity(len(self.entities) + 1, kind, self.now)
        self.entities.append(e)
        return e

    def arrival_stream(self, kind: EntityKind):
        return self.streams[KIND_STREAM[kind]]

    def schedule_next_arrival(self, kind: EntityKind) -> None:
        if self.cfg.scripted_arrivals is not None:
            return
        t = next_arrival(self.cfg.arrivals[kind], self.now, self.arrival_stream(kind), self.cfg.day_close)
        if t is not None:
            self.cal.schedule(t, ("arrival", kind))

    # -- driver --------------------------------------------------------------

    def run(self) -> ReplicationMetrics:
        cfg = self.cfg
        if cfg.scripted_arrivals is not None:
            for t, kind in sorted(cfg.scripted_arrivals, key=lambda a: a[0]):
                self.cal.schedule(t, ("arrival", kind))
        else:
            for kind in EntityKind:
                self.schedule_next_arrival(kind)
        self.cal.schedule(cfg.walkin_open, ("window_open", None))
        self.cal.schedule(cfg.walkin_close, ("window_close", None))
        self.cal.schedule(cfg.day_close, ("day_end", None))
        while True:
            ev = self.cal.pop_next()
            if ev is None:
                break
            self._seq = ev.seq
            self.handle(*ev.action)
        return self.metrics()

    def handle(self, tag: str, payload: Any) -> None:
        raise NotImplementedError

    def metrics(self) -> ReplicationMetrics:
        served = [e for e in self.entities if e.served]
        turned = [e for e in self.entities if e.turned_away]
        per_kind = {}
        for kind in EntityKind:
            mine = [e for e in self.entities if e.kind is kind]
            ok = [e for e in mine if e.served]
            away = sum(e.turned_away for e in mine)
            per_kind[kind.value] = {
                "arrivals": len(mine),
                "served": len(ok),
                "turned_away": away,
                "not_served": len(mine) - len(ok) - away,
                "mean_wait_minutes": _mean([e.total_wait for e in ok]),
            }
        per_queue = {}
        for q in [*self.reception_queues, self.advisory_queue]:
            waits = [
                entry.wait
                for e in served
                for entry in e.queue_entries
                if entry.queue_id == q.queue_id
            ]
            per_queue[q.queue_id] = {"n_waits": len(waits), "mean_wait_minutes": _mean(waits)}
        leftover_reception = self.reception_len()
        leftover_advisory = len(self.advisory_queue)
        return ReplicationMetrics(
            mean_wait_minutes=_mean([e.total_wait for e in served]),
            n_arrivals=len(self.entities),
            n_served=len(served),
            n_not_served=leftover_reception + leftover_advisory,
            turned_away=len(turned),
            leftover_reception=leftover_reception,
            leftover_advisory=leftover_advisory,
            per_kind=per_kind,
            per_queue=per_queue,
        )


class ProcessDay(_Day):
    """Process-oriented model: passive entities, behaviour as branch points."""

    def handle(self, tag: str, payload: Any) -> None:
        if tag == "arrival":
            self.on_arrival(payload)
        elif tag == "reception_done":
            self.on_reception_done(payload)
        elif tag == "advisory_done":
            self.on_advisory_done(payload)
        elif tag == "window_open":
            self.emit("window_open")
            self.try_start_advisory()
        else:
            self.emit(tag)

    def on_arrival(self, kind: EntityKind) -> None:
        e = self.new_entity(kind)
        self.emit("arrival", e)
        self.schedule_next_arrival(kind)
        e.quick = decide_skip(kind, self.reception_len(), self.rules, self.streams["behavior"])
        if e.quick:
            self.emit("skip", e)
        self._queue_for[kind].enqueue(e, self.now, at_front=e.quick)
        self.try_start_reception()

    def try_start_reception(self) -> None:
        while self.reception_open():
            q = self.next_reception_queue()
            if q is None:
                return
            e = seize(self.reception, q, self.now)
            if e is None:
                return
            duration = self.reception_duration(e)
            self.emit("reception_start", e, duration=duration)
            self.cal.schedule(self.now + duration, ("reception_done", e))

    def on_reception_done(self, e: Entity) -> None:
        self.reception.release()
        self.emit("reception_end", e)
        if needs_ticket(e.kind, e.quick, self.rules):
            if self.ticket_allowed():
                ticket = self.tickets.issue(e, self.now)
                self.emit("ticket", e, number=ticket.number)
                self.advisory_queue.enqueue(e, self.now)
                self.try_start_advisory()
            else:
                e.mark_turned_away()
                self.emit("turned_away", e)
        else:
            e.mark_served()
        self.try_start_reception()

    def try_start_advisory(self) -> None:
        while self.advisory_open():
            e = seize(self.advisory, self.advisory_queue, self.now)
            if e is None:
                return
            base, duration = self.advisory_duration()
            self.emit("advisory_start", e, duration=duration, base=base, number=e.ticket)
            self.cal.schedule(self.now + duration, ("advisory_done", e))

    def on_advisory_done(self, e: Entity) -> None:
        self.advisory.release()
        self.emit("advisory_end", e)
        e.mark_served()
        self.try_start_advisory()


# -- agent-based paradigm -----------------------------------------------------


_MESSAGES: dict[str, Message] = {}
SERVICE_DONE = Timer("service_done")


def _message(name: str) -> Message:
    m = _MESSAGES.get(name)
    if m is None:
        m = _MESSAGES[name] = Message(name)
    return m


class CustomerAgent:
    """A student or phone caller, active from arrival to departure."""

    def __init__(self, day: "AgentDay", entity: Entity):
        self.day = day
        self.entity = entity
        self.chart = student_chart() if entity.kind.is_student else phone_caller_chart()
        day.watch(self.chart, entity.id)

    def arrive(self) -> None:
        day, e = self.day, self.entity
        # The student looks at the reception line before joining it.
        e.quick = decide_skip(e.kind, day.reception_len(), day.rules, day.streams["behavior"])
        if e.quick:
            day.emit("skip", e)
        self.chart.dispatch(_message("enter_queue"))
        day.queue_for(e.kind).enqueue(e, day.now, at_front=e.quick)

    def tell(self, name: str) -> None:
        self.chart.dispatch(_message(name))
        if self.chart.current == "done":
            self.entity.mark_served()
        elif self.chart.current == "turned_away":
            self.entity.mark_turned_away()


class ReceptionistAgent:
    def __init__(self, day: "AgentDay", index: int):
        self.day = day
        self.customer: Optional[CustomerAgent] = None
        self.chart = receptionist_chart(
            can_issue=lambda ctx: day.ticket_allowed(),
            wants_ticket=lambda ctx: needs_ticket(self.customer.entity.kind, self.customer.entity.quick, day.rules),
            on_issue=lambda ctx: self._issue(),
            on_refuse=lambda ctx: self._refuse(),
            on_finish=lambda ctx: self.customer.tell("service_finished"),
        )
        day.watch(self.chart, f"receptionist-{index}")

    def poll(self) -> None:
        day = self.day
        if self.chart.current != "idle" or not day.reception_open():
            return
        q = day.next_reception_queue()
        if q is None:
            return
        request = "phone_request" if q.head.kind is EntityKind.PHONE_CALL else "desk_request"
        self.chart.dispatch(_message(request))
        e = seize(day.reception, q, day.now)
        self.customer = day.agents[e.id]
        self.customer.tell("called")
        duration = day.reception_duration(e)
        day.emit("reception_start", e, duration=duration)
        day.cal.schedule(day.now + duration, ("timer", (self, SERVICE_DONE)))

    def on_timer(self, timer: Timer) -> None:
        day = self.day
        day.reception.release()
        day.emit("reception_end", self.customer.entity)
        self.chart.dispatch(timer)
        self.chart.settle()
        self.customer = None
        self.poll()

    def _issue(self) -> None:
        day, e = self.day, self.customer.entity
        ticket = day.tickets.issue(e, day.now)
        day.emit("ticket", e, number=ticket.number)
        self.customer.tell("ticket_issued")
        day.advisory_queue.enqueue(e, day.now)
        day.poll_advisors()

    def _refuse(self) -> None:
        self.customer.tell("turned_away")
        self.day.emit("turned_away", self.customer.entity)


class AdvisorAgent:
    def __init__(self, day: "AgentDay", index: int):
        self.day = day
        self.customer: Optional[CustomerAgent] = None
        self.chart = advisor_chart(on_finish=lambda ctx: self.customer.tell("service_finished"))
        day.watch(self.chart, f"advisor-{index}")

    def poll(self) -> bool:
        day = self.day
        if self.chart.current != "idle" or not day.advisory_open() or not len(day.advisory_queue):
            return False
        self.chart.dispatch(_message("call_next"))
        e = seize(day.advisory, day.advisory_queue, day.now)
        self.customer = day.agents[e.id]
        self.customer.tell("called")
        base, duration = day.advisory_duration()
        day.emit("advisory_start", e, duration=duration, base=base, number=e.ticket)
        day.cal.schedule(day.now + duration, ("timer", (self, SERVICE_DONE)))
        return True

    def on_timer(self, timer: Timer) -> None:
        day = self.day
        day.advisory.release()
        day.emit("advisory_end", self.customer.entity)
        self.chart.dispatch(timer)
        self.customer = None
        day.poll_advisors()


class AgentDay(_Day):
    """Hybrid model: process skeleton populated by state-chart agents."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.agents: dict[int, CustomerAgent] = {}
        self.receptionists = [ReceptionistAgent(self, i) for i in range(self.cfg.reception_capacity)]
        self.advisors = [AdvisorAgent(self, i) for i in range(self.cfg.advisory_capacity)]

    def watch(self, chart: StateChart, who) -> None:
        if self.trace is None:
            return

        def listener(chart, source, target, label):
            self.trace.append(
                {"t": self.now, "seq": self._seq, "event": "transition", "agent": who,
                 "from": source, "to": target, "trigger": label}
            )

        chart.listener = listener

    def queue_for(self, kind: EntityKind) -> FifoQueue:
        return self._queue_for[kind]

    def poll_receptionists(self) -> None:
        for r in self.receptionists:
            r.poll()

    def poll_advisors(self) -> None:
        # Keep offering work until no advisor takes any, mirroring a greedy start loop.
        while any(a.poll() for a in self.advisors):
            pass

    def handle(self, tag: str, payload: Any) -> None:
        if tag == "arrival":
            e = self.new_entity(payload)
            self.emit("arrival", e)
            self.schedule_next_arrival(payload)
            agent = CustomerAgent(self, e)
            self.agents[e.id] = agent
            agent.arrive()
            self.poll_receptionists()
        elif tag == "timer":
            agent, timer = payload
            agent.on_timer(timer)
        elif tag == "window_open":
            self.emit("window_open")
            self.poll_advisors()
        else:
            self.emit(tag)


def run_day_des(cfg: ScenarioConfig, master_seed: int, replication_index: int, trace=None) -> ReplicationMetrics:
    return ProcessDay(cfg, master_seed, replication_index, trace).run()


def run_day_hybrid(cfg: ScenarioConfig, master_seed: int, replication_index: int, trace=None) -> ReplicationMetrics:
    return AgentDay(cfg, master_seed, replication_index, trace).run()


def run_day(cfg: ScenarioConfig, master_seed: int, replication_index: int, trace=None) -> ReplicationMetrics:
    """Simulate one day in the paradigm named by ``cfg.mode``.

    If ``trace`` is a list, one dict per simulation event is appended to it.
    """
    cfg.validate()
    runner = run_day_des if cfg.mode == "des" else run_day_hybrid
    return runner(cfg, master_seed, replication_index, trace)
