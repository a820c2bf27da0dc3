"""Reactive and proactive staff/student behaviour.

The three proactive rules are plain predicates so the process-oriented model
can branch on them directly. The agent model instead wires the same
predicates into state-chart guards (see the ``*_chart`` templates below).

- stop-numbers: the receptionist stops handing out waiting numbers when the
  advisors cannot see everyone in the remaining walk-in time.
- speed-up: advisors shorten service when the backlog would overrun.
- skip: a student with a quick question jumps a long reception queue.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Optional, Union

from isstsim.kernel import RngStream, TriangularParams
from isstsim.queueing import EntityKind


@dataclass(frozen=True)
class BehaviorRuleSet:
    stop_numbers_enabled: bool = False
    speedup_enabled: bool = False
    skip_enabled: bool = False
    stop_slack_minutes: float = 0.0
    speedup_factor: float = 0.8
    speedup_close: float = 480.0
    skip_threshold_len: int = 4
    quick_enquiry_prob: float = 0.15
    quick_service: TriangularParams = field(default_factory=lambda: TriangularParams(0.5, 1.0, 2.0))
    # An advisory-bound student whose quick question was answered no longer needs a number.
    quick_resolves_advisory: bool = True

    def __post_init__(self):
        if not math.isfinite(self.stop_slack_minutes):
            raise ValueError("rules.stop_slack_minutes must be finite")
        if not 0.0 < self.speedup_factor <= 1.0:
            raise ValueError(f"rules.speedup_factor must be in (0, 1], got {self.speedup_factor}")
        if not (math.isfinite(self.speedup_close) and self.speedup_close >= 0):
            raise ValueError(f"rules.speedup_close must be a finite time >= 0, got {self.speedup_close}")
        if int(self.skip_threshold_len) != self.skip_threshold_len or self.skip_threshold_len < 1:
            raise ValueError(f"rules.skip_threshold_len must be an integer >= 1, got {self.skip_threshold_len}")
        if not 0.0 <= self.quick_enquiry_prob <= 1.0:
            raise ValueError(f"rules.quick_enquiry_prob must be in [0, 1], got {self.quick_enquiry_prob}")

    def with_toggles(self, stop: bool, speedup: bool, skip: bool) -> "BehaviorRuleSet":
        return replace(self, stop_numbers_enabled=stop, speedup_enabled=speedup, skip_enabled=skip)

    @property
    def any_enabled(self) -> bool:
        return self.stop_numbers_enabled or self.speedup_enabled or self.skip_enabled


def should_issue_number(
    queue_len: int,
    now: float,
    mean_adv_service: float,
    advisors: int,
    rules: BehaviorRuleSet,
    walkin_close: float,
) -> bool:
    """Whether the receptionist still hands out a waiting number.

    With the rule on, a number is issued only if the projected advisory
    workload including the new student fits in the remaining walk-in time.
    """
    if advisors < 1:
        raise ValueError("advisors must be >= 1")
    if not rules.stop_numbers_enabled:
        return True
    if now > walkin_close:
        return False
    workload = (queue_len + 1) * mean_adv_service / advisors
    return workload <= (walkin_close - now) + rules.stop_slack_minutes


def effective_service_time(
    base: float,
    waiting: int,
    now: float,
    mean_adv_service: float,
    advisors: int,
    rules: BehaviorRuleSet,
) -> float:
    if not rules.speedup_enabled:
        return base
    if waiting * mean_adv_service / advisors <= rules.speedup_close - now:
        return base
    return base * rules.speedup_factor


def decide_skip(kind: EntityKind, reception_len: int, rules: BehaviorRuleSet, s: RngStream) -> bool:
    # No draw is consumed unless the rule can actually apply.
    if not kind.is_student or not rules.skip_enabled:
        return False
    if reception_len < rules.skip_threshold_len:
        return False
    return s.uniform() < rules.quick_enquiry_prob


# --- state charts -----------------------------------------------------------


@dataclass(frozen=True)
class Message:
    name: str


@dataclass(frozen=True)
class Timer:
    name: str
    delay: Optional[float] = None


@dataclass(frozen=True)
class Condition:
    name: str
    predicate: Callable[[Any], bool] = field(compare=False, repr=False)


Trigger = Union[Message, Timer, Condition]


@dataclass(frozen=True)
class Transition:
    source: str
    target: str
    trigger: Trigger
    guard: Optional[Callable[[Any], bool]] = field(default=None, compare=False, repr=False)
    action: Optional[Callable[[Any], None]] = field(default=None, compare=False, repr=False)

    def matches(self, trigger: Trigger, ctx: Any) -> bool:
        t = self.trigger
        if isinstance(trigger, Condition):
            # A dispatched condition only names which guard set to evaluate.
            if not isinstance(t, Condition):
                return False
            ok = t.predicate(ctx)
        elif type(t) is not type(trigger) or t.name != trigger.name:
            return False
        else:
            ok = True
        return ok and (self.guard is None or self.guard(ctx))


class StateChartError(RuntimeError):
    pass


class StateChart:
    """Flat state machine with message, timer and condition triggers.

    Exactly one transition fires per dispatched trigger: the first one, in
    declaration order, leaving the current state whose trigger and guard
    match. Condition transitions are evaluated by :meth:`settle`.
    """

    def __init__(self, name: str, states, initial: str, transitions=()):
        self.name = name
        self.states = frozenset(states)
        if initial not in self.states:
            raise StateChartError(f"{name}: initial state {initial!r} not declared")
        self.current = initial
        self.transitions: list[Transition] = []
        self.history: list[tuple[str, str, str]] = []
        self.listener: Optional[Callable[["StateChart", str, str, str], None]] = None
        for tr in transitions:
            self.add(tr)

    def add(self, tr: Transition) -> None:
        for s in (tr.source, tr.target):
            if s not in self.states:
                raise StateChartError(f"{self.name}: transition uses undeclared state {s!r}")
        self.transitions.append(tr)

    def dispatch(self, trigger: Trigger, ctx: Any = None) -> bool:
        for tr in self.transitions:
            if tr.source == self.current and tr.matches(trigger, ctx):
                self._fire(tr, ctx)
                return True
        return False

    def settle(self, ctx: Any = None, max_steps: int = 32) -> int:
        """Fire enabled condition transitions until none is enabled."""
        fired = 0
        while True:
            for tr in self.transitions:
                if (
                    tr.source == self.current
                    and isinstance(tr.trigger, Condition)
                    and tr.matches(tr.trigger, ctx)
                ):
                    self._fire(tr, ctx)
                    fired += 1
                    break
            else:
                return fired
            if fired >= max_steps:
                raise StateChartError(f"{self.name}: condition transitions did not settle")

    def _fire(self, tr: Transition, ctx: Any) -> None:
        label = getattr(tr.trigger, "name", "?")
        self.history.append((tr.source, tr.target, label))
        self.current = tr.target
        if self.listener is not None:
            self.listener(self, tr.source, tr.target, label)
        if tr.action is not None:
            tr.action(ctx)


def dispatch(chart: StateChart, trigger: Trigger, ctx: Any = None) -> StateChart:
    chart.dispatch(trigger, ctx)
    return chart


RECEPTIONIST_STATES = ("idle", "serving_desk", "serving_phone", "issuing_ticket")
ADVISOR_STATES = ("idle", "serving")
STUDENT_STATES = ("arriving", "queueing", "being_served", "done", "turned_away")
PHONE_CALLER_STATES = ("arriving", "queueing", "being_served", "done")


def needs_ticket(kind: EntityKind, quick: bool, rules: BehaviorRuleSet) -> bool:
    """Whether a visitor leaving the desk queues for an advisor next."""
    if kind is not EntityKind.STUDENT_ADVISORY:
        return False
    return not (quick and rules.quick_resolves_advisory)


def receptionist_chart(
    can_issue: Callable[[Any], bool] = lambda ctx: True,
    wants_ticket: Callable[[Any], bool] = lambda ctx: False,
    on_issue: Optional[Callable[[Any], None]] = None,
    on_refuse: Optional[Callable[[Any], None]] = None,
    on_finish: Optional[Callable[[Any], None]] = None,
) -> StateChart:
    """Receptionist: serves desk visitors and calls, issues waiting numbers.

    ``can_issue`` is the stop-numbers guard; ``wants_ticket`` tells whether
    the visitor just served came for an advisory meeting.
    """
    return StateChart(
        "receptionist",
        RECEPTIONIST_STATES,
        "idle",
        [
            Transition("idle", "serving_desk", Message("desk_request")),
            Transition("idle", "serving_phone", Message("phone_request")),
            Transition("serving_desk", "issuing_ticket", Timer("service_done"), guard=wants_ticket),
            Transition("serving_desk", "idle", Timer("service_done"), action=on_finish),
            Transition("serving_phone", "idle", Timer("service_done"), action=on_finish),
            Transition("issuing_ticket", "idle", Condition("numbers_available", can_issue), action=on_issue),
            Transition("issuing_ticket", "idle", Condition("numbers_stopped", lambda ctx: True), action=on_refuse),
        ],
    )


def advisor_chart(on_finish: Optional[Callable[[Any], None]] = None) -> StateChart:
    return StateChart(
        "advisor",
        ADVISOR_STATES,
        "idle",
        [
            Transition("idle", "serving", Message("call_next")),
            Transition("serving", "idle", Timer("service_done"), action=on_finish),
        ],
    )


_STUDENT_TRANSITIONS = (
    Transition("arriving", "queueing", Message("enter_queue")),
    Transition("queueing", "being_served", Message("called")),
    Transition("queueing", "turned_away", Message("turned_away")),
    Transition("being_served", "queueing", Message("ticket_issued")),
    Transition("being_served", "turned_away", Message("turned_away")),
    Transition("being_served", "done", Message("service_finished")),
)

_PHONE_CALLER_TRANSITIONS = (
    Transition("arriving", "queueing", Message("enter_queue")),
    Transition("queueing", "being_served", Message("called")),
    Transition("being_served", "done", Message("service_finished")),
)


# Customer charts carry no callbacks, so every instance shares one
# immutable transition table.
def student_chart() -> StateChart:
    return StateChart("student", STUDENT_STATES, "arriving", _STUDENT_TRANSITIONS)


def phone_caller_chart() -> StateChart:
    return StateChart("phone_caller", PHONE_CALLER_STATES, "arriving", _PHONE_CALLER_TRANSITIONS)
