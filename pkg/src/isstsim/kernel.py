"""Next-event simulation kernel and seeded random-variate generation.

Simulation time is measured in real-valued minutes since the office opens
(0.0 is 9:00 am, 480.0 is 5:00 pm).
"""

from __future__ import annotations

import hashlib
import heapq
import itertools
import math
import random
from dataclasses import dataclass, field
from typing import Any, Optional, Union

HORIZON = 480.0
HOURS = 8

STREAM_IDS = (
    "arrivals-general",
    "arrivals-advisory",
    "arrivals-phone",
    "service-reception",
    "service-advisor",
    "behavior",
)


class SchedulingError(ValueError):
    """Raised when an event is scheduled before the current clock."""


@dataclass(frozen=True, order=True)
class SimEvent:
    time: float
    seq: int
    action: Any = field(compare=False)


class EventCalendar:
    """Future event list ordered by ``(time, seq)``.

    ``seq`` is an insertion counter, so events with equal times are
    dispatched first-in-first-out.
    """

    def __init__(self, start: float = 0.0):
        self.clock = float(start)
        # Entries are (time, seq, event) tuples; tuple comparison is much
        # cheaper than dataclass ordering on the hot path.
        self._heap: list[tuple[float, int, SimEvent]] = []
        self._counter = itertools.count()

    def __len__(self) -> int:
        return len(self._heap)

    def __bool__(self) -> bool:
        return bool(self._heap)

    def schedule(self, time: float, action: Any) -> SimEvent:
        time = float(time)
        if not math.isfinite(time):
            raise SchedulingError(f"event time must be finite, got {time!r}")
        if time < self.clock:
            raise SchedulingError(
                f"cannot schedule {action!r} at t={time!r}: clock is already {self.clock!r}"
            )
        seq = next(self._counter)
        ev = SimEvent(time, seq, action)
        heapq.heappush(self._heap, (time, seq, ev))
        return ev

    def peek(self) -> Optional[SimEvent]:
        return self._heap[0][2] if self._heap else None

    def pop_next(self) -> Optional[SimEvent]:
        if not self._heap:
            return None
        ev = heapq.heappop(self._heap)[2]
        self.clock = ev.time
        return ev


def mix(*parts: Any) -> int:
    """Derive a 64-bit seed from an ordered tuple of labels and integers.

    The digest is computed over the ``repr`` of each part, so the result is
    independent of platform and ``PYTHONHASHSEED``.
    """
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(repr(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "big")


class RngStream:
    """One named, independently seeded stream of uniform variates.

    The state is fully determined by ``(master_seed, replication_index,
    stream_id)``; streams never share a generator.
    """

    __slots__ = ("stream_id", "seed", "_rng", "draws")

    def __init__(self, master_seed: int, replication_index: int, stream_id: str):
        self.stream_id = stream_id
        self.seed = mix(int(master_seed), int(replication_index), stream_id)
        self._rng = random.Random(self.seed)
        self.draws = 0

    def uniform(self) -> float:
        """Return u in [0, 1)."""
        self.draws += 1
        return self._rng.random()

    def __repr__(self) -> str:
        return f"RngStream({self.stream_id!r}, seed={self.seed})"


def make_streams(master_seed: int, replication_index: int) -> dict[str, RngStream]:
    return {sid: RngStream(master_seed, replication_index, sid) for sid in STREAM_IDS}


@dataclass(frozen=True)
class TriangularParams:
    min_minutes: float
    mode_minutes: float
    max_minutes: float

    def __post_init__(self):
        lo, mode, hi = self.min_minutes, self.mode_minutes, self.max_minutes
        if not all(math.isfinite(v) for v in (lo, mode, hi)):
            raise ValueError(f"triangular parameters must be finite: {self}")
        if lo < 0:
            raise ValueError(f"triangular min must be >= 0, got {lo}")
        if not lo <= mode <= hi:
            raise ValueError(f"triangular parameters need min <= mode <= max, got {self}")

    @property
    def mean(self) -> float:
        return (self.min_minutes + self.mode_minutes + self.max_minutes) / 3.0

    @property
    def variance(self) -> float:
        a, c, b = self.min_minutes, self.mode_minutes, self.max_minutes
        return (a * a + b * b + c * c - a * b - a * c - b * c) / 18.0

    def quantile(self, u: float) -> float:
        a, c, b = self.min_minutes, self.mode_minutes, self.max_minutes
        width = b - a
        if width == 0:
            return a
        if u < (c - a) / width:
            return a + math.sqrt(u * width * (c - a))
        return b - math.sqrt((1.0 - u) * width * (b - c))

    def sample(self, s: RngStream) -> float:
        return self.quantile(s.uniform())


@dataclass(frozen=True)
class ExponentialParams:
    """Exponential service time, used for queueing-theory reductions."""

    mean_minutes: float

    def __post_init__(self):
        if not (math.isfinite(self.mean_minutes) and self.mean_minutes > 0):
            raise ValueError(f"exponential mean must be > 0, got {self.mean_minutes}")

    @property
    def mean(self) -> float:
        return self.mean_minutes

    def quantile(self, u: float) -> float:
        return exponential_quantile(1.0 / self.mean_minutes, u)

    def sample(self, s: RngStream) -> float:
        return self.quantile(s.uniform())


ServiceDist = Union[TriangularParams, ExponentialParams]


def sample_triangular(p: TriangularParams, s: RngStream) -> float:
    return p.sample(s)


def exponential_quantile(rate_per_minute: float, u: float) -> float:
    if not rate_per_minute > 0:
        raise ValueError(f"exponential rate must be > 0, got {rate_per_minute}")
    return -math.log1p(-u) / rate_per_minute


def sample_exponential(rate_per_minute: float, s: RngStream) -> float:
    return exponential_quantile(rate_per_minute, s.uniform())


@dataclass(frozen=True)
class ArrivalSchedule:
    """Expected arrivals per hour for each of the eight operating hours."""

    hourly_rates: tuple[float, ...]

    def __post_init__(self):
        rates = tuple(float(r) for r in self.hourly_rates)
        if len(rates) != HOURS:
            raise ValueError(f"arrival schedule needs exactly {HOURS} hourly rates, got {len(rates)}")
        for r in rates:
            if not (math.isfinite(r) and r >= 0):
                raise ValueError(f"hourly rates must be finite and >= 0, got {r!r}")
        object.__setattr__(self, "hourly_rates", rates)

    @classmethod
    def constant(cls, per_hour: float) -> "ArrivalSchedule":
        return cls((per_hour,) * HOURS)

    @classmethod
    def zero(cls) -> "ArrivalSchedule":
        return cls.constant(0.0)

    @property
    def max_rate(self) -> float:
        return max(self.hourly_rates)

    def rate_at(self, t: float) -> float:
        """Rate in arrivals per hour at minute ``t``; zero outside the day."""
        h = int(t // 60.0)
        if 0 <= h < HOURS:
            return self.hourly_rates[h]
        return 0.0


def next_arrival(
    sched: ArrivalSchedule, now: float, s: RngStream, horizon: float = HORIZON
) -> Optional[float]:
    """Next arrival time after ``now`` of a piecewise-constant Poisson process.

    Candidates come from a homogeneous process at the peak hourly rate and are
    kept with probability rate(t) / peak (thinning). Returns None when no
    arrival falls before ``horizon``.
    """
    peak = sched.max_rate
    if peak <= 0:
        return None
    peak_per_minute = peak / 60.0
    t = now
    while True:
        t += sample_exponential(peak_per_minute, s)
        if t >= horizon:
            return None
        if s.uniform() * peak < sched.rate_at(t):
            return t
