"""Deterministic discrete-event engine with named random streams.

Simulation time is an integer number of picoseconds. Events are delivered in
(fire_time, sequence) order, where the sequence number is assigned at
scheduling time, so simultaneous events run in the order they were scheduled.

Every stochastic component draws from its own named stream seeded from
(master_seed, stream name). Adding or removing a component therefore never
perturbs the draw sequence of another component, and replaying a
configuration with the same master seed reproduces the run bit for bit.
"""

from __future__ import annotations

import hashlib
import heapq
from typing import Any, Callable, NamedTuple

import numpy as np

# Recorded in output headers so results can be tied to the generator that
# produced them. Philox is counter-based and platform-stable in numpy.
GENERATOR_NAME = "numpy.random.Philox"
GENERATOR_VERSION = np.__version__

Handler = Callable[[Any, int], None]


class RunStats(NamedTuple):
    events_processed: int
    final_time: int


def _stream_words(stream_id: str) -> tuple[int, ...]:
    """Stable 128-bit digest of a stream name, as four 32-bit words."""
    digest = hashlib.sha256(stream_id.encode("utf-8")).digest()
    return tuple(int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4))


class RandomStream:
    """Reproducible source of uniform variates in [0, 1).

    The underlying generator is seeded from (master_seed, stream_id), so two
    streams with the same name and master seed produce bit-identical
    sequences on any platform, while streams with different names are
    statistically independent.

    Attributes:
        stream_id (str): name of the stream, conventionally "component.purpose".
        draw_count (int): number of variates drawn so far.
    """

    _BLOCK = 4096

    __slots__ = ("stream_id", "_gen", "_buf", "_pos", "_refills", "_bulk_drawn")

    def __init__(self, master_seed: int, stream_id: str):
        if master_seed < 0:
            raise ValueError(f"master_seed must be non-negative (got {master_seed})")
        self.stream_id = stream_id
        seed_seq = np.random.SeedSequence(entropy=(master_seed,) + _stream_words(stream_id))
        self._gen = np.random.Generator(np.random.Philox(seed_seq))
        self._buf: list[float] = []
        self._pos = self._BLOCK
        self._refills = 0
        self._bulk_drawn = 0

    @property
    def draw_count(self) -> int:
        """Number of variates drawn so far."""
        if self._refills == 0:
            return self._bulk_drawn
        return (self._refills - 1) * self._BLOCK + self._pos + self._bulk_drawn

    def draw_unit(self) -> float:
        """Return the next uniform variate in [0, 1), advancing only this stream."""
        pos = self._pos
        if pos == 4096:  # == _BLOCK; buffer exhausted
            buf = self._buf = self._gen.random(4096).tolist()
            self._refills += 1
            pos = 0
        else:
            buf = self._buf
        self._pos = pos + 1
        return buf[pos]

    def draw_block(self, count: int) -> np.ndarray:
        """Return the next `count` variates at once.

        Yields exactly the sequence that `count` draw_unit calls would:
        buffered values are drained first, then the generator continues.
        """
        if count < 0:
            raise ValueError(f"count must be non-negative (got {count})")
        out = np.empty(count, dtype=np.float64)
        pos = self._pos
        available = len(self._buf) - pos
        take = min(count, available) if available > 0 else 0
        if take:
            out[:take] = self._buf[pos:pos + take]
            self._pos = pos + take
        remainder = count - take
        if remainder:
            out[take:] = self._gen.random(remainder)
            self._bulk_drawn += remainder
        return out


class Timeline:
    """Single-threaded event queue owning a run's clock, streams, and id space.

    Handlers are registered under a component name and invoked as
    handler(payload, fire_time). A timeline must never be shared between
    threads; independent runs get independent timelines.

    Attributes:
        now (int): current simulation time in ps; never decreases during a run.
        master_seed (int): seed all named streams are derived from.
        processed_log: list of (fire_time, sequence, target) for every event
            delivered, kept only when record_processed=True.
    """

    def __init__(self, master_seed: int = 0, record_processed: bool = False):
        self.master_seed = master_seed
        self.now = 0
        self.processed_log: list[tuple[int, int, str]] | None = (
            [] if record_processed else None
        )
        # Events carry their resolved handler so dispatch needs no lookup.
        self._queue: list[tuple[int, int, str, Handler, Any]] = []
        self._sequence = 0
        self._handlers: dict[str, Handler] = {}
        self._streams: dict[str, RandomStream] = {}
        self._next_photon_id = 0

    def register(self, name: str, handler: Handler) -> None:
        if name in self._handlers:
            raise ValueError(f"handler name already registered: {name!r}")
        self._handlers[name] = handler

    def resolve(self, name: str) -> Handler:
        handler = self._handlers.get(name)
        if handler is None:
            raise KeyError(f"no handler registered under {name!r}")
        return handler

    def stream(self, stream_id: str) -> RandomStream:
        """Return the named stream, creating it from the master seed on first use."""
        stream = self._streams.get(stream_id)
        if stream is None:
            stream = RandomStream(self.master_seed, stream_id)
            self._streams[stream_id] = stream
        return stream

    def next_photon_id(self) -> int:
        pid = self._next_photon_id
        self._next_photon_id += 1
        return pid

    def schedule(self, fire_time: int, target: str, payload: Any = None) -> int:
        """Enqueue an event; returns its unique sequence number.

        Equal-time events are delivered in scheduling order. Scheduling in
        the past is rejected because it always indicates a protocol bug.
        """
        if fire_time < self.now:
            raise ValueError(
                f"cannot schedule event at t={fire_time} ps: clock is at {self.now} ps"
            )
        handler = self._handlers.get(target)
        if handler is None:
            raise KeyError(f"no handler registered under {target!r}")
        seq = self._sequence
        self._sequence = seq + 1
        heapq.heappush(self._queue, (fire_time, seq, target, handler, payload))
        return seq

    def run_until(self, t_end: int) -> RunStats:
        """Process every event with fire_time <= t_end; clock ends at t_end.

        Handlers may schedule further events, which are honored in the same
        call when they fall within t_end.
        """
        if t_end < self.now:
            raise ValueError(f"t_end={t_end} ps is before current time {self.now} ps")
        queue = self._queue
        log = self.processed_log
        pop = heapq.heappop
        processed = 0
        while queue and queue[0][0] <= t_end:
            event = pop(queue)
            fire_time = event[0]
            self.now = fire_time
            if log is not None:
                log.append((fire_time, event[1], event[2]))
            event[3](event[4], fire_time)
            processed += 1
        self.now = t_end
        return RunStats(processed, t_end)
