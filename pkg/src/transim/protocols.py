"""Control protocols driving the hardware: emission, up-conversion,
down-conversion, and midpoint measurement.

Protocols hold no physics constants. They are thin event handlers that call
hardware operations and leave all probabilities to the components; the
strategy-specific behavior (where a failed conversion ends up, where the
fiber delivers) lives entirely in how the topology wires receivers.
"""

from __future__ import annotations

from dataclasses import dataclass
from heapq import heappush

from .hardware import (ConversionOutcome, Domain, FockBeamSplitter,
                       FockDetector, Photon, Transducer, Transmon)
from .timeline import Timeline

# Payload marking the end of a beam-splitter coincidence window.
_WINDOW_CLOSE = object()


@dataclass(slots=True)
class MeasurementRecord:
    """Detector outcomes aggregated over one coincidence window.

    detected_counts follow the detector kind: exact multiplicities for a
    PNRD, counts capped at 1 for an SPD.
    """

    trial_index: int
    time: int | None
    clicks: tuple[bool, bool]
    detected_counts: tuple[int, int]
    photons_at_splitter: int


class EmittingProtocol:
    """Drives periodic single-photon emission from one transmon.

    Emissions self-schedule: firing trial k enqueues trial k+1 one period
    later, so the event queue stays shallow however many trials run. The
    net schedule is still one emission at every k * period, k < trials.
    """

    __slots__ = ("timeline", "name", "transmon", "_period_ps", "_trials")

    def __init__(self, timeline: Timeline, name: str, transmon: Transmon):
        self.timeline = timeline
        self.name = name
        self.transmon = transmon
        self._period_ps = 0
        self._trials = 0
        timeline.register(name, self._on_emit)

    def start(self, period_ps: int, trials: int) -> None:
        """Schedule `trials` emissions at times 0, period, 2*period, ..."""
        if trials <= 0:
            raise ValueError(f"trials must be positive (got {trials})")
        if period_ps <= 0:
            raise ValueError(f"period_ps must be positive (got {period_ps})")
        self._period_ps = period_ps
        self._trials = trials
        self.timeline.schedule(self.timeline.now, self.name, 0)

    def _on_emit(self, trial: int, time: int) -> None:
        next_trial = trial + 1
        if next_trial < self._trials:
            # Self-scheduled re-emission; equivalent to timeline.schedule but
            # without re-resolving this protocol's own handler.
            timeline = self.timeline
            seq = timeline._sequence
            timeline._sequence = seq + 1
            heappush(timeline._queue,
                     (time + self._period_ps, seq, self.name, self._on_emit,
                      next_trial))
        self.transmon.emit(time, trial)


class UpConversionProtocol:
    """Feeds freshly emitted microwave photons into a transducer.

    Success and failure destinations are whatever receivers the topology
    wired onto the transducer (fiber on the optical port; a detector or a
    holding transmon on the microwave port).
    """

    __slots__ = ("transducer",)

    def __init__(self, transducer: Transducer):
        self.transducer = transducer

    def receive(self, photon: Photon, time: int) -> ConversionOutcome:
        if photon.domain is not Domain.MICROWAVE:
            raise ValueError("up-conversion accepts only microwave photons")
        return self.transducer.convert(photon, time)


class DownConversionProtocol:
    """Converts fiber arrivals back to the microwave domain at the far end."""

    __slots__ = ("timeline", "name", "transducer")

    def __init__(self, timeline: Timeline, name: str, transducer: Transducer):
        self.timeline = timeline
        self.name = name
        self.transducer = transducer
        timeline.register(name, self._on_arrival)

    def _on_arrival(self, photon: Photon, time: int) -> None:
        self.receive(photon, time)

    def receive(self, photon: Photon, time: int) -> ConversionOutcome:
        if photon.domain is not Domain.OPTICAL:
            raise ValueError("down-conversion accepts only optical photons")
        return self.transducer.convert(photon, time)


class MeasurementProtocol:
    """Collects midpoint arrivals per coincidence window and records clicks.

    The first arrival opens a window and schedules its close one coincidence
    window later; everything buffered by then is routed through the beam
    splitter in a single batch and offered to both detectors.
    """

    __slots__ = ("timeline", "name", "splitter", "detectors", "records", "_pending")

    def __init__(self, timeline: Timeline, name: str, splitter: FockBeamSplitter,
                 detectors: tuple[FockDetector, FockDetector]):
        self.timeline = timeline
        self.name = name
        self.splitter = splitter
        self.detectors = detectors
        self.records: dict[int, MeasurementRecord] = {}
        self._pending: list[Photon] = []
        timeline.register(name, self._on_event)

    def _on_event(self, payload, time: int) -> None:
        if payload is _WINDOW_CLOSE:
            self._close_window(time)
        else:
            self._on_arrival(payload, time)

    def _on_arrival(self, photon: Photon, time: int) -> None:
        if not self._pending:
            self.timeline.schedule(
                time + self.splitter.coincidence_window_ps, self.name, _WINDOW_CLOSE)
        self._pending.append(photon)

    def _close_window(self, time: int) -> None:
        photons = self._pending
        self._pending = []
        trial = photons[0].trial_index
        for photon in photons:
            if photon.trial_index != trial:
                raise RuntimeError(
                    "photons from different trials fell into one coincidence window")
        # Bunching sends every photon in the window to the same port, so the
        # detector on the other port sees nothing and consumes no draw.
        port = self.splitter.route(photons, time)[0]
        hit = self.detectors[port].detect(photons, time)
        if port == 0:
            clicks = (hit.clicked, False)
            counts = (hit.detected_count, 0)
        else:
            clicks = (False, hit.clicked)
            counts = (0, hit.detected_count)
        self.records[trial] = MeasurementRecord(
            trial_index=trial,
            time=time,
            clicks=clicks,
            detected_counts=counts,
            photons_at_splitter=len(photons),
        )

    def collect(self, trial: int) -> MeasurementRecord:
        """Return the record for a trial; a zero record if nothing arrived."""
        record = self.records.get(trial)
        if record is None:
            return MeasurementRecord(trial, None, (False, False), (0, 0), 0)
        return record
