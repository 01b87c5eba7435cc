"""Physical component models: photons, transmons, transducers, fiber channel,
Fock beam splitter, and Fock detectors.

All stochastic behavior is a Bernoulli draw against an injected random
stream, with a fixed draw budget per operation: one draw per conversion
attempt regardless of outcome, one per photon per fiber crossing, one per
routing window, and one per photon incident on a detector. Keeping the
budget independent of outcomes means a parameter change never shifts the
draw sequence of an unrelated component.

Components are passive state owned by a single timeline. Cross-component
delivery happens through ``receive(photon, time)``; anything that must
arrive later (fiber propagation) goes through the timeline event queue.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Protocol

from .timeline import RandomStream, Timeline

OPTICAL_WAVELENGTH_NM = 1550.0
# ~6 GHz transmon emission band; informational only.
MICROWAVE_WAVELENGTH_NM = 5.0e7

DEFAULT_ATTENUATION_LENGTH_KM = 22.0
DEFAULT_DELAY_PS_PER_KM = 5000.0
DEFAULT_COINCIDENCE_WINDOW_PS = 1000


class Domain(Enum):
    """Frequency domain of a flying photon."""

    MICROWAVE = "microwave"
    OPTICAL = "optical"


class PhotonOrigin(Enum):
    SOURCE_ANCILLA = "source_ancilla"
    DESTINATION_ANCILLA = "destination_ancilla"
    INFORMATION_QUBIT = "information_qubit"


class DetectorKind(Enum):
    """SPD clicks on one-or-more photons; PNRD resolves the exact count."""

    SPD = "spd"
    PNRD = "pnrd"


class Receiver(Protocol):
    def receive(self, photon: "Photon", time: int) -> None: ...


@dataclass(slots=True)
class Photon:
    """A flying excitation tagged with its frequency domain and trial.

    The domain flips only inside a successful transducer conversion;
    photon_id and trial_index are immutable for the life of the run.
    """

    photon_id: int
    domain: Domain
    emit_time: int
    trial_index: int
    origin: PhotonOrigin
    wavelength_nm: float = OPTICAL_WAVELENGTH_NM


@dataclass(slots=True)
class ConversionOutcome:
    converted: bool
    photon: Photon


@dataclass(slots=True)
class ChannelOutcome:
    survived: bool
    arrival_time: int | None


@dataclass(slots=True)
class DetectionEvent:
    clicked: bool
    detected_count: int


def _check_probability(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must be within [0, 1] (got {value})")


class Transmon:
    """Superconducting qubit used as microwave photon emitter and sink.

    Attributes:
        name (str): component name.
        wavelength_nm (float): band of emitted photons, informational.
        receiver: where emitted photons are delivered; None for a terminal
            transmon that only collects photons.
        origin (PhotonOrigin): role tag stamped onto emitted photons.
        emit_log: list of (time, trial_index, photon_id), one entry per emission.
        received_log: list of (time, photon_id), one entry per received photon.
    """

    __slots__ = ("name", "timeline", "wavelength_nm", "receiver", "origin",
                 "emit_log", "received_log")

    def __init__(self, name: str, timeline: Timeline,
                 wavelength_nm: float = MICROWAVE_WAVELENGTH_NM,
                 receiver: Receiver | None = None,
                 origin: PhotonOrigin = PhotonOrigin.INFORMATION_QUBIT):
        self.name = name
        self.timeline = timeline
        self.wavelength_nm = wavelength_nm
        self.receiver = receiver
        self.origin = origin
        self.emit_log: list[tuple[int, int, int]] = []
        self.received_log: list[tuple[int, int]] = []

    def emit(self, time: int, trial: int) -> Photon:
        """Generate exactly one microwave photon and hand it to the receiver."""
        timeline = self.timeline
        photon_id = timeline._next_photon_id
        timeline._next_photon_id = photon_id + 1
        photon = Photon(photon_id, Domain.MICROWAVE,
                        time, trial, self.origin, self.wavelength_nm)
        self.emit_log.append((time, trial, photon_id))
        receiver = self.receiver
        if receiver is not None:
            receiver.receive(photon, time)
        return photon

    def receive(self, photon: Photon, time: int) -> None:
        self.received_log.append((time, photon.photon_id))


class Transducer:
    """Bidirectional microwave/optical frequency converter.

    A single efficiency governs both directions: a microwave input attempts
    an up-conversion, an optical input a down-conversion. The output photon
    is delivered to the receiver matching its (possibly flipped) domain, so
    the same-domain receiver acts as the failure port.

    Attributes:
        efficiency (float): probability a conversion attempt succeeds.
        optical_receiver: destination for optical-domain output photons.
        microwave_receiver: destination for microwave-domain output photons.
        conversion_log: list of (trial_index, time, direction, converted)
            with direction in {"up", "down"}.
    """

    __slots__ = ("name", "efficiency", "rand", "optical_receiver",
                 "microwave_receiver", "optical_wavelength_nm",
                 "microwave_wavelength_nm", "conversion_log")

    def __init__(self, name: str, efficiency: float, rand: RandomStream,
                 optical_receiver: Receiver | None = None,
                 microwave_receiver: Receiver | None = None,
                 optical_wavelength_nm: float = OPTICAL_WAVELENGTH_NM,
                 microwave_wavelength_nm: float = MICROWAVE_WAVELENGTH_NM):
        _check_probability("efficiency", efficiency)
        self.name = name
        self.efficiency = efficiency
        self.rand = rand
        self.optical_receiver = optical_receiver
        self.microwave_receiver = microwave_receiver
        self.optical_wavelength_nm = optical_wavelength_nm
        self.microwave_wavelength_nm = microwave_wavelength_nm
        self.conversion_log: list[tuple[int, int, str, bool]] = []

    def convert(self, photon: Photon, time: int) -> ConversionOutcome:
        """Attempt one conversion, consuming exactly one draw.

        On success the photon's domain flips; either way it is routed to the
        receiver matching its output domain.
        """
        converted = self.rand.draw_unit() < self.efficiency
        if photon.domain is Domain.MICROWAVE:
            direction = "up"
            if converted:
                photon.domain = Domain.OPTICAL
                photon.wavelength_nm = self.optical_wavelength_nm
        else:
            direction = "down"
            if converted:
                photon.domain = Domain.MICROWAVE
                photon.wavelength_nm = self.microwave_wavelength_nm
        self.conversion_log.append((photon.trial_index, time, direction, converted))
        receiver = (self.optical_receiver if photon.domain is Domain.OPTICAL
                    else self.microwave_receiver)
        if receiver is not None:
            receiver.receive(photon, time)
        return ConversionOutcome(converted, photon)


class OpticalChannel:
    """Lossy fiber link for optical photons.

    Survival is Bernoulli with probability exp(-length / attenuation_length);
    survivors are scheduled for delivery to the remote handler after the
    propagation delay. Microwave photons are rejected outright since they
    never traverse fiber in either strategy.

    Attributes:
        length_km (float): fiber length.
        attenuation_length_km (float): length over which survival drops by 1/e.
        delay_ps (int): total propagation delay for this length.
        remote_target (str | None): registered handler receiving survivors.
        transit_log: list of (trial_index, survived), one entry per photon sent.
    """

    __slots__ = ("name", "timeline", "length_km", "attenuation_length_km",
                 "delay_ps_per_km", "delay_ps", "survival_probability",
                 "rand", "remote_target", "transit_log", "_remote_handler")

    def __init__(self, name: str, timeline: Timeline, length_km: float,
                 rand: RandomStream,
                 attenuation_length_km: float = DEFAULT_ATTENUATION_LENGTH_KM,
                 delay_ps_per_km: float = DEFAULT_DELAY_PS_PER_KM,
                 remote_target: str | None = None):
        if length_km < 0:
            raise ValueError(f"length_km must be non-negative (got {length_km})")
        if attenuation_length_km <= 0:
            raise ValueError(
                f"attenuation_length_km must be positive (got {attenuation_length_km})")
        self.name = name
        self.timeline = timeline
        self.length_km = length_km
        self.attenuation_length_km = attenuation_length_km
        self.delay_ps_per_km = delay_ps_per_km
        self.delay_ps = int(round(length_km * delay_ps_per_km))
        self.survival_probability = math.exp(-length_km / attenuation_length_km)
        self.rand = rand
        self.remote_target = remote_target
        self.transit_log: list[tuple[int, bool]] = []
        self._remote_handler = None

    def receive(self, photon: Photon, time: int) -> None:
        self.transmit(photon, time)

    def transmit(self, photon: Photon, send_time: int) -> ChannelOutcome:
        """Send one photon down the fiber, consuming exactly one draw.

        Survivors of a zero-length link are handed over synchronously (the
        timestamp does not move); any positive delay goes through the event
        queue so time ordering is preserved.
        """
        if photon.domain is not Domain.OPTICAL:
            raise ValueError(
                f"channel {self.name!r} received a {photon.domain.value} photon; "
                "only optical photons traverse fiber")
        survived = self.rand.draw_unit() < self.survival_probability
        self.transit_log.append((photon.trial_index, survived))
        if not survived:
            return ChannelOutcome(False, None)
        delay = self.delay_ps
        if self.remote_target is not None:
            if delay == 0:
                handler = self._remote_handler
                if handler is None:
                    handler = self._remote_handler = self.timeline.resolve(
                        self.remote_target)
                handler(photon, send_time)
            else:
                self.timeline.schedule(send_time + delay, self.remote_target, photon)
        return ChannelOutcome(True, send_time + delay)


class FockBeamSplitter:
    """Balanced splitter in front of the two heralding detectors.

    A lone photon exits through a uniformly random port. Two photons in the
    same coincidence window are treated as indistinguishable and bunch: both
    exit through the same uniformly random port. Either way the window
    consumes exactly one draw.

    Attributes:
        receivers: the two detectors behind the output ports.
        coincidence_window_ps (int): arrivals closer than this are one window.
        routing_log: list of (trial_index, photon_count, port).
    """

    __slots__ = ("name", "rand", "receivers", "coincidence_window_ps", "routing_log")

    def __init__(self, name: str, rand: RandomStream,
                 receivers: tuple["FockDetector", "FockDetector"] | None = None,
                 coincidence_window_ps: int = DEFAULT_COINCIDENCE_WINDOW_PS):
        self.name = name
        self.rand = rand
        self.receivers = receivers
        self.coincidence_window_ps = coincidence_window_ps
        self.routing_log: list[tuple[int, int, int]] = []

    def route(self, photons: list[Photon], time: int) -> list[int]:
        """Assign an output port to every photon in one window."""
        count = len(photons)
        if count not in (1, 2):
            raise RuntimeError(
                f"beam splitter window holds {count} photons; "
                "these topologies deliver one or two")
        port = 0 if self.rand.draw_unit() < 0.5 else 1
        self.routing_log.append((photons[0].trial_index, count, port))
        return [port] * count


class FockDetector:
    """Photon detector in the occupation-number picture.

    Each incident photon registers independently with probability
    ``efficiency`` (one draw per photon). An SPD reports only click/no-click,
    capping the reported count at 1; a PNRD reports the exact number of
    registered photons.

    Attributes:
        kind (DetectorKind): SPD or PNRD.
        efficiency (float): per-photon registration probability.
        total_clicks (int): windows with at least one registered photon.
        photon_count_histogram (Counter): reported count -> occurrences,
            over windows with at least one incident photon.
        detection_log: list of (trial_index, time, incident, detected).
    """

    __slots__ = ("name", "kind", "efficiency", "rand", "total_clicks",
                 "photon_count_histogram", "detection_log")

    def __init__(self, name: str, kind: DetectorKind, efficiency: float,
                 rand: RandomStream):
        _check_probability("efficiency", efficiency)
        self.name = name
        self.kind = kind
        self.efficiency = efficiency
        self.rand = rand
        self.total_clicks = 0
        self.photon_count_histogram: Counter[int] = Counter()
        self.detection_log: list[tuple[int, int, int, int]] = []

    def receive(self, photon: Photon, time: int) -> None:
        self.detect([photon], time)

    def detect(self, photons: list[Photon], time: int) -> DetectionEvent:
        """Register incident photons, consuming one draw per photon."""
        detected = 0
        rand = self.rand
        efficiency = self.efficiency
        for _ in photons:
            if rand.draw_unit() < efficiency:
                detected += 1
        clicked = detected >= 1
        reported = detected if self.kind is DetectorKind.PNRD else min(detected, 1)
        if photons:
            if clicked:
                self.total_clicks += 1
            self.photon_count_histogram[reported] += 1
            self.detection_log.append(
                (photons[0].trial_index, time, len(photons), detected))
        return DetectionEvent(clicked, reported)
