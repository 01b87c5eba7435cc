"""End-to-end experiments for the two link strategies.

The direct strategy (DQT) converts the information photon itself: up at the
source, through the fiber, down at the destination. The herald strategy
(EQT) has both ends attempt an up-conversion of an ancilla photon toward a
midpoint beam splitter; a single detector click heralds a shared
microwave pair, and unconverted ancilla photons are parked in a holding
transmon instead of being measured.

Each experiment owns one timeline, runs a fixed number of emission periods,
reconstructs one TrialRecord per period from the component logs, and
summarizes counts against the matching closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from . import analytics
from .hardware import (DetectorKind, FockBeamSplitter, FockDetector,
                       OpticalChannel, PhotonOrigin, Transducer, Transmon)
from .protocols import (DownConversionProtocol, EmittingProtocol,
                        MeasurementProtocol, MeasurementRecord,
                        UpConversionProtocol)
from .timeline import Timeline


class ConfigError(ValueError):
    """Raised when an experiment configuration violates its invariants."""


class Strategy(Enum):
    DQT = "dqt"
    EQT = "eqt"


class DqtClass(Enum):
    """Outcome of one direct-conversion period, by first failing stage."""

    SUCCESS = "Success"
    UP_CONVERSION_FAILED = "UpConversionFailed"
    CHANNEL_LOSS = "ChannelLoss"
    DOWN_CONVERSION_FAILED = "DownConversionFailed"


class HeraldClass(Enum):
    """Outcome of one heralding period at the midpoint station."""

    TRUE_HERALD = "TrueHerald"
    FALSE_HERALD = "FalseHerald"
    NO_CLICK = "NoClick"
    REJECTED_MULTI_PHOTON = "RejectedMultiPhoton"


@dataclass(frozen=True, slots=True)
class ExperimentConfig:
    """All knobs of one experiment.

    DQT uses eta_up_source and eta_down_dest; EQT uses eta_up for both ends
    plus detector_kind and eta_d for the midpoint detectors. fiber_length_km
    is the full source-destination distance; the herald topology splits it
    into two arms of half that length.
    """

    strategy: Strategy
    eta_up_source: float | None = None
    eta_down_dest: float | None = None
    eta_up: float | None = None
    detector_kind: DetectorKind | None = None
    eta_d: float = 1.0
    fiber_length_km: float = 0.0
    attenuation_length_km: float = 22.0
    period_ps: int = 1_000_000
    trials: int = 100
    master_seed: int = 0

    def validate(self) -> None:
        for name in ("eta_up_source", "eta_down_dest", "eta_up", "eta_d"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must be within [0, 1] (got {value})")
        if self.strategy is Strategy.DQT:
            if self.eta_up_source is None or self.eta_down_dest is None:
                raise ConfigError(
                    "dqt requires eta_up_source and eta_down_dest")
        elif self.strategy is Strategy.EQT:
            if self.eta_up is None:
                raise ConfigError("eqt requires eta_up")
            if self.detector_kind is None:
                raise ConfigError("eqt requires detector_kind")
        else:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.fiber_length_km < 0:
            raise ConfigError(
                f"fiber_length_km must be non-negative (got {self.fiber_length_km})")
        if self.attenuation_length_km <= 0:
            raise ConfigError(
                f"attenuation_length_km must be positive (got {self.attenuation_length_km})")
        if self.period_ps < 1:
            raise ConfigError(f"period_ps must be positive (got {self.period_ps})")
        if self.trials < 1:
            raise ConfigError(f"trials must be at least 1 (got {self.trials})")
        if self.master_seed < 0:
            raise ConfigError(
                f"master_seed must be non-negative (got {self.master_seed})")

    def theoretical_probability(self) -> float:
        if self.strategy is Strategy.DQT:
            return analytics.dqt_success_probability(
                self.eta_up_source, self.eta_down_dest,
                self.fiber_length_km, self.attenuation_length_km)
        if self.detector_kind is DetectorKind.PNRD:
            return analytics.eqt_click_probability_pnrd(
                self.eta_up, self.eta_d,
                self.fiber_length_km, self.attenuation_length_km)
        return analytics.eqt_click_probability_spd(
            self.eta_up, self.eta_d,
            self.fiber_length_km, self.attenuation_length_km)


@dataclass(slots=True)
class TrialRecord:
    """Ground truth of one emission period, sufficient to re-derive its class.

    channel_survived holds one entry per photon that entered fiber: at most
    one for DQT; for EQT the source-arm entry (if the source converted)
    followed by the destination-arm entry (if the destination converted).
    """

    trial_index: int
    strategy: Strategy
    up_source_ok: bool
    down_dest_ok: bool | None = None
    up_dest_ok: bool | None = None
    channel_survived: tuple[bool, ...] = ()
    detections: MeasurementRecord | None = None
    classification: DqtClass | HeraldClass | None = None


@dataclass(slots=True)
class ResultsSummary:
    """Counts and probabilities aggregated over one experiment."""

    strategy: Strategy
    trials: int
    n_ideal: int
    n_observed: int
    simulated_probability: float
    theoretical_probability: float
    ci95: tuple[float, float]
    class_histogram: dict[str, int]
    config: ExperimentConfig

    def theory_inputs(self) -> dict:
        cfg = self.config
        inputs = {
            "strategy": cfg.strategy.value,
            "fiber_length_km": cfg.fiber_length_km,
            "attenuation_length_km": cfg.attenuation_length_km,
        }
        if cfg.strategy is Strategy.DQT:
            inputs["eta_up_source"] = cfg.eta_up_source
            inputs["eta_down_dest"] = cfg.eta_down_dest
        else:
            inputs["eta_up"] = cfg.eta_up
            inputs["eta_d"] = cfg.eta_d
            inputs["detector_kind"] = cfg.detector_kind.value
        return inputs


def classify_dqt(record: TrialRecord) -> DqtClass:
    """Classify a direct-conversion trial by its first failing stage.

    Rejects records whose fields could not have been produced by the
    pipeline (e.g. a fiber entry without a successful up-conversion).
    """
    if record.strategy is not Strategy.DQT:
        raise ValueError("record does not belong to a dqt run")
    survived = record.channel_survived
    if not record.up_source_ok:
        if survived or record.down_dest_ok is not None:
            raise ValueError("inconsistent record: nothing enters fiber after a failed up-conversion")
        return DqtClass.UP_CONVERSION_FAILED
    if len(survived) != 1:
        raise ValueError("inconsistent record: an up-converted photon crosses fiber exactly once")
    if not survived[0]:
        if record.down_dest_ok is not None:
            raise ValueError("inconsistent record: a lost photon cannot reach the far transducer")
        return DqtClass.CHANNEL_LOSS
    if record.down_dest_ok is None:
        raise ValueError("inconsistent record: a surviving photon must attempt down-conversion")
    if not record.down_dest_ok:
        return DqtClass.DOWN_CONVERSION_FAILED
    return DqtClass.SUCCESS


def classify_eqt(record: TrialRecord, detector_kind: DetectorKind) -> HeraldClass:
    """Classify a heralding trial from conversions, losses, and clicks.

    A single successful conversion whose photon registers is a true herald.
    When both ends converted, any click is a false herald (the shared state
    carries no pair), except that a PNRD registering both photons exposes
    and rejects the window.
    """
    if record.strategy is not Strategy.EQT:
        raise ValueError("record does not belong to an eqt run")
    if record.up_dest_ok is None:
        raise ValueError("inconsistent record: destination conversion missing")
    conversions = record.up_source_ok + record.up_dest_ok
    survived = record.channel_survived
    if len(survived) != conversions:
        raise ValueError("inconsistent record: one fiber entry per converted photon")
    arrived = survived.count(True)
    detections = record.detections
    if detections is None:
        detected_total = 0
        if arrived != 0:
            raise ValueError("inconsistent record: surviving photons must reach the splitter")
    else:
        if detections.photons_at_splitter != arrived:
            raise ValueError("inconsistent record: surviving photons must reach the splitter")
        counts = detections.detected_counts
        detected_total = counts[0] + counts[1]
        if detected_total > arrived:
            raise ValueError("inconsistent record: cannot register more photons than arrived")
    if conversions == 0:
        return HeraldClass.NO_CLICK
    if conversions == 1:
        return HeraldClass.TRUE_HERALD if detected_total >= 1 else HeraldClass.NO_CLICK
    if detector_kind is DetectorKind.PNRD:
        if detected_total >= 2:
            return HeraldClass.REJECTED_MULTI_PHOTON
        if detected_total == 1:
            return HeraldClass.FALSE_HERALD
        return HeraldClass.NO_CLICK
    clicked = detections is not None and (detections.clicks[0] or detections.clicks[1])
    return HeraldClass.FALSE_HERALD if clicked else HeraldClass.NO_CLICK


@dataclass
class DqtTopology:
    """Wired direct-conversion link, ready to run."""

    timeline: Timeline
    config: ExperimentConfig
    source_transmon: Transmon
    source_transducer: Transducer
    source_microwave_detector: FockDetector
    channel: OpticalChannel
    dest_transducer: Transducer
    dest_transmon: Transmon
    dest_optical_detector: FockDetector
    emitting: EmittingProtocol
    upconversion: UpConversionProtocol
    downconversion: DownConversionProtocol
    components: dict[str, object] = field(default_factory=dict)
    links: list[tuple[str, str]] = field(default_factory=list)


@dataclass
class EqtTopology:
    """Wired heralding link with a midpoint measurement station."""

    timeline: Timeline
    config: ExperimentConfig
    source_emitter: Transmon
    source_transducer: Transducer
    source_memory_transmon: Transmon
    source_arm: OpticalChannel
    dest_emitter: Transmon
    dest_transducer: Transducer
    dest_memory_transmon: Transmon
    dest_arm: OpticalChannel
    beamsplitter: FockBeamSplitter
    detectors: tuple[FockDetector, FockDetector]
    source_emitting: EmittingProtocol
    dest_emitting: EmittingProtocol
    source_upconversion: UpConversionProtocol
    dest_upconversion: UpConversionProtocol
    measurement: MeasurementProtocol
    components: dict[str, object] = field(default_factory=dict)
    links: list[tuple[str, str]] = field(default_factory=list)


def build_dqt(config: ExperimentConfig) -> DqtTopology:
    """Construct and wire the direct-conversion topology.

    Source node: transmon -> transducer -> (fiber | microwave detector).
    Destination node: transducer -> (transmon | optical detector).
    """
    config.validate()
    if config.strategy is not Strategy.DQT:
        raise ConfigError(f"build_dqt needs a dqt config (got {config.strategy.value})")
    tl = Timeline(config.master_seed)

    mw_detector = FockDetector("source.microwave_detector", DetectorKind.SPD,
                               efficiency=1.0,
                               rand=tl.stream("source.microwave_detector.detect"))
    dest_transmon = Transmon("dest.transmon", tl)
    opt_detector = FockDetector("dest.optical_detector", DetectorKind.SPD,
                                efficiency=1.0,
                                rand=tl.stream("dest.optical_detector.detect"))
    dest_transducer = Transducer("dest.transducer", config.eta_down_dest,
                                 rand=tl.stream("dest.transducer.convert"),
                                 optical_receiver=opt_detector,
                                 microwave_receiver=dest_transmon)
    downconversion = DownConversionProtocol(tl, "dest.downconversion", dest_transducer)
    channel = OpticalChannel("channel.source_dest", tl, config.fiber_length_km,
                             rand=tl.stream("channel.source_dest.loss"),
                             attenuation_length_km=config.attenuation_length_km,
                             remote_target="dest.downconversion")
    source_transducer = Transducer("source.transducer", config.eta_up_source,
                                   rand=tl.stream("source.transducer.convert"),
                                   optical_receiver=channel,
                                   microwave_receiver=mw_detector)
    upconversion = UpConversionProtocol(source_transducer)
    source_transmon = Transmon("source.transmon", tl, receiver=upconversion,
                               origin=PhotonOrigin.INFORMATION_QUBIT)
    emitting = EmittingProtocol(tl, "source.emitting", source_transmon)

    components = {c.name: c for c in (
        source_transmon, source_transducer, mw_detector, channel,
        dest_transducer, dest_transmon, opt_detector)}
    # Directed receiver attributes; the fiber's far end is an event-delivery
    # binding (remote_target), not a receiver link.
    links = [
        (source_transmon.name, source_transducer.name),
        (source_transducer.name, channel.name),
        (source_transducer.name, mw_detector.name),
        (dest_transducer.name, dest_transmon.name),
        (dest_transducer.name, opt_detector.name),
    ]
    return DqtTopology(
        timeline=tl, config=config,
        source_transmon=source_transmon, source_transducer=source_transducer,
        source_microwave_detector=mw_detector, channel=channel,
        dest_transducer=dest_transducer, dest_transmon=dest_transmon,
        dest_optical_detector=opt_detector,
        emitting=emitting, upconversion=upconversion,
        downconversion=downconversion,
        components=components, links=links)


def build_eqt(config: ExperimentConfig) -> EqtTopology:
    """Construct and wire the heralding topology.

    Each end node: emitter transmon -> transducer -> (half-length fiber arm |
    holding transmon). Midpoint station: beam splitter -> two detectors.
    """
    config.validate()
    if config.strategy is not Strategy.EQT:
        raise ConfigError(f"build_eqt needs an eqt config (got {config.strategy.value})")
    tl = Timeline(config.master_seed)
    arm_length = config.fiber_length_km / 2.0

    detector0 = FockDetector("bsm.detector0", config.detector_kind, config.eta_d,
                             rand=tl.stream("bsm.detector0.detect"))
    detector1 = FockDetector("bsm.detector1", config.detector_kind, config.eta_d,
                             rand=tl.stream("bsm.detector1.detect"))
    beamsplitter = FockBeamSplitter("bsm.beamsplitter",
                                    rand=tl.stream("bsm.beamsplitter.route"),
                                    receivers=(detector0, detector1))
    measurement = MeasurementProtocol(tl, "bsm.measurement", beamsplitter,
                                      (detector0, detector1))

    def end_node(side: str, origin: PhotonOrigin):
        memory = Transmon(f"{side}.memory_transmon", tl)
        arm = OpticalChannel(f"channel.{side}_bsm", tl, arm_length,
                             rand=tl.stream(f"channel.{side}_bsm.loss"),
                             attenuation_length_km=config.attenuation_length_km,
                             remote_target="bsm.measurement")
        transducer = Transducer(f"{side}.transducer", config.eta_up,
                                rand=tl.stream(f"{side}.transducer.convert"),
                                optical_receiver=arm,
                                microwave_receiver=memory)
        upconv = UpConversionProtocol(transducer)
        emitter = Transmon(f"{side}.ancilla_transmon", tl, receiver=upconv,
                           origin=origin)
        emitting = EmittingProtocol(tl, f"{side}.emitting", emitter)
        return emitter, transducer, memory, arm, upconv, emitting

    (src_emitter, src_transducer, src_memory, src_arm,
     src_upconv, src_emitting) = end_node("source", PhotonOrigin.SOURCE_ANCILLA)
    (dst_emitter, dst_transducer, dst_memory, dst_arm,
     dst_upconv, dst_emitting) = end_node("dest", PhotonOrigin.DESTINATION_ANCILLA)

    components = {c.name: c for c in (
        src_emitter, src_transducer, src_memory, src_arm,
        dst_emitter, dst_transducer, dst_memory, dst_arm,
        beamsplitter, detector0, detector1)}
    links = [
        (src_emitter.name, src_transducer.name),
        (src_transducer.name, src_arm.name),
        (src_transducer.name, src_memory.name),
        (dst_emitter.name, dst_transducer.name),
        (dst_transducer.name, dst_arm.name),
        (dst_transducer.name, dst_memory.name),
        (beamsplitter.name, detector0.name),
        (beamsplitter.name, detector1.name),
    ]
    return EqtTopology(
        timeline=tl, config=config,
        source_emitter=src_emitter, source_transducer=src_transducer,
        source_memory_transmon=src_memory, source_arm=src_arm,
        dest_emitter=dst_emitter, dest_transducer=dst_transducer,
        dest_memory_transmon=dst_memory, dest_arm=dst_arm,
        beamsplitter=beamsplitter, detectors=(detector0, detector1),
        source_emitting=src_emitting, dest_emitting=dst_emitting,
        source_upconversion=src_upconv, dest_upconversion=dst_upconv,
        measurement=measurement,
        components=components, links=links)


def _summarize(config: ExperimentConfig, histogram: dict[Enum, int],
               counted: tuple) -> ResultsSummary:
    n_observed = sum(histogram[cls] for cls in counted)
    n = config.trials
    return ResultsSummary(
        strategy=config.strategy,
        trials=n,
        n_ideal=n,
        n_observed=n_observed,
        simulated_probability=n_observed / n,
        theoretical_probability=config.theoretical_probability(),
        ci95=analytics.binomial_ci(n_observed, n, 0.95),
        class_histogram={cls.value: count for cls, count in histogram.items()},
        config=config,
    )


def run_dqt(config: ExperimentConfig) -> tuple[ResultsSummary, list[TrialRecord]]:
    """Run N direct-conversion periods and classify every one."""
    topology = build_dqt(config)
    n = config.trials
    topology.emitting.start(config.period_ps, n)
    horizon = (n - 1) * config.period_ps + topology.channel.delay_ps + 1
    topology.timeline.run_until(horizon)

    up_ok: list[bool | None] = [None] * n
    for trial, _, _, converted in topology.source_transducer.conversion_log:
        up_ok[trial] = converted
    survived: list[bool | None] = [None] * n
    for trial, alive in topology.channel.transit_log:
        survived[trial] = alive
    down_ok: list[bool | None] = [None] * n
    for trial, _, _, converted in topology.dest_transducer.conversion_log:
        down_ok[trial] = converted

    histogram = {cls: 0 for cls in DqtClass}
    records = []
    append = records.append
    dqt = Strategy.DQT
    for k in range(n):
        alive = survived[k]
        record = TrialRecord(k, dqt, bool(up_ok[k]), down_ok[k], None,
                             () if alive is None else (alive,), None, None)
        cls = classify_dqt(record)
        record.classification = cls
        histogram[cls] += 1
        append(record)
    summary = _summarize(config, histogram, (DqtClass.SUCCESS,))
    return summary, records


def run_eqt(config: ExperimentConfig) -> tuple[ResultsSummary, list[TrialRecord]]:
    """Run N heralding periods and classify every one at the midpoint."""
    topology = build_eqt(config)
    n = config.trials
    topology.source_emitting.start(config.period_ps, n)
    topology.dest_emitting.start(config.period_ps, n)
    horizon = ((n - 1) * config.period_ps + topology.source_arm.delay_ps
               + topology.beamsplitter.coincidence_window_ps + 1)
    topology.timeline.run_until(horizon)

    src_ok: list[bool | None] = [None] * n
    for trial, _, _, converted in topology.source_transducer.conversion_log:
        src_ok[trial] = converted
    dst_ok: list[bool | None] = [None] * n
    for trial, _, _, converted in topology.dest_transducer.conversion_log:
        dst_ok[trial] = converted
    src_survived: list[bool | None] = [None] * n
    for trial, alive in topology.source_arm.transit_log:
        src_survived[trial] = alive
    dst_survived: list[bool | None] = [None] * n
    for trial, alive in topology.dest_arm.transit_log:
        dst_survived[trial] = alive

    detector_kind = config.detector_kind
    get_detection = topology.measurement.records.get
    histogram = {cls: 0 for cls in HeraldClass}
    records = []
    append = records.append
    eqt = Strategy.EQT
    for k in range(n):
        s_ok = src_ok[k]
        d_ok = dst_ok[k]
        if s_ok:
            entries = (src_survived[k], dst_survived[k]) if d_ok else (src_survived[k],)
        else:
            entries = (dst_survived[k],) if d_ok else ()
        record = TrialRecord(k, eqt, s_ok, None, d_ok, entries,
                             get_detection(k), None)
        cls = classify_eqt(record, detector_kind)
        record.classification = cls
        histogram[cls] += 1
        append(record)
    summary = _summarize(
        config, histogram, (HeraldClass.TRUE_HERALD, HeraldClass.FALSE_HERALD))
    return summary, records


def run_experiment(config: ExperimentConfig) -> tuple[ResultsSummary, list[TrialRecord]]:
    """Dispatch to the strategy's runner."""
    if config.strategy is Strategy.DQT:
        return run_dqt(config)
    return run_eqt(config)


def _run_summary_only(config: ExperimentConfig) -> ResultsSummary:
    return run_experiment(config)[0]


def run_many(configs: list[ExperimentConfig], jobs: int = 1) -> list[ResultsSummary]:
    """Run independent experiments, optionally across processes.

    Results keep the input order regardless of completion order, so output
    is deterministic for any job count. Per-trial records are dropped;
    callers needing them should run experiments individually.
    """
    if jobs <= 1 or len(configs) <= 1:
        return [_run_summary_only(config) for config in configs]
    from concurrent.futures import ProcessPoolExecutor
    with ProcessPoolExecutor(max_workers=min(jobs, len(configs))) as pool:
        return list(pool.map(_run_summary_only, configs))
