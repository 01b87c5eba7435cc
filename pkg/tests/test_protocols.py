import pytest

from transim.hardware import DetectorKind, Domain, Photon, PhotonOrigin
from transim.protocols import MeasurementProtocol
from transim.strategies import (DqtClass, ExperimentConfig, Strategy,
                                build_dqt, build_eqt, run_dqt)


def dqt_config(**overrides):
    base = dict(strategy=Strategy.DQT, eta_up_source=0.6, eta_down_dest=0.6,
                fiber_length_km=22.0, trials=100, master_seed=3)
    base.update(overrides)
    return ExperimentConfig(**base)


def eqt_config(**overrides):
    base = dict(strategy=Strategy.EQT, eta_up=0.5,
                detector_kind=DetectorKind.PNRD, eta_d=1.0,
                fiber_length_km=0.0, trials=100, master_seed=3)
    base.update(overrides)
    return ExperimentConfig(**base)


class TestEmittingProtocol:
    def test_rejects_nonpositive_trials(self):
        topology = build_dqt(dqt_config())
        with pytest.raises(ValueError):
            topology.emitting.start(1_000_000, 0)
        with pytest.raises(ValueError):
            topology.emitting.start(1_000_000, -5)

    def test_rejects_nonpositive_period(self):
        topology = build_dqt(dqt_config())
        with pytest.raises(ValueError):
            topology.emitting.start(0, 10)

    def test_single_trial_emits_once_at_zero(self):
        topology = build_dqt(dqt_config())
        topology.emitting.start(1_000_000, 1)
        topology.timeline.run_until(2_000_000)
        assert topology.source_transmon.emit_log == [
            (0, 0, topology.source_transmon.emit_log[0][2])]

    def test_hundred_trials_span_the_full_schedule(self):
        topology = build_dqt(dqt_config())
        topology.emitting.start(1_000_000, 100)
        stats = topology.timeline.run_until(100 * 1_000_000)
        log = topology.source_transmon.emit_log
        assert len(log) == 100
        assert [entry[0] for entry in log] == [k * 1_000_000 for k in range(100)]
        assert log[-1][0] == 99 * 1_000_000
        assert stats.events_processed >= 100


class TestUpConversionProtocol:
    def test_optical_input_rejected(self):
        topology = build_dqt(dqt_config())
        tl = topology.timeline
        photon = Photon(tl.next_photon_id(), Domain.OPTICAL, 0, 0,
                        PhotonOrigin.INFORMATION_QUBIT)
        with pytest.raises(ValueError):
            topology.upconversion.receive(photon, 0)

    def test_success_enters_fiber(self):
        topology = build_dqt(dqt_config(eta_up_source=1.0, trials=5,
                                        fiber_length_km=0.0))
        topology.emitting.start(1_000_000, 5)
        topology.timeline.run_until(5_000_000)
        assert len(topology.channel.transit_log) == 5
        assert topology.source_microwave_detector.detection_log == []

    def test_failure_clicks_microwave_detector(self):
        topology = build_dqt(dqt_config(eta_up_source=0.0, trials=5))
        topology.emitting.start(1_000_000, 5)
        topology.timeline.run_until(5_000_000)
        assert topology.channel.transit_log == []
        assert len(topology.source_microwave_detector.detection_log) == 5
        assert topology.source_microwave_detector.total_clicks == 5

    def test_failure_in_eqt_parks_photon_in_memory_transmon(self):
        topology = build_eqt(eqt_config(eta_up=0.0, trials=5))
        topology.source_emitting.start(1_000_000, 5)
        topology.dest_emitting.start(1_000_000, 5)
        topology.timeline.run_until(5_000_000)
        assert len(topology.source_memory_transmon.received_log) == 5
        assert len(topology.dest_memory_transmon.received_log) == 5
        assert topology.source_arm.transit_log == []


class TestDownConversionProtocol:
    def test_microwave_input_rejected(self):
        topology = build_dqt(dqt_config())
        tl = topology.timeline
        photon = Photon(tl.next_photon_id(), Domain.MICROWAVE, 0, 0,
                        PhotonOrigin.INFORMATION_QUBIT)
        with pytest.raises(ValueError):
            topology.downconversion.receive(photon, 0)

    def test_success_reaches_destination_transmon(self):
        topology = build_dqt(dqt_config(eta_up_source=1.0, eta_down_dest=1.0,
                                        fiber_length_km=0.0, trials=5))
        topology.emitting.start(1_000_000, 5)
        topology.timeline.run_until(5_000_000)
        assert len(topology.dest_transmon.received_log) == 5
        assert topology.dest_optical_detector.detection_log == []

    def test_failure_clicks_optical_detector(self):
        topology = build_dqt(dqt_config(eta_up_source=1.0, eta_down_dest=0.0,
                                        fiber_length_km=0.0, trials=5))
        topology.emitting.start(1_000_000, 5)
        topology.timeline.run_until(5_000_000)
        assert topology.dest_transmon.received_log == []
        assert len(topology.dest_optical_detector.detection_log) == 5

    def test_eqt_topology_has_no_down_conversion(self):
        topology = build_eqt(eqt_config())
        assert not hasattr(topology, "downconversion")
        assert "dest.downconversion" not in topology.components


class TestMeasurementProtocol:
    def test_no_arrivals_yield_zero_record(self):
        topology = build_eqt(eqt_config(eta_up=0.0, trials=1))
        topology.source_emitting.start(1_000_000, 1)
        topology.dest_emitting.start(1_000_000, 1)
        topology.timeline.run_until(1_000_000)
        record = topology.measurement.collect(0)
        assert record.clicks == (False, False)
        assert record.detected_counts == (0, 0)
        assert record.photons_at_splitter == 0

    def test_single_photon_clicks_exactly_one_detector(self):
        # source converts always, destination never; ideal detectors
        config = eqt_config(eta_up=1.0, trials=20)
        topology = build_eqt(config)
        topology.dest_transducer.efficiency = 0.0
        topology.source_emitting.start(1_000_000, 20)
        topology.dest_emitting.start(1_000_000, 20)
        topology.timeline.run_until(21_000_000)
        for trial in range(20):
            record = topology.measurement.collect(trial)
            assert record.photons_at_splitter == 1
            assert sum(record.clicks) == 1
            assert sum(record.detected_counts) == 1

    def test_bunched_pair_lands_on_one_resolving_detector(self):
        topology = build_eqt(eqt_config(eta_up=1.0, trials=20))
        topology.source_emitting.start(1_000_000, 20)
        topology.dest_emitting.start(1_000_000, 20)
        topology.timeline.run_until(21_000_000)
        for trial in range(20):
            record = topology.measurement.collect(trial)
            assert record.photons_at_splitter == 2
            assert sorted(record.detected_counts) == [0, 2]

    def test_mixed_trials_in_one_window_are_fatal(self):
        topology = build_eqt(eqt_config())
        tl = topology.timeline
        protocol = topology.measurement
        first = Photon(tl.next_photon_id(), Domain.OPTICAL, 0, 0,
                       PhotonOrigin.SOURCE_ANCILLA)
        second = Photon(tl.next_photon_id(), Domain.OPTICAL, 0, 1,
                        PhotonOrigin.DESTINATION_ANCILLA)
        protocol._on_arrival(first, 0)
        protocol._on_arrival(second, 0)
        with pytest.raises(RuntimeError):
            tl.run_until(2000)


class TestPhotonAccounting:
    def test_every_dqt_photon_has_exactly_one_terminal(self):
        config = dqt_config(trials=400, master_seed=9)
        summary, _ = run_dqt(config)
        topology = build_dqt(config)
        topology.emitting.start(config.period_ps, config.trials)
        topology.timeline.run_until(
            config.trials * config.period_ps + topology.channel.delay_ps)
        hist = summary.class_histogram
        mw_incidents = len(topology.source_microwave_detector.detection_log)
        losses = sum(1 for _, alive in topology.channel.transit_log if not alive)
        opt_incidents = len(topology.dest_optical_detector.detection_log)
        delivered = len(topology.dest_transmon.received_log)
        assert mw_incidents == hist[DqtClass.UP_CONVERSION_FAILED.value]
        assert losses == hist[DqtClass.CHANNEL_LOSS.value]
        assert opt_incidents == hist[DqtClass.DOWN_CONVERSION_FAILED.value]
        assert delivered == hist[DqtClass.SUCCESS.value]
        assert mw_incidents + losses + opt_incidents + delivered == config.trials
        assert len(topology.source_transmon.emit_log) == config.trials

    def test_every_eqt_photon_has_exactly_one_terminal(self):
        config = eqt_config(eta_up=0.6, fiber_length_km=10.0, trials=400,
                            master_seed=9)
        topology = build_eqt(config)
        topology.source_emitting.start(config.period_ps, config.trials)
        topology.dest_emitting.start(config.period_ps, config.trials)
        topology.timeline.run_until(
            config.trials * config.period_ps + topology.source_arm.delay_ps + 2000)
        emitted = (len(topology.source_emitter.emit_log)
                   + len(topology.dest_emitter.emit_log))
        parked = (len(topology.source_memory_transmon.received_log)
                  + len(topology.dest_memory_transmon.received_log))
        lost = sum(1 for _, alive in topology.source_arm.transit_log if not alive)
        lost += sum(1 for _, alive in topology.dest_arm.transit_log if not alive)
        detected_incidents = sum(
            entry[2] for detector in topology.detectors
            for entry in detector.detection_log)
        assert emitted == 2 * config.trials
        assert parked + lost + detected_incidents == emitted

    def test_dqt_never_puts_microwave_photons_in_fiber(self):
        # the channel raises on microwave input, so a clean run is the check
        summary, records = run_dqt(dqt_config(trials=300, master_seed=5))
        assert summary.trials == 300
        assert sum(summary.class_histogram.values()) == 300
