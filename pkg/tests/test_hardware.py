import math

import pytest

from transim.hardware import (Domain, DetectorKind, FockBeamSplitter,
                              FockDetector, OpticalChannel, Photon,
                              PhotonOrigin, Transducer, Transmon)
from transim.timeline import Timeline


class StubReceiver:
    def __init__(self):
        self.received = []

    def receive(self, photon, time):
        self.received.append((photon, time))


def make_photon(tl, domain=Domain.MICROWAVE, trial=0, time=0):
    return Photon(tl.next_photon_id(), domain, time, trial,
                  PhotonOrigin.INFORMATION_QUBIT)


class TestTransmon:
    def test_emit_stamps_time_trial_and_delivers(self):
        tl = Timeline()
        sink = StubReceiver()
        transmon = Transmon("t", tl, receiver=sink)
        photon = transmon.emit(123, 4)
        assert photon.domain is Domain.MICROWAVE
        assert photon.emit_time == 123
        assert photon.trial_index == 4
        assert sink.received == [(photon, 123)]
        assert transmon.emit_log == [(123, 4, photon.photon_id)]

    def test_periodic_emissions_have_distinct_ids_and_times(self):
        tl = Timeline()
        transmon = Transmon("t", tl)
        photons = [transmon.emit(k * 1_000_000, k) for k in range(100)]
        assert len({p.photon_id for p in photons}) == 100
        assert [p.emit_time for p in photons] == [k * 1_000_000 for k in range(100)]
        assert photons[-1].emit_time == 99 * 1_000_000

    def test_two_transmons_share_id_space(self):
        tl = Timeline()
        one = Transmon("one", tl)
        two = Transmon("two", tl)
        a = one.emit(0, 0)
        b = two.emit(0, 0)
        assert a.photon_id != b.photon_id

    def test_receive_logs_photon(self):
        tl = Timeline()
        transmon = Transmon("t", tl)
        photon = make_photon(tl)
        transmon.receive(photon, 55)
        assert transmon.received_log == [(55, photon.photon_id)]


class TestTransducer:
    def test_perfect_efficiency_always_up_converts(self):
        tl = Timeline()
        optical, microwave = StubReceiver(), StubReceiver()
        transducer = Transducer("x", 1.0, tl.stream("x.convert"),
                                optical_receiver=optical,
                                microwave_receiver=microwave)
        for k in range(50):
            outcome = transducer.convert(make_photon(tl, trial=k), k)
            assert outcome.converted
            assert outcome.photon.domain is Domain.OPTICAL
        assert len(optical.received) == 50
        assert microwave.received == []

    def test_zero_efficiency_routes_to_failure_port(self):
        tl = Timeline()
        optical, microwave = StubReceiver(), StubReceiver()
        transducer = Transducer("x", 0.0, tl.stream("x.convert"),
                                optical_receiver=optical,
                                microwave_receiver=microwave)
        outcome = transducer.convert(make_photon(tl), 0)
        assert not outcome.converted
        assert outcome.photon.domain is Domain.MICROWAVE
        assert microwave.received and not optical.received

    def test_down_conversion_direction(self):
        tl = Timeline()
        transducer = Transducer("x", 1.0, tl.stream("x.convert"))
        outcome = transducer.convert(make_photon(tl, domain=Domain.OPTICAL), 0)
        assert outcome.converted
        assert outcome.photon.domain is Domain.MICROWAVE
        assert transducer.conversion_log == [(0, 0, "down", True)]

    def test_domain_flips_exactly_when_converted(self):
        tl = Timeline()
        transducer = Transducer("x", 0.5, tl.stream("x.convert"))
        for k in range(500):
            photon = make_photon(tl, trial=k)
            before = photon.domain
            outcome = transducer.convert(photon, 0)
            assert (photon.domain is not before) == outcome.converted

    def test_conversion_rate_converges_to_efficiency(self):
        # 3-sigma binomial bound: 3 * sqrt(0.5 * 0.5 / 1e4) = 0.015
        tl = Timeline()
        stream = tl.stream("x.convert")
        transducer = Transducer("x", 0.5, stream)
        n = 10_000
        converted = sum(
            transducer.convert(make_photon(tl, trial=k), 0).converted
            for k in range(n))
        assert abs(converted / n - 0.5) < 0.015
        assert stream.draw_count == n  # exactly one draw per attempt

    def test_efficiency_out_of_range_rejected(self):
        tl = Timeline()
        with pytest.raises(ValueError):
            Transducer("x", 1.2, tl.stream("x.convert"))
        with pytest.raises(ValueError):
            Transducer("x", -0.1, tl.stream("x.convert"))


class TestOpticalChannel:
    def test_zero_length_always_survives_with_zero_delay(self):
        tl = Timeline()
        channel = OpticalChannel("c", tl, 0.0, tl.stream("c.loss"))
        for k in range(200):
            outcome = channel.transmit(make_photon(tl, Domain.OPTICAL, trial=k), 5)
            assert outcome.survived
            assert outcome.arrival_time == 5

    def test_survival_probability_at_one_attenuation_length(self):
        # exp(-22/22) = e^-1 ~ 0.3679; 3-sigma over 1e4 trials is under 0.015
        tl = Timeline()
        stream = tl.stream("c.loss")
        channel = OpticalChannel("c", tl, 22.0, stream, attenuation_length_km=22.0)
        n = 10_000
        survived = sum(
            channel.transmit(make_photon(tl, Domain.OPTICAL, trial=k), 0).survived
            for k in range(n))
        assert abs(survived / n - math.exp(-1.0)) < 0.015
        assert stream.draw_count == n

    def test_microwave_photon_rejected(self):
        tl = Timeline()
        channel = OpticalChannel("c", tl, 1.0, tl.stream("c.loss"))
        with pytest.raises(ValueError):
            channel.transmit(make_photon(tl, Domain.MICROWAVE), 0)

    def test_propagation_delay_schedules_arrival(self):
        tl = Timeline()
        arrivals = []
        tl.register("far_end", lambda photon, time: arrivals.append((photon, time)))
        channel = OpticalChannel("c", tl, 2.0, tl.stream("c.loss"),
                                 remote_target="far_end")
        outcome = channel.transmit(make_photon(tl, Domain.OPTICAL), 100)
        assert outcome.arrival_time == 100 + 10_000  # 2 km at 5000 ps/km
        assert arrivals == []
        tl.run_until(20_000)
        assert len(arrivals) == 1
        assert arrivals[0][1] == 10_100

    def test_zero_delay_hands_off_synchronously(self):
        tl = Timeline()
        arrivals = []
        tl.register("far_end", lambda photon, time: arrivals.append(time))
        channel = OpticalChannel("c", tl, 0.0, tl.stream("c.loss"),
                                 remote_target="far_end")
        channel.transmit(make_photon(tl, Domain.OPTICAL), 7)
        assert arrivals == [7]

    def test_invalid_geometry_rejected(self):
        tl = Timeline()
        with pytest.raises(ValueError):
            OpticalChannel("c", tl, -1.0, tl.stream("c.loss"))
        with pytest.raises(ValueError):
            OpticalChannel("c", tl, 1.0, tl.stream("c.loss"),
                           attenuation_length_km=0.0)


class TestFockBeamSplitter:
    def test_single_photon_port_choice_is_balanced(self):
        tl = Timeline()
        stream = tl.stream("bs.route")
        splitter = FockBeamSplitter("bs", stream)
        n = 10_000
        port_zero = 0
        for k in range(n):
            ports = splitter.route([make_photon(tl, Domain.OPTICAL, trial=k)], 0)
            port_zero += ports[0] == 0
        assert abs(port_zero / n - 0.5) < 0.015
        assert stream.draw_count == n  # one draw per window

    def test_simultaneous_pair_always_bunches(self):
        tl = Timeline()
        stream = tl.stream("bs.route")
        splitter = FockBeamSplitter("bs", stream)
        for k in range(1000):
            pair = [make_photon(tl, Domain.OPTICAL, trial=k) for _ in range(2)]
            ports = splitter.route(pair, 0)
            assert ports[0] == ports[1]
        assert stream.draw_count == 1000  # still one draw per window

    def test_bunched_pair_port_is_uniform(self):
        tl = Timeline()
        splitter = FockBeamSplitter("bs", tl.stream("bs.route"))
        n = 10_000
        both_zero = 0
        for k in range(n):
            pair = [make_photon(tl, Domain.OPTICAL, trial=k) for _ in range(2)]
            both_zero += splitter.route(pair, 0) == [0, 0]
        assert abs(both_zero / n - 0.5) < 0.015

    def test_overfull_or_empty_window_is_fatal(self):
        tl = Timeline()
        splitter = FockBeamSplitter("bs", tl.stream("bs.route"))
        three = [make_photon(tl, Domain.OPTICAL) for _ in range(3)]
        with pytest.raises(RuntimeError):
            splitter.route(three, 0)
        with pytest.raises(RuntimeError):
            splitter.route([], 0)


class TestFockDetector:
    def test_perfect_detector_clicks_on_single_photon(self):
        tl = Timeline()
        detector = FockDetector("d", DetectorKind.PNRD, 1.0, tl.stream("d.detect"))
        event = detector.detect([make_photon(tl, Domain.OPTICAL)], 0)
        assert event.clicked
        assert event.detected_count == 1
        assert detector.total_clicks == 1
        assert detector.photon_count_histogram[1] == 1

    def test_pnrd_resolves_two_photons(self):
        tl = Timeline()
        detector = FockDetector("d", DetectorKind.PNRD, 1.0, tl.stream("d.detect"))
        event = detector.detect([make_photon(tl, Domain.OPTICAL) for _ in range(2)], 0)
        assert event.detected_count == 2

    def test_spd_caps_reported_count(self):
        tl = Timeline()
        detector = FockDetector("d", DetectorKind.SPD, 1.0, tl.stream("d.detect"))
        event = detector.detect([make_photon(tl, Domain.OPTICAL) for _ in range(2)], 0)
        assert event.clicked
        assert event.detected_count == 1
        assert detector.photon_count_histogram[1] == 1

    def test_lossy_pnrd_single_count_statistics(self):
        # P(exactly one of two detected) = 2 * 0.25 * 0.75 = 0.375;
        # 3-sigma over 1e4 windows is under 0.015
        tl = Timeline()
        stream = tl.stream("d.detect")
        detector = FockDetector("d", DetectorKind.PNRD, 0.25, stream)
        n = 10_000
        singles = 0
        for k in range(n):
            pair = [make_photon(tl, Domain.OPTICAL, trial=k) for _ in range(2)]
            singles += detector.detect(pair, 0).detected_count == 1
        assert abs(singles / n - 0.375) < 0.015
        assert stream.draw_count == 2 * n  # one draw per incident photon

    def test_empty_window_consumes_nothing(self):
        tl = Timeline()
        stream = tl.stream("d.detect")
        detector = FockDetector("d", DetectorKind.SPD, 1.0, stream)
        event = detector.detect([], 0)
        assert not event.clicked
        assert event.detected_count == 0
        assert stream.draw_count == 0
        assert detector.detection_log == []
        assert detector.total_clicks == 0

    def test_efficiency_out_of_range_rejected(self):
        tl = Timeline()
        with pytest.raises(ValueError):
            FockDetector("d", DetectorKind.SPD, 1.5, tl.stream("d.detect"))
