"""Batched execution of the same stochastic processes as the event engine.

Each runner consumes the named random streams in exactly the order and
quantity the event-driven runner does (streams that feed diagnostic-only
detectors are skipped, which cannot alter outcomes because every stream is
independent). Tests pin exact summary equality between the two execution
paths at matched seeds; use this path when only aggregate results are
needed at large trial counts.
"""

from __future__ import annotations

import numpy as np

from .hardware import DetectorKind
from .strategies import (ConfigError, DqtClass, ExperimentConfig, HeraldClass,
                         ResultsSummary, Strategy, _summarize)
from .timeline import RandomStream


def _bernoulli_for(stream: RandomStream, mask: np.ndarray,
                   probability: float) -> np.ndarray:
    """Draw once per True entry of mask, in trial order; False entries stay False.

    Mirrors the event engine, where a component only consumes a draw when a
    photon actually reaches it.
    """
    out = np.zeros(mask.shape, dtype=bool)
    indices = np.flatnonzero(mask)
    if indices.size:
        out[indices] = stream.draw_block(indices.size) < probability
    return out


def run_dqt_batch(config: ExperimentConfig) -> ResultsSummary:
    """Aggregate-only equivalent of run_dqt."""
    config.validate()
    if config.strategy is not Strategy.DQT:
        raise ConfigError(f"run_dqt_batch needs a dqt config (got {config.strategy.value})")
    n = config.trials
    seed = config.master_seed
    survival = np.exp(-config.fiber_length_km / config.attenuation_length_km)

    up_stream = RandomStream(seed, "source.transducer.convert")
    loss_stream = RandomStream(seed, "channel.source_dest.loss")
    down_stream = RandomStream(seed, "dest.transducer.convert")

    up = up_stream.draw_block(n) < config.eta_up_source
    alive = _bernoulli_for(loss_stream, up, survival)
    down = _bernoulli_for(down_stream, alive, config.eta_down_dest)

    success = down  # up & alive implied
    histogram = {
        DqtClass.SUCCESS: int(success.sum()),
        DqtClass.UP_CONVERSION_FAILED: int((~up).sum()),
        DqtClass.CHANNEL_LOSS: int((up & ~alive).sum()),
        DqtClass.DOWN_CONVERSION_FAILED: int((alive & ~down).sum()),
    }
    return _summarize(config, histogram, (DqtClass.SUCCESS,))


def run_eqt_batch(config: ExperimentConfig) -> ResultsSummary:
    """Aggregate-only equivalent of run_eqt."""
    config.validate()
    if config.strategy is not Strategy.EQT:
        raise ConfigError(f"run_eqt_batch needs an eqt config (got {config.strategy.value})")
    n = config.trials
    seed = config.master_seed
    arm_survival = np.exp(
        -(config.fiber_length_km / 2.0) / config.attenuation_length_km)

    src_conv_stream = RandomStream(seed, "source.transducer.convert")
    src_loss_stream = RandomStream(seed, "channel.source_bsm.loss")
    dst_conv_stream = RandomStream(seed, "dest.transducer.convert")
    dst_loss_stream = RandomStream(seed, "channel.dest_bsm.loss")
    route_stream = RandomStream(seed, "bsm.beamsplitter.route")
    detector_streams = (RandomStream(seed, "bsm.detector0.detect"),
                        RandomStream(seed, "bsm.detector1.detect"))

    # The event engine interleaves source and destination work within each
    # period, but each stream is consumed once per trial in trial order, so
    # per-stream blocks reproduce it exactly.
    src_conv = src_conv_stream.draw_block(n) < config.eta_up
    src_alive = _bernoulli_for(src_loss_stream, src_conv, arm_survival)
    dst_conv = dst_conv_stream.draw_block(n) < config.eta_up
    dst_alive = _bernoulli_for(dst_loss_stream, dst_conv, arm_survival)

    arrived = src_alive.astype(np.int64) + dst_alive
    window_trials = np.flatnonzero(arrived)
    ports = (route_stream.draw_block(window_trials.size) >= 0.5).astype(np.int64)

    detected_total = np.zeros(n, dtype=np.int64)
    for port, stream in enumerate(detector_streams):
        # One draw per photon incident on this detector, in trial order;
        # bunching puts every photon of a window on the same port.
        trials_here = window_trials[ports == port]
        counts = arrived[trials_here]
        draws = stream.draw_block(int(counts.sum())) < config.eta_d
        if trials_here.size:
            starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
            detected_total[trials_here] = np.add.reduceat(
                draws.astype(np.int64), starts)

    conversions = src_conv.astype(np.int64) + dst_conv
    one_conv = conversions == 1
    two_conv = conversions == 2
    clicked = detected_total >= 1

    true_herald = one_conv & clicked
    if config.detector_kind is DetectorKind.PNRD:
        rejected = two_conv & (detected_total >= 2)
        false_herald = two_conv & (detected_total == 1)
    else:
        rejected = np.zeros(n, dtype=bool)
        false_herald = two_conv & clicked
    histogram = {
        HeraldClass.TRUE_HERALD: int(true_herald.sum()),
        HeraldClass.FALSE_HERALD: int(false_herald.sum()),
        HeraldClass.REJECTED_MULTI_PHOTON: int(rejected.sum()),
        HeraldClass.NO_CLICK: 0,
    }
    histogram[HeraldClass.NO_CLICK] = n - sum(histogram.values())
    return _summarize(
        config, histogram, (HeraldClass.TRUE_HERALD, HeraldClass.FALSE_HERALD))


def run_batch(config: ExperimentConfig) -> ResultsSummary:
    """Dispatch to the strategy's batched runner."""
    if config.strategy is Strategy.DQT:
        return run_dqt_batch(config)
    return run_eqt_batch(config)
