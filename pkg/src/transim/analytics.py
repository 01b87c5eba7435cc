"""Closed-form link probabilities and statistical comparison of Monte-Carlo
estimates against them.

The direct strategy succeeds when both conversions succeed and the photon
survives the fiber. The herald strategy clicks when exactly one end
converted (the wanted case) or when both did and the detectors cannot tell;
detector efficiency thins every conversion term, which amounts to replacing
the conversion efficiency eta by q = eta * eta_d throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .strategies import ResultsSummary


def _check_probability(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must be within [0, 1] (got {value})")


def _check_lengths(fiber_length_km: float, attenuation_length_km: float) -> None:
    if fiber_length_km < 0:
        raise ValueError(f"fiber_length_km must be non-negative (got {fiber_length_km})")
    if attenuation_length_km <= 0:
        raise ValueError(
            f"attenuation_length_km must be positive (got {attenuation_length_km})")


def dqt_success_probability(eta_up_source: float, eta_down_dest: float,
                            fiber_length_km: float,
                            attenuation_length_km: float) -> float:
    """End-to-end success probability of the direct-conversion strategy.

    Up-conversion, fiber survival, and down-conversion are independent:
    eta_up_source * eta_down_dest * exp(-l / L0).
    """
    _check_probability("eta_up_source", eta_up_source)
    _check_probability("eta_down_dest", eta_down_dest)
    _check_lengths(fiber_length_km, attenuation_length_km)
    return (eta_up_source * eta_down_dest
            * math.exp(-fiber_length_km / attenuation_length_km))


def eqt_click_probability_pnrd(eta_up: float, eta_d: float,
                               fiber_length_km: float,
                               attenuation_length_km: float) -> float:
    """Single-click (herald) probability with number-resolving detectors.

    With q = eta_up * eta_d, exactly one of the two ends registering gives
    2*(q - q^2), attenuated by exp(-l / (2*L0)) for the half-length arm.
    Two-photon windows are resolved and rejected, so they never click here.
    """
    _check_probability("eta_up", eta_up)
    _check_probability("eta_d", eta_d)
    _check_lengths(fiber_length_km, attenuation_length_km)
    q = eta_up * eta_d
    return 2.0 * (q - q * q) * math.exp(
        -fiber_length_km / (2.0 * attenuation_length_km))


def eqt_click_probability_spd(eta_up: float, eta_d: float,
                              fiber_length_km: float,
                              attenuation_length_km: float) -> float:
    """Single-click probability with threshold (non-resolving) detectors.

    SPDs also click on the two-photon window, adding its q^2 weight:
    (2q - q^2) * exp(-l / (2*L0)) with q = eta_up * eta_d.
    """
    _check_probability("eta_up", eta_up)
    _check_probability("eta_d", eta_d)
    _check_lengths(fiber_length_km, attenuation_length_km)
    q = eta_up * eta_d
    return (2.0 * q - q * q) * math.exp(
        -fiber_length_km / (2.0 * attenuation_length_km))


def spd_true_herald_fraction(eta_up: float) -> float:
    """Fraction of SPD clicks that herald a genuinely shared pair.

    (2*eta - 2*eta^2) / (2*eta - eta^2); undefined at eta_up = 0 where no
    clicks occur at all.
    """
    if not 0.0 < eta_up <= 1.0:
        raise ValueError(f"eta_up must be within (0, 1] (got {eta_up})")
    return (2.0 * eta_up - 2.0 * eta_up * eta_up) / (2.0 * eta_up - eta_up * eta_up)


def binomial_ci(successes: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    """Two-sided Wilson score interval for a binomial proportion.

    Chosen over the Wald interval because it stays sane at small n with
    proportions near 0 or 1 (including zero observed successes).
    """
    if n < 1:
        raise ValueError(f"n must be at least 1 (got {n})")
    if not 0 <= successes <= n:
        raise ValueError(f"successes must be within [0, {n}] (got {successes})")
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must be within (0, 1) (got {confidence})")
    z = NormalDist().inv_cdf(0.5 + confidence / 2.0)
    p_hat = successes / n
    z2_over_n = z * z / n
    denom = 1.0 + z2_over_n
    center = (p_hat + z2_over_n / 2.0) / denom
    half = z * math.sqrt(p_hat * (1.0 - p_hat) / n + z2_over_n / (4.0 * n)) / denom
    # At the boundary counts the interval edge is exactly 0 or 1; computing
    # center -/+ half there only accumulates rounding noise.
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == n else min(1.0, center + half)
    return (lo, hi)


@dataclass(slots=True)
class TheoryPoint:
    """A closed-form probability together with the inputs that produced it."""

    inputs: dict
    value: float


@dataclass(slots=True)
class ComparisonReport:
    """Simulation-vs-theory verdict for one experiment."""

    theory: TheoryPoint
    simulated: float
    n: int
    ci95: tuple[float, float]
    within_ci: bool
    z_score: float


def compare(summary: "ResultsSummary") -> ComparisonReport:
    """Check whether a run's estimate is consistent with its closed form.

    within_ci holds when the theory value falls inside the 95% Wilson
    interval of the observed count. The z-score uses the theory-variance
    normal approximation; a degenerate variance (theory 0 or 1) yields
    0 when the estimate agrees exactly and +/-inf otherwise.
    """
    p = summary.theoretical_probability
    p_hat = summary.simulated_probability
    n = summary.trials
    variance = p * (1.0 - p) / n
    if variance == 0.0:
        z = 0.0 if p_hat == p else math.copysign(math.inf, p_hat - p)
    else:
        z = (p_hat - p) / math.sqrt(variance)
    lo, hi = summary.ci95
    theory = TheoryPoint(inputs=summary.theory_inputs(), value=p)
    return ComparisonReport(theory=theory, simulated=p_hat, n=n,
                            ci95=summary.ci95, within_ci=lo <= p <= hi, z_score=z)
