"""Franson / conjugate-Franson visibilities and the variance bounds they imply."""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError

SQRT_LN2 = math.sqrt(math.log(2.0))
# Ideal visibilities are degraded by this factor to model imperfections.
DEFAULT_VISIBILITY_MULTIPLIER = 0.995


class InterferometerKind(enum.Enum):
    FRANSON = "franson"
    CONJUGATE_FRANSON = "conjugate_franson"


@dataclass(frozen=True)
class DetectorParams:
    """Detector model shared by Alice and Bob.

    timing_jitter is the FWHM jitter delta_T in seconds; dark_rate in counts/s.
    """

    timing_jitter: float
    efficiency_alice: float = 1.0
    efficiency_bob: float = 1.0
    dark_rate: float = 0.0
    gate: float = 0.0

    def __post_init__(self):
        for name in ("timing_jitter", "efficiency_alice", "efficiency_bob", "dark_rate", "gate"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be nonnegative", field=name)
        for name in ("efficiency_alice", "efficiency_bob"):
            if getattr(self, name) > 1:
                raise DomainError(f"{name} must be <= 1", field=name)


@dataclass(frozen=True)
class InterferometerParams:
    delta_t: float
    delta_omega: float
    beta2: float
    gate: float

    @classmethod
    def from_gate(cls, gate: float, delta_omega: float) -> InterferometerParams:
        """Delay Delta_T = sqrt(2) T_g and dispersion beta_2 = sqrt(2) T_g / Delta_Omega."""
        if gate <= 0 or delta_omega <= 0:
            raise DomainError("gate and delta_omega must be positive")
        return cls(
            delta_t=math.sqrt(2.0) * gate,
            delta_omega=delta_omega,
            beta2=math.sqrt(2.0) * gate / delta_omega,
            gate=gate,
        )

    def check_validity(self, timing_jitter: float) -> list[str]:
        """Return violated ordering conditions Delta_T > T_g > delta_T (and beta2 Delta_Omega > delta_T)."""
        problems = []
        if not self.delta_t > self.gate:
            problems.append("Franson delay must exceed the coincidence gate")
        if not self.gate > timing_jitter:
            problems.append("coincidence gate must exceed the detector timing jitter")
        if not self.beta2 * self.delta_omega > timing_jitter:
            problems.append("beta2 * delta_omega must exceed the detector timing jitter")
        for p in problems:
            warnings.warn(p, RuntimeWarning, stacklevel=2)
        return problems


@dataclass(frozen=True)
class VisibilityReading:
    kind: InterferometerKind
    value: float
    setting: float

    def __post_init__(self):
        if abs(self.value) > 1:
            raise DomainError(f"visibility must lie in [-1, 1], got {self.value}", field="value")


def franson_visibility_gaussian(v_w: float, delta_t: float) -> float:
    """0-pi Franson visibility exp(-v_w dT^2 / 2) for a Gaussian frequency difference."""
    if v_w < 0:
        raise DomainError("frequency-difference variance must be >= 0")
    return math.exp(-v_w * delta_t**2 / 2.0)


def cfi_visibility_gaussian(v_t: float, delta_omega: float) -> float:
    if v_t < 0:
        raise DomainError("arrival-time-difference variance must be >= 0")
    return math.exp(-v_t * delta_omega**2 / 2.0)


def jitter_fourth_moment_time(timing_jitter: float) -> float:
    """<(t~_S - t~_I)^4> for two independent Gaussian jitters of FWHM delta_T."""
    if timing_jitter < 0:
        raise DomainError("timing jitter must be >= 0")
    return 3.0 * (timing_jitter / (2.0 * SQRT_LN2)) ** 4


def jitter_fourth_moment_freq(timing_jitter: float, beta2: float) -> float:
    """Frequency-difference fourth moment when frequency is read out through dispersion beta2."""
    if beta2 == 0:
        raise DomainError("dispersion beta2 must be nonzero for frequency readout", field="beta2")
    if timing_jitter < 0:
        raise DomainError("timing jitter must be >= 0")
    return 3.0 * (timing_jitter / (2.0 * SQRT_LN2 * abs(beta2))) ** 4


def _lemma_bound(v: float, setting: float, fourth: float) -> float:
    if v > 1:
        raise DomainError(f"visibility {v} exceeds 1")
    if fourth < 0:
        raise DomainError("fourth moment must be >= 0")
    if setting == 0:
        raise DomainError("interferometer setting must be nonzero")
    return 2.0 * (1.0 - v) / setting**2 + fourth * setting**2 / 12.0


def lemma1_bound(reading: VisibilityReading, fourth_w: float) -> float:
    """Upper bound (rad^2/s^2) on the signal-idler frequency-difference variance."""
    if reading.kind is not InterferometerKind.FRANSON:
        raise DomainError("frequency bound needs a Franson reading")
    return _lemma_bound(reading.value, reading.setting, fourth_w)


def lemma2_bound(reading: VisibilityReading, fourth_t: float) -> float:
    """Upper bound (s^2) on the signal-idler arrival-time-difference variance."""
    if reading.kind is not InterferometerKind.CONJUGATE_FRANSON:
        raise DomainError("time bound needs a conjugate-Franson reading")
    return _lemma_bound(reading.value, reading.setting, fourth_t)


def raw_time_excess(timing_jitter: float, sigma_cor: float) -> float:
    """Excess-noise factor seen by raw arrival-time measurements through two jittered detectors."""
    if sigma_cor <= 0:
        raise DomainError("sigma_cor must be positive")
    jitter_var = (timing_jitter / 2.3548) ** 2
    return (sigma_cor**2 + 2.0 * jitter_var) / sigma_cor**2 - 1.0


class ExcessNoise(NamedTuple):
    raw: float
    clamped: float


def excess_noise(bound: float, nominal_variance: float) -> ExcessNoise:
    """xi = bound / nominal - 1; the raw value may be negative."""
    if not nominal_variance > 0:
        raise DomainError("nominal variance must be positive")
    xi = bound / nominal_variance - 1.0
    return ExcessNoise(raw=xi, clamped=max(0.0, xi))


def cosine_slack(u):
    """Pointwise slack 1 - u^2/2 + u^4/24 - cos(u), which is >= 0 for all real u.

    Small arguments use the alternating series u^6/720 - u^8/40320 + ...
    to avoid cancellation.
    """
    u = np.asarray(u, dtype=float)
    u2 = u * u
    small = np.abs(u) < 0.2
    series = u2**3 / 720.0 * (1.0 - u2 / 56.0 * (1.0 - u2 / 90.0))
    direct = 1.0 - u2 / 2.0 + u2 * u2 / 24.0 - np.cos(u)
    return np.where(small, series, direct)


def lemma_inequality_gap(x, delta: float) -> float:
    """Slack of the sample-level lemma inequality for differences ``x``.

    With u = x * delta, returns
    2(1 - mean cos u)/delta^2 + mean(x^4) delta^2/12 - mean(x^2),
    computed as a mean of pointwise nonnegative terms.
    """
    u = np.asarray(x, dtype=float) * delta
    return 2.0 * float(np.mean(cosine_slack(u))) / delta**2
