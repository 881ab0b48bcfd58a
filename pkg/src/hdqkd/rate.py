"""Alice-Bob Shannon information and the secure-key-rate bound."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .channel import EventProbabilities
from .errors import DomainError, NumericalError
from .interferometry import DetectorParams
from .tfcm import TFCM, NoiseBounds, nominal_difference_variances

# The arrival-time jitter conversion uses the two-digit FWHM factor.
JITTER_FWHM_FACTOR = 2.35
MAX_EVALUATIONS = 1_000_000
MI_TOL_BITS = 1e-3
# Gaussian tails are integrated out to this many standard deviations.
TAIL_SIGMAS = 12.0


@dataclass(frozen=True)
class ProtocolParams:
    key_fraction: float = 0.5
    reconciliation_efficiency: float = 0.9
    bits_per_frame: int = 8

    def __post_init__(self):
        if not 0 < self.key_fraction <= 1:
            raise DomainError("key_fraction q must lie in (0, 1]", field="key_fraction")
        if not 0 < self.reconciliation_efficiency <= 1:
            raise DomainError("reconciliation efficiency must lie in (0, 1]", field="reconciliation_efficiency")
        if int(self.bits_per_frame) != self.bits_per_frame or self.bits_per_frame <= 0:
            raise DomainError("bits_per_frame must be a positive integer", field="bits_per_frame")


@dataclass(frozen=True)
class ArrivalTimeMixture:
    """Joint density of (t_A, t_B) for a postselected frame.

    Event 1 is the jointly Gaussian pair with covariance ``lam``; events 2-5
    mix independent Gaussians (variances lam[0,0], lam[1,1]) and uniform
    densities on [-T_f/2, T_f/2].
    """

    weights: tuple[float, float, float, float, float]
    lam: np.ndarray
    frame_duration: float

    def __post_init__(self):
        lam = np.array(self.lam, dtype=float)
        if lam.shape != (2, 2):
            raise DomainError("event-1 covariance must be 2x2")
        if abs(sum(self.weights) - 1.0) > 1e-9 or min(self.weights) < 0:
            raise DomainError("mixture weights must be nonnegative and sum to 1")
        if lam[0, 0] <= 0 or lam[1, 1] <= 0 or lam[0, 1] ** 2 > lam[0, 0] * lam[1, 1] * (1 + 1e-12):
            raise DomainError("event-1 covariance must be positive semidefinite with positive variances")
        lam.setflags(write=False)
        object.__setattr__(self, "lam", lam)

    @property
    def sigma_a2(self) -> float:
        return float(self.lam[0, 0])

    @property
    def sigma_b2(self) -> float:
        return float(self.lam[1, 1])

    @property
    def correlation(self) -> float:
        return float(self.lam[0, 1] / math.sqrt(self.lam[0, 0] * self.lam[1, 1]))


@dataclass(frozen=True)
class RateBreakdown:
    I_AB: float
    chi_UB: float
    F: float
    n_R: int
    p_r: float
    bits_per_frame: float
    SKR_raw: float
    SKR: float
    PIE: float
    clamped: bool
    extras: dict = field(default_factory=dict, compare=False)


def build_mixture(
    gamma: TFCM, detector: DetectorParams, events: EventProbabilities, frame_duration: float
) -> ArrivalTimeMixture:
    """Arrival-time mixture from the time block of ``gamma`` plus detector jitter."""
    m = gamma.matrix
    jitter_var = (detector.timing_jitter / JITTER_FWHM_FACTOR) ** 2
    sa2 = m[0, 0] + jitter_var
    sb2 = m[2, 2] + jitter_var
    c = m[0, 2]
    lam = np.array([[sa2, c], [c, sb2]])
    assert c * c <= sa2 * sb2, "event-1 covariance must be PSD for members of M"
    return ArrivalTimeMixture(events.weights, lam, frame_duration)


def gaussian_mutual_information(rho: float) -> float:
    """Mutual information (bits) of a bivariate Gaussian with correlation rho."""
    return -0.5 * math.log2(1.0 - rho * rho)


def _conditional_variance(lam: np.ndarray) -> float:
    """Var(t_B | t_A); evaluated as det / var_A to keep precision for rho near 1."""
    a, b, c = lam[0, 0], lam[1, 1], lam[0, 1]
    return (a * b - c * c) / a


def shannon_information(m: ArrivalTimeMixture, tol: float = MI_TOL_BITS) -> float:
    """I(A;B) in bits by nested adaptive Gauss-Kronrod quadrature.

    The inner variable is y = t_B - k t_A with k = Lambda_AB / Lambda_AA, in
    which the event-1 Gaussian factorizes; break points are placed at the
    uniform-density edges and around the narrow conditional peak.
    """
    P1, P2, P3, P4, P5 = m.weights
    # Work in units of the frame duration.
    s = m.frame_duration
    half = 0.5
    lam = m.lam / s**2
    va, vb = lam[0, 0], lam[1, 1]
    k = lam[0, 1] / va
    vy = _conditional_variance(lam)
    if vy <= 0:
        raise DomainError("event-1 covariance is singular")
    sa, sb, sy = math.sqrt(va), math.sqrt(vb), math.sqrt(vy)
    na = 1.0 / math.sqrt(2 * math.pi * va)
    nb = 1.0 / math.sqrt(2 * math.pi * vb)
    ny = 1.0 / math.sqrt(2 * math.pi * vy)
    wa_g, wa_u = P1 + P2 + P3, P4 + P5
    wb_g, wb_u = P1 + P2 + P4, P3 + P5
    gauss_a = P1 + P2 + P3 > 0
    gauss_b = P1 + P2 + P4 > 0
    uni_a = P4 + P5 > 0
    uni_b = P3 + P5 > 0
    la = max(half if uni_a else 0.0, TAIL_SIGMAS * sa if gauss_a else 0.0)
    lb = max(half if uni_b else 0.0, TAIL_SIGMAS * sb if gauss_b else 0.0)
    count = [0]

    def joint(x, t_b, y):
        ga = na * math.exp(-0.5 * x * x / va)
        gb = nb * math.exp(-0.5 * t_b * t_b / vb)
        ua = 1.0 if abs(x) <= half else 0.0
        ub = 1.0 if abs(t_b) <= half else 0.0
        p = P2 * ga * gb + P3 * ga * ub + P4 * ua * gb + P5 * ua * ub
        if P1:
            p += P1 * ga * ny * math.exp(-0.5 * y * y / vy)
        pa = wa_g * ga + wa_u * ua
        pb = wb_g * gb + wb_u * ub
        return p, pa, pb

    def inner(y, x):
        count[0] += 1
        t_b = y + k * x
        p, pa, pb = joint(x, t_b, y)
        if p <= 0.0:
            return 0.0
        return p * math.log2(p / (pa * pb))

    def outer(x):
        lo, hi = -lb - k * x, lb - k * x
        pts = [y for y in (0.0, -4 * sy, 4 * sy, half - k * x, -half - k * x) if lo < y < hi]
        val, _ = quad(inner, lo, hi, args=(x,), points=pts or None, limit=400, epsabs=tol * 1e-3, epsrel=1e-10)
        if count[0] > MAX_EVALUATIONS:
            raise NumericalError(
                "mutual-information quadrature exceeded its evaluation budget",
                {"evaluations": count[0], "x": x},
            )
        return val

    pts = [x for x in (0.0, -half, half, -4 * sa, 4 * sa) if -la < x < la]
    total, err = quad(outer, -la, la, points=pts, limit=400, epsabs=tol * 0.1, epsrel=1e-10)
    if not err <= tol:
        raise NumericalError(
            "mutual-information quadrature did not converge",
            {"estimate": total, "error": err, "evaluations": count[0]},
        )
    return max(total, 0.0)


def secure_key_rate(
    pp: ProtocolParams,
    events: EventProbabilities,
    I_AB: float,
    chi_UB: float,
    frame_duration: float,
) -> RateBreakdown:
    """SKR >= (q p_r / 3 T_f) [beta I - (1 - F) n_R - F chi]."""
    bits = pp.reconciliation_efficiency * I_AB - (1.0 - events.F) * pp.bits_per_frame - events.F * chi_UB
    scale = pp.key_fraction * events.p_r / (3.0 * frame_duration)
    raw = scale * bits
    clamped = raw < 0
    skr = max(raw, 0.0)
    return RateBreakdown(
        I_AB=I_AB,
        chi_UB=chi_UB,
        F=events.F,
        n_R=int(pp.bits_per_frame),
        p_r=events.p_r,
        bits_per_frame=bits,
        SKR_raw=raw,
        SKR=skr,
        PIE=max(bits, 0.0),
        clamped=bool(clamped),
    )


def nominal_mi_tfcm(gamma0: TFCM, bounds: NoiseBounds) -> TFCM:
    """Gamma0 with both difference variances inflated to their measured bounds.

    The excess xi * v0 is split evenly between the signal and idler
    variances; the cross terms are untouched.
    """
    v_t0, v_w0 = nominal_difference_variances(gamma0.moments)
    m = np.array(gamma0.matrix)
    for i, extra in ((0, bounds.xi_t * v_t0), (1, bounds.xi_w * v_w0)):
        m[i, i] += extra / 2.0
        m[i + 2, i + 2] += extra / 2.0
    return TFCM(m, gamma0.moments)


def mi_tfcm(gamma0: TFCM, gamma_star: TFCM | None, bounds: NoiseBounds, mi_model: str = "gamma_star") -> TFCM:
    """Member of M whose time block feeds I(A;B)."""
    if mi_model == "gamma_star":
        if gamma_star is None:
            raise DomainError("no maximizing TFCM available (protocol aborted)", field="mi_model")
        return gamma_star
    if mi_model == "nominal":
        return nominal_mi_tfcm(gamma0, bounds)
    raise DomainError(f"unknown mi_model {mi_model!r}", field="mi_model")
