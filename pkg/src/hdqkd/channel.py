"""Photon-number, loss, dark-count and postselection statistics."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares
from scipy.stats import poisson

from .errors import DomainError

SERIES_TERMS = 64  # n = 0..64
SUM_TOL = 1e-9


@dataclass(frozen=True)
class LinkParams:
    distance_km: float
    loss_db_per_km: float = 0.2

    @property
    def transmissivity(self) -> float:
        return fiber_transmissivity(self.distance_km, self.loss_db_per_km)


@dataclass(frozen=True)
class EventProbabilities:
    """Conditional probabilities of the five postselected-frame event types.

    P1: one pair, both photons detected, no dark counts (correlated times).
    P2: both sides saw photons but the times are uncorrelated (multi-pair,
        or one pair plus a dark count).
    P3: Alice photon, Bob dark count only.  P4: the reverse.
    P5: dark counts on both sides only.
    F is the fraction of postselected frames with exactly one emitted pair.
    """

    p_d: float
    p_r: float
    P1: float
    P2: float
    P3: float
    P4: float
    P5: float
    F: float

    @property
    def weights(self) -> tuple[float, float, float, float, float]:
        return (self.P1, self.P2, self.P3, self.P4, self.P5)


def fiber_transmissivity(distance_km: float, loss_db_per_km: float = 0.2) -> float:
    if distance_km < 0:
        raise DomainError(f"distance must be >= 0, got {distance_km}", field="distance_km")
    return 10.0 ** (-loss_db_per_km * distance_km / 10.0)


def dark_prob(dark_rate: float, frame_duration: float) -> float:
    """Probability of a single dark count in one frame (multiple counts neglected)."""
    p = dark_rate * frame_duration
    if p > 0.01:
        warnings.warn(f"dark-count probability per frame {p:.3g} is not small", RuntimeWarning, stacklevel=2)
    return p


def postselect_probability(mu: float, eta_a: float, eta_b: float, p_d: float) -> float:
    """Probability that both terminals register at least one detection in a frame.

    ``eta_b`` is Bob's efficiency times the link transmissivity.  Closed form
    of the Poisson sum over the number of emitted pairs.
    """
    q = 1.0 - p_d
    # 1 - q A - q B + q^2 A B e^{mu eta_a eta_b} with A = e^{-mu eta_a}, B = e^{-mu eta_b},
    # regrouped as (1 - qA)(1 - qB) + q^2 A B (e^{mu eta_a eta_b} - 1): a sum of
    # nonnegative terms, so nothing cancels when either efficiency is small.
    not_a = p_d + q * -math.expm1(-mu * eta_a)  # 1 - qA
    not_b = p_d + q * -math.expm1(-mu * eta_b)
    both = q * q * math.exp(-mu * (eta_a + eta_b)) * math.expm1(mu * eta_a * eta_b)
    return not_a * not_b + both


def _poisson_weights(mu: float) -> np.ndarray:
    n = np.arange(SERIES_TERMS + 1)
    w = poisson.pmf(n, mu)
    tail = poisson.sf(SERIES_TERMS, mu)
    if tail > 1e-15:
        raise DomainError(f"mean pair number {mu} too large for the {SERIES_TERMS}-term series", field="mu")
    return w


def _detect_prob(eta: float, n: np.ndarray) -> np.ndarray:
    """1 - (1 - eta)^n without cancellation."""
    if eta >= 1.0:
        return (n > 0).astype(float)
    return -np.expm1(n * math.log1p(-eta))


def _miss_prob(eta: float, n: np.ndarray) -> np.ndarray:
    if eta >= 1.0:
        return (n == 0).astype(float)
    return np.exp(n * math.log1p(-eta))


def postselect_probability_series(mu: float, eta_a: float, eta_b: float, p_d: float) -> float:
    n = np.arange(SERIES_TERMS + 1)
    w = _poisson_weights(mu)
    a = p_d + (1.0 - p_d) * _detect_prob(eta_a, n)
    b = p_d + (1.0 - p_d) * _detect_prob(eta_b, n)
    return float(np.sum(w * a * b))


def event_term_sums(mu: float, eta_a: float, eta_b: float, p_d: float) -> np.ndarray:
    """Unnormalized numerators of P1..P5 (the five Poisson series)."""
    n = np.arange(SERIES_TERMS + 1)
    w = _poisson_weights(mu)
    da, db = _detect_prob(eta_a, n), _detect_prob(eta_b, n)
    ma, mb = _miss_prob(eta_a, n), _miss_prob(eta_b, n)
    p1 = w[1] * eta_a * eta_b * (1.0 - p_d) ** 2
    p2 = float(np.sum((w * da * db)[2:])) + w[1] * eta_a * eta_b * (2.0 * p_d - p_d**2)
    p3 = float(np.sum((w * da * p_d * mb)[1:]))
    p4 = float(np.sum((w * p_d * ma * db)[1:]))
    p5 = float(np.sum(w * p_d**2 * ma * mb))
    return np.array([p1, p2, p3, p4, p5])


def event_probabilities(mu: float, eta_a: float, eta_b: float, p_d: float) -> EventProbabilities:
    """P1..P5 and the single-pair fraction F for one operating point."""
    for name, v in (("eta_a", eta_a), ("eta_b", eta_b), ("p_d", p_d)):
        if not 0.0 <= v <= 1.0:
            raise DomainError(f"{name} must lie in [0, 1], got {v}", field=name)
    if mu < 0:
        raise DomainError("mu must be >= 0", field="mu")
    p_r = postselect_probability(mu, eta_a, eta_b, p_d)
    if p_r <= 0:
        raise DomainError("postselection probability is zero: degenerate channel", field="p_r")
    terms = event_term_sums(mu, eta_a, eta_b, p_d)
    P = terms / p_r
    if abs(P.sum() - 1.0) > SUM_TOL:
        raise DomainError(f"event probabilities sum to {P.sum()!r}")
    single = mu * math.exp(-mu)
    # 1 - (1 - eta)(1 - p_d) written without cancellation.
    F = single * (p_d + (1.0 - p_d) * eta_a) * (p_d + (1.0 - p_d) * eta_b) / p_r
    return EventProbabilities(p_d, p_r, *(float(x) for x in P), F=F)


@dataclass(frozen=True)
class DecoyEstimate:
    F: float
    eta_a: float
    eta_b: float
    residual: float


def estimate_F_from_decoys(readings, p_d: float, signal_mu: float | None = None) -> DecoyEstimate:
    """Fit the two efficiencies to measured postselection rates at several intensities.

    ``readings`` is a sequence of (mu, measured p_r).  The closed-form p_r is
    symmetric under exchanging the two efficiencies, and so is F; the fit
    reports them with eta_a >= eta_b.
    """
    readings = [(float(m), float(p)) for m, p in readings]
    mus = np.array([m for m, _ in readings])
    prs = np.array([p for _, p in readings])
    if len(np.unique(mus)) < 2:
        raise DomainError("decoy estimation needs at least two distinct intensities", field="readings")
    if np.any(prs <= 0):
        raise DomainError("measured postselection rates must be positive", field="readings")

    def residuals(x):
        ea, eb = 10.0 ** x
        model = np.array([postselect_probability(m, ea, eb, p_d) for m in mus])
        return np.log(model / prs)

    # Start from the single-pair approximation p_r ~ mu eta_a eta_b, split evenly.
    guess = float(np.clip(np.median(prs / mus), 1e-12, 1.0))
    x0 = np.log10([math.sqrt(guess), math.sqrt(guess)])
    x0 = np.minimum(x0, 0.0)
    fit = least_squares(residuals, x0, bounds=([-15.0, -15.0], [0.0, 0.0]), xtol=1e-14, ftol=1e-14, gtol=1e-14)
    ea, eb = sorted(10.0 ** fit.x, reverse=True)
    mu_s = float(mus[0] if signal_mu is None else signal_mu)
    ev = event_probabilities(mu_s, ea, eb, p_d)
    return DecoyEstimate(F=ev.F, eta_a=float(ea), eta_b=float(eb), residual=float(np.sqrt(np.mean(fit.fun**2))))
