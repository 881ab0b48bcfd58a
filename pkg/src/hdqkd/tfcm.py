"""Time-frequency covariance matrices (TFCMs) and the attack family M.

Ordering everywhere is (t_S, w_S, t_I, w_I). Times are in seconds and
angular frequencies in rad/s.

Family members are parametrized relative to the nominal source matrix by
correlation-loss factors (eta_t, eta_w) and idler excess-noise factors
(eps_t, eps_w).  For those members the quantities that matter
(difference variances, block determinants, the uncertainty margin) are
tiny differences of numbers of order (sigma_coh/sigma_cor)^2, so they are
evaluated from closed forms in the family parameters rather than from
the matrix entries.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .source import SourceMoments

PHYSICALITY_TOL = 1e-9
SYMMETRY_RTOL = 1e-12
# Relative slack on the difference-variance constraints; they are closed sets.
CONSTRAINT_RTOL = 1e-12
ETA_BOX_MAX = 2.0

_J = np.array([[0.0, 1.0], [-1.0, 0.0]])
# [w_J, t_K] = i eps_J delta_JK with eps_S = -eps_I = 1: the idler block flips sign.
SYMPLECTIC_FORM = np.block([[_J, np.zeros((2, 2))], [np.zeros((2, 2)), -_J]])


@dataclass(frozen=True)
class FamilyParams:
    eta_t: float = 0.0
    eta_w: float = 0.0
    eps_t: float = 0.0
    eps_w: float = 0.0

    def __post_init__(self):
        if self.eps_t < 0 or self.eps_w < 0:
            raise DomainError("excess-noise factors eps_t, eps_w must be >= 0")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.eta_t, self.eta_w, self.eps_t, self.eps_w)


@dataclass(frozen=True)
class NoiseBounds:
    """Upper bounds on the excess-noise factors xi_t and xi_w."""

    xi_t: float
    xi_w: float

    def __post_init__(self):
        if self.xi_t < -1 or self.xi_w < -1:
            raise DomainError("excess-noise factors must satisfy 1 + xi >= 0")


@dataclass(frozen=True, eq=False)
class TFCM:
    """A 4x4 time-frequency covariance matrix in SI units.

    ``family`` is set when the matrix was produced by :func:`family_member`;
    downstream code then uses the closed-form family expressions.
    """

    matrix: np.ndarray
    moments: SourceMoments
    family: FamilyParams | None = field(default=None)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float, copy=True)
        if m.shape != (4, 4):
            raise DomainError(f"TFCM must be 4x4, got shape {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def signal_block(self) -> np.ndarray:
        return self.matrix[:2, :2]

    @property
    def idler_block(self) -> np.ndarray:
        return self.matrix[2:, 2:]

    @property
    def cross_block(self) -> np.ndarray:
        return self.matrix[:2, 2:]

    def is_symmetric(self) -> bool:
        # Entrywise scale sqrt(|m_ii m_jj|) keeps s^2 and rad^2/s^2 entries apart.
        m = self.matrix
        d = np.sqrt(np.abs(np.diag(m)))
        scale = np.outer(d, d)
        return bool(np.all(np.abs(m - m.T) <= SYMMETRY_RTOL * scale))


def scaling(t_norm: float) -> np.ndarray:
    return np.array([1.0 / t_norm, t_norm, 1.0 / t_norm, t_norm])


def to_dimensionless(gamma: TFCM) -> np.ndarray:
    """Divide time rows/columns by T_norm and multiply frequency ones by it."""
    d = scaling(gamma.moments.t_norm)
    return gamma.matrix * np.outer(d, d)


def is_physical(gamma: TFCM, tol: float = PHYSICALITY_TOL) -> bool:
    """Uncertainty-principle test: Gamma~ + (i/2) Omega_s must be PSD."""
    if not gamma.is_symmetric():
        raise DomainError("TFCM is not symmetric")
    g = to_dimensionless(gamma)
    herm = g + 0.5j * SYMPLECTIC_FORM
    return bool(np.linalg.eigvalsh(herm).min() >= -tol)


@dataclass(frozen=True)
class NominalDimensionless:
    """Nominal TFCM entries after normalization by T_norm.

    The signal and idler blocks are diag(var, var) and the cross block is
    diag(cov, cov); the time and frequency entries coincide.  ``gap`` is
    var - cov, kept separately so that var^2 - cov^2 = 1/4 holds exactly.
    """

    var: float
    cov: float
    gap: float

    @classmethod
    def from_moments(cls, moments: SourceMoments) -> NominalDimensionless:
        r = moments.sigma_coh / moments.sigma_cor
        half = r / 2.0
        eighth = 1.0 / (8.0 * r)
        return cls(var=half + eighth, cov=half - eighth, gap=1.0 / (4.0 * r))


def family_member(gamma0: TFCM, p: FamilyParams) -> TFCM:
    """Apply correlation loss and idler excess noise to the nominal TFCM."""
    if gamma0.family is not None and gamma0.family != FamilyParams():
        raise DomainError("family_member expects the nominal TFCM, got a perturbed member")
    m0 = np.asarray(gamma0.matrix)
    m = m0.copy()
    loss = np.array([1.0 - p.eta_t, 1.0 - p.eta_w])
    noise = np.array([1.0 + p.eps_t, 1.0 + p.eps_w])
    m[:2, 2:] = np.diag(loss * np.diag(m0[:2, 2:]))
    m[2:, :2] = m[:2, 2:].T
    m[2:, 2:] = np.diag(noise * np.diag(m0[2:, 2:]))
    return TFCM(m, gamma0.moments, family=p)


def difference_variances(gamma: TFCM) -> tuple[float, float]:
    """Variances of t_S - t_I (s^2) and w_S - w_I (rad^2/s^2)."""
    if gamma.family is not None:
        return family_difference_variances(gamma.moments, *gamma.family.as_tuple())
    m = gamma.matrix
    v_t = m[0, 0] + m[2, 2] - 2.0 * m[0, 2]
    v_w = m[1, 1] + m[3, 3] - 2.0 * m[1, 3]
    return float(v_t), float(v_w)


def family_difference_variances(moments: SourceMoments, eta_t, eta_w, eps_t, eps_w):
    """Closed form of :func:`difference_variances` for family members (vectorized)."""
    s_coh2 = moments.sigma_coh**2
    s_cor2 = moments.sigma_cor**2
    t_var = s_cor2 / 4.0 + s_coh2
    t_cov = s_coh2 - s_cor2 / 4.0
    w_var = 1.0 / (4.0 * s_cor2) + 1.0 / (16.0 * s_coh2)
    w_cov = 1.0 / (4.0 * s_cor2) - 1.0 / (16.0 * s_coh2)
    v_t = s_cor2 + eps_t * t_var + 2.0 * eta_t * t_cov
    v_w = 1.0 / (4.0 * s_coh2) + eps_w * w_var + 2.0 * eta_w * w_cov
    return v_t, v_w


def nominal_difference_variances(moments: SourceMoments) -> tuple[float, float]:
    return moments.sigma_cor**2, 1.0 / (4.0 * moments.sigma_coh**2)


def family_uncertainty_terms(moments: SourceMoments, eta_t, eta_w, eps_t, eps_w):
    """Stable building blocks for family members in dimensionless units.

    Returns ``(x_t, x_w, y, margin)`` where the time/frequency cross-block
    determinants are 1/4 + x_t and 1/4 + x_w, the symplectic invariant
    d+^2 + d-^2 equals 1/2 + y, and ``margin`` is
    (d+^2 - 1/4)(d-^2 - 1/4), which is >= 0 exactly for physical states.
    """
    nd = NominalDimensionless.from_moments(moments)
    a2 = nd.var**2
    c2 = nd.cov**2
    eta_t = np.asarray(eta_t, dtype=float)
    eta_w = np.asarray(eta_w, dtype=float)
    eps_t = np.asarray(eps_t, dtype=float)
    eps_w = np.asarray(eps_w, dtype=float)
    x_t = eps_t * a2 + (2.0 * eta_t - eta_t**2) * c2
    x_w = eps_w * a2 + (2.0 * eta_w - eta_w**2) * c2
    y = a2 * (eps_t + eps_w + eps_t * eps_w) + 2.0 * c2 * (eta_t + eta_w - eta_t * eta_w)
    margin = x_t * x_w - (a2 * eps_t * eps_w + c2 * (eta_t - eta_w) ** 2) / 4.0
    return x_t, x_w, y, margin


def family_is_physical(moments: SourceMoments, eta_t, eta_w, eps_t, eps_w, tol: float = PHYSICALITY_TOL):
    """Vectorized physicality of family members from the uncertainty margin."""
    x_t, x_w, y, margin = family_uncertainty_terms(moments, eta_t, eta_w, eps_t, eps_w)
    nd = NominalDimensionless.from_moments(moments)
    scale = np.abs(x_t * x_w) + (nd.var**2 * np.abs(eps_t * eps_w) + nd.cov**2 * (eta_t - eta_w) ** 2) / 4.0
    ok = margin >= -tol * (1.0 + scale)
    # Positive definiteness of both reduced blocks and d+^2 + d-^2 >= 1/2.
    ok &= (0.25 + x_t > 0) & (0.25 + x_w > 0) & (y >= -tol)
    return ok


def in_constraint_set(gamma: TFCM, b: NoiseBounds) -> bool:
    """Membership in M: physical, signal block untouched, difference variances bounded."""
    v_t0, v_w0 = nominal_difference_variances(gamma.moments)
    if gamma.family is None:
        # Signal-side variances are immune to the attack and must match the source.
        from .source import nominal_tfcm

        ref = nominal_tfcm(gamma.moments).signal_block
        if not np.allclose(gamma.signal_block, ref, rtol=1e-12, atol=0.0):
            return False
    v_t, v_w = difference_variances(gamma)
    slack_t, slack_w = CONSTRAINT_RTOL, CONSTRAINT_RTOL
    if gamma.family is None:
        # Differences of large entries carry rounding error relative to the entries.
        m = gamma.matrix
        eps = 64 * np.finfo(float).eps
        slack_t += eps * (abs(m[0, 0]) + abs(m[2, 2]) + 2 * abs(m[0, 2])) / v_t0
        slack_w += eps * (abs(m[1, 1]) + abs(m[3, 3]) + 2 * abs(m[1, 3])) / v_w0
    if v_t > (1.0 + b.xi_t) * v_t0 + slack_t * v_t0 * max(1.0, 1.0 + b.xi_t):
        return False
    if v_w > (1.0 + b.xi_w) * v_w0 + slack_w * v_w0 * max(1.0, 1.0 + b.xi_w):
        return False
    return is_physical(gamma)


@dataclass(frozen=True)
class SearchBox:
    """Per-axis upper limits of the family-parameter search region."""

    eta_t: float
    eta_w: float
    eps_t: float
    eps_w: float

    @property
    def eta_t_heuristic(self) -> bool:
        return self.eta_t >= ETA_BOX_MAX

    @property
    def eta_w_heuristic(self) -> bool:
        return self.eta_w >= ETA_BOX_MAX


def excess_budget(moments: SourceMoments, b: NoiseBounds) -> tuple[float, float]:
    """Allowed growth of each difference variance above nominal (SI units)."""
    v_t0, v_w0 = nominal_difference_variances(moments)
    return b.xi_t * v_t0, b.xi_w * v_w0


def search_box(moments: SourceMoments, b: NoiseBounds) -> SearchBox | None:
    """Closed-form per-axis limits; None when even Gamma0 violates the bounds.

    eps alone can grow until eps * var0 reaches the budget, eta alone until
    2 * eta * cov0 does.  eta is further capped at 2.
    """
    budget_t, budget_w = excess_budget(moments, b)
    if budget_t < 0 or budget_w < 0:
        return None
    s_coh2 = moments.sigma_coh**2
    s_cor2 = moments.sigma_cor**2
    t_var = s_cor2 / 4.0 + s_coh2
    t_cov = s_coh2 - s_cor2 / 4.0
    w_var = 1.0 / (4.0 * s_cor2) + 1.0 / (16.0 * s_coh2)
    w_cov = 1.0 / (4.0 * s_cor2) - 1.0 / (16.0 * s_coh2)
    return SearchBox(
        eta_t=min(ETA_BOX_MAX, budget_t / (2.0 * t_cov)),
        eta_w=min(ETA_BOX_MAX, budget_w / (2.0 * w_cov)),
        eps_t=budget_t / t_var,
        eps_w=budget_w / w_var,
    )
