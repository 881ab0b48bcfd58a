"""Eve's Holevo information for family TFCMs and its supremum over M."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import xlogy

from .errors import DomainError, NumericalError
from .tfcm import (
    ETA_BOX_MAX,
    TFCM,
    FamilyParams,
    NoiseBounds,
    NominalDimensionless,
    excess_budget,
    family_is_physical,
    family_member,
    family_uncertainty_terms,
    in_constraint_set,
    is_physical,
    search_box,
    to_dimensionless,
)

LN2 = math.log(2.0)
DISCRIMINANT_TOL = 1e-9


@dataclass(frozen=True)
class SymplecticInvariants:
    I1: float
    I2: float
    I3: float
    I4: float
    d_plus: float
    d_minus: float


@dataclass(frozen=True)
class HolevoResult:
    """Outcome of the supremum search.

    When ``aborted`` is true no member of M exists (the measured bounds are
    inconsistent with the source) and ``chi`` is NaN.
    """

    chi: float
    gamma_star: TFCM | None
    family_params_star: FamilyParams | None
    on_search_boundary: bool
    aborted: bool = False
    reason: str = ""
    evaluations: int = 0


def g_entropy(d):
    """Von Neumann entropy (bits) of a thermal mode with symplectic eigenvalue d."""
    d = np.asarray(d, dtype=float)
    if np.any(d < 0.5 - 1e-6):
        raise DomainError(f"symplectic eigenvalue below 1/2: {np.min(d)}")
    d = np.maximum(d, 0.5)
    out = (xlogy(d + 0.5, d + 0.5) - xlogy(d - 0.5, d - 0.5)) / LN2
    return float(out) if out.ndim == 0 else out


def symplectic_invariants(gamma: TFCM) -> SymplecticInvariants:
    """I1..I4 and d+/- of a TFCM whose sub-blocks are diagonal.

    The idler's opposite commutator sign enters I3 as a minus sign: the
    products of the time and frequency cross-covariances count against
    the sum I1 + I2.
    """
    if gamma.family is not None:
        return _family_invariants(gamma)
    g = to_dimensionless(gamma)
    off = np.abs([g[0, 1], g[2, 3], g[0, 3], g[1, 2]])
    if np.any(off > 1e-9 * np.max(np.abs(g))):
        raise DomainError("symplectic_invariants needs diagonal sub-blocks (family form)")
    tS, wS, tI, wI = g[0, 0], g[1, 1], g[2, 2], g[3, 3]
    ct, cw = g[0, 2], g[1, 3]
    I1 = tS * wS
    I2 = tI * wI
    I3 = -ct * cw
    I4 = (tS * tI - ct**2) * (wS * wI - cw**2)
    s = I1 + I2 + 2.0 * I3
    disc = s * s - 4.0 * I4
    if disc < -DISCRIMINANT_TOL * max(1.0, s * s):
        raise NumericalError("negative discriminant in symplectic eigenvalues", {"disc": disc, "s": s})
    disc = max(disc, 0.0)
    d_plus = math.sqrt((s + math.sqrt(disc)) / 2.0)
    d_minus = math.sqrt(max(I4, 0.0)) / d_plus if d_plus > 0 else 0.0
    return SymplecticInvariants(I1, I2, I3, I4, d_plus, d_minus)


def _family_kernel(moments, eta_t, eta_w, eps_t, eps_w):
    """Vectorized (d_plus, d_minus, conditional determinant, margin) for family members."""
    x_t, x_w, y, margin = family_uncertainty_terms(moments, eta_t, eta_w, eps_t, eps_w)
    disc = np.maximum(y * y - 4.0 * margin, 0.0)
    root = np.sqrt(disc)
    dp2_excess = (y + root) / 2.0  # d+^2 - 1/4
    with np.errstate(divide="ignore", invalid="ignore"):
        # Unphysical members may give NaN here; callers mask them.
        d_plus = np.sqrt(0.25 + dp2_excess)
        dm2_excess = np.where(dp2_excess > 0, margin / dp2_excess, 0.0)
    d_minus = np.sqrt(np.maximum(0.25 + dm2_excess, 0.0))
    # Bob's conditional covariance given Alice's time: diag(det_t / tS, wI).
    cond_det = (0.25 + x_t) * (1.0 + np.asarray(eps_w, dtype=float))
    return d_plus, d_minus, cond_det, margin, x_t, x_w, y


def _family_invariants(gamma: TFCM) -> SymplecticInvariants:
    p = gamma.family
    nd = NominalDimensionless.from_moments(gamma.moments)
    d_plus, d_minus, _, _, x_t, x_w, y = _family_kernel(gamma.moments, *p.as_tuple())
    a2, c2 = nd.var**2, nd.cov**2
    I1 = a2
    I2 = a2 * (1.0 + p.eps_t) * (1.0 + p.eps_w)
    I3 = -(1.0 - p.eta_t) * (1.0 - p.eta_w) * c2
    I4 = (0.25 + x_t) * (0.25 + x_w)
    return SymplecticInvariants(float(I1), float(I2), float(I3), float(I4), float(d_plus), float(d_minus))


def conditional_idler_covariance(gamma: TFCM) -> np.ndarray:
    """Bob's (t, w) covariance conditioned on Alice's arrival time, in SI units."""
    m = gamma.matrix
    if not m[0, 0] > 0:
        raise DomainError("signal time variance must be positive")
    if gamma.family is not None:
        # tI - ct^2/tS = (det of time cross block) / tS, evaluated without cancellation.
        p = gamma.family
        s_coh2, s_cor2 = gamma.moments.sigma_coh**2, gamma.moments.sigma_cor**2
        t_var = s_cor2 / 4.0 + s_coh2
        t_cov = s_coh2 - s_cor2 / 4.0
        det0 = s_cor2 * s_coh2  # t_var^2 - t_cov^2
        det = det0 + p.eps_t * t_var**2 + (2.0 * p.eta_t - p.eta_t**2) * t_cov**2
        t_cond = det / t_var
    else:
        t_cond = m[2, 2] - m[0, 2] ** 2 / m[0, 0]
    return np.diag([t_cond, m[3, 3]])


def holevo_given_gamma(gamma: TFCM) -> float:
    """chi(A;E) = S(AB) - S(B | T_A) in bits."""
    inv = symplectic_invariants(gamma)
    if gamma.family is not None:
        _, _, cond_det, _, _, _, _ = _family_kernel(gamma.moments, *gamma.family.as_tuple())
        cond_det = float(cond_det)
    else:
        # s^2 times rad^2/s^2: already dimensionless.
        cond_det = float(np.linalg.det(conditional_idler_covariance(gamma)))
    return float(g_entropy(inv.d_plus) + g_entropy(inv.d_minus) - g_entropy(math.sqrt(cond_det)))


def family_chi(moments, eta_t, eta_w, eps_t, eps_w):
    """Vectorized chi for family members; NaN where unphysical."""
    d_plus, d_minus, cond_det, _, _, _, _ = _family_kernel(moments, eta_t, eta_w, eps_t, eps_w)
    ok = family_is_physical(moments, eta_t, eta_w, eps_t, eps_w)
    d_minus = np.where(ok, np.maximum(d_minus, 0.5), 0.5)
    d_plus = np.maximum(d_plus, 0.5)
    cond = np.sqrt(np.maximum(cond_det, 0.25))
    chi = g_entropy(d_plus) + g_entropy(d_minus) - g_entropy(cond)
    return np.where(ok, chi, np.nan)


def _linear_feasible(moments, bounds, eta_t, eta_w, eps_t, eps_w):
    from .tfcm import CONSTRAINT_RTOL, family_difference_variances, nominal_difference_variances

    v_t, v_w = family_difference_variances(moments, eta_t, eta_w, eps_t, eps_w)
    v_t0, v_w0 = nominal_difference_variances(moments)
    ok = v_t <= (1.0 + bounds.xi_t) * v_t0 * (1.0 + CONSTRAINT_RTOL)
    ok &= v_w <= (1.0 + bounds.xi_w) * v_w0 * (1.0 + CONSTRAINT_RTOL)
    ok &= (eta_t >= 0) & (eta_w >= 0) & (eta_t <= ETA_BOX_MAX) & (eta_w <= ETA_BOX_MAX)
    ok &= (eps_t >= 0) & (eps_w >= 0)
    return ok


def _budget_map(moments, bounds, u):
    """Map u in [0,1]^4 = (r_t, s_t, r_w, s_w) onto family parameters.

    r is the fraction of the difference-variance budget spent and s the share
    of it given to correlation loss (the rest goes to idler noise).  Every
    image satisfies the linear constraints; the eta <= 2 cap does not.
    """
    budget_t, budget_w = excess_budget(moments, bounds)
    s_coh2 = moments.sigma_coh**2
    s_cor2 = moments.sigma_cor**2
    t_var = s_cor2 / 4.0 + s_coh2
    t_cov = s_coh2 - s_cor2 / 4.0
    w_var = 1.0 / (4.0 * s_cor2) + 1.0 / (16.0 * s_coh2)
    w_cov = 1.0 / (4.0 * s_cor2) - 1.0 / (16.0 * s_coh2)
    r_t, s_t, r_w, s_w = np.clip(u, 0.0, 1.0)
    eta_t = s_t * r_t * budget_t / (2.0 * t_cov)
    eps_t = (1.0 - s_t) * r_t * budget_t / t_var
    eta_w = s_w * r_w * budget_w / (2.0 * w_cov)
    eps_w = (1.0 - s_w) * r_w * budget_w / w_var
    return eta_t, eta_w, eps_t, eps_w


def _to_budget_coords(moments, bounds, p):
    budget_t, budget_w = excess_budget(moments, bounds)
    s_coh2 = moments.sigma_coh**2
    s_cor2 = moments.sigma_cor**2
    t_var = s_cor2 / 4.0 + s_coh2
    t_cov = s_coh2 - s_cor2 / 4.0
    w_var = 1.0 / (4.0 * s_cor2) + 1.0 / (16.0 * s_coh2)
    w_cov = 1.0 / (4.0 * s_cor2) - 1.0 / (16.0 * s_coh2)
    eta_t, eta_w, eps_t, eps_w = p
    used_t = 2.0 * eta_t * t_cov + eps_t * t_var
    used_w = 2.0 * eta_w * w_cov + eps_w * w_var
    r_t = used_t / budget_t if budget_t > 0 else 0.0
    r_w = used_w / budget_w if budget_w > 0 else 0.0
    s_t = 2.0 * eta_t * t_cov / used_t if used_t > 0 else 0.5
    s_w = 2.0 * eta_w * w_cov / used_w if used_w > 0 else 0.5
    return np.array([r_t, s_t, r_w, s_w])


def holevo_upper_bound(
    gamma0: TFCM,
    bounds: NoiseBounds,
    grid_points: int = 21,
    refine_starts: int = 5,
    tol: float = 1e-4,
) -> HolevoResult:
    """Supremum of chi over the family members allowed by ``bounds``.

    A coarse grid over the box eta in [0, min(2, eta_max)], eps in
    [0, eps_max] is evaluated first; the best ``refine_starts`` feasible
    points then seed Nelder-Mead searches in budget coordinates.
    """
    moments = gamma0.moments
    box = search_box(moments, bounds)
    if box is None:
        return HolevoResult(
            chi=math.nan,
            gamma_star=None,
            family_params_star=None,
            on_search_boundary=False,
            aborted=True,
            reason="measured excess noise is below the source's own variance: no TFCM is consistent",
        )

    axes = [np.linspace(0.0, hi, grid_points) if hi > 0 else np.zeros(1) for hi in (box.eta_t, box.eta_w, box.eps_t, box.eps_w)]
    mesh = np.meshgrid(*axes, indexing="ij")
    flat = [m.ravel() for m in mesh]
    feasible = _linear_feasible(moments, bounds, *flat)
    chi = np.full(flat[0].shape, -np.inf)
    idx = np.flatnonzero(feasible)
    values = family_chi(moments, *(f[idx] for f in flat))
    chi[idx] = np.where(np.isnan(values), -np.inf, values)
    evaluations = int(flat[0].size)
    if not np.isfinite(chi).any():
        return HolevoResult(
            chi=math.nan,
            gamma_star=None,
            family_params_star=None,
            on_search_boundary=False,
            aborted=True,
            reason="no physical TFCM satisfies the measured bounds",
            evaluations=evaluations,
        )

    # Deterministic ordering: chi descending, then lexicographic (eta_t, eta_w, eps_t, eps_w).
    order = np.lexsort((flat[3], flat[2], flat[1], flat[0], -chi))
    best_p = tuple(float(f[order[0]]) for f in flat)
    best_chi = float(chi[order[0]])

    def objective(u):
        p = _budget_map(moments, bounds, u)
        if not (p[0] <= ETA_BOX_MAX and p[1] <= ETA_BOX_MAX):
            return 1e6
        value = family_chi(moments, *p)
        if not np.isfinite(value):
            return 1e6
        return -float(value)

    starts = [order[k] for k in range(min(refine_starts, int(np.isfinite(chi).sum())))]
    for k in starts:
        p0 = tuple(float(f[k]) for f in flat)
        u0 = _to_budget_coords(moments, bounds, p0)
        res = minimize(
            objective,
            u0,
            method="Nelder-Mead",
            options={"xatol": 1e-7, "fatol": tol / 10.0, "maxiter": 4000, "initial_simplex": _simplex(u0)},
        )
        evaluations += int(res.nfev)
        cand = _budget_map(moments, bounds, np.clip(res.x, 0.0, 1.0))
        cand = tuple(float(v) for v in cand)
        value = -objective(np.clip(res.x, 0.0, 1.0))
        if value > best_chi or (value == best_chi and cand < best_p):
            best_chi, best_p = value, cand

    params = FamilyParams(eta_t=best_p[0], eta_w=best_p[1], eps_t=best_p[2], eps_w=best_p[3])
    gamma_star = family_member(gamma0, params)
    if not in_constraint_set(gamma_star, bounds):
        raise NumericalError("maximizer left the constraint set", {"params": best_p, "chi": best_chi})
    boundary = bool(
        (box.eta_t_heuristic and params.eta_t >= ETA_BOX_MAX * (1 - 1e-9))
        or (box.eta_w_heuristic and params.eta_w >= ETA_BOX_MAX * (1 - 1e-9))
    )
    return HolevoResult(
        chi=max(best_chi, 0.0),
        gamma_star=gamma_star,
        family_params_star=params,
        on_search_boundary=boundary,
        evaluations=evaluations,
    )


def _simplex(u0, step=0.05):
    pts = [np.array(u0, dtype=float)]
    for i in range(len(u0)):
        v = np.array(u0, dtype=float)
        v[i] = v[i] - step if v[i] + step > 1.0 else v[i] + step
        pts.append(v)
    return np.array(pts)


def refine_from(gamma0: TFCM, bounds: NoiseBounds, p0: FamilyParams, tol: float = 1e-4) -> float:
    """Single Nelder-Mead run from ``p0``; used to audit the reported supremum."""
    moments = gamma0.moments

    def objective(u):
        p = _budget_map(moments, bounds, u)
        if not (p[0] <= ETA_BOX_MAX and p[1] <= ETA_BOX_MAX):
            return 1e6
        value = family_chi(moments, *p)
        return -float(value) if np.isfinite(value) else 1e6

    u0 = _to_budget_coords(moments, bounds, p0.as_tuple())
    res = minimize(
        objective,
        u0,
        method="Nelder-Mead",
        options={"xatol": 1e-7, "fatol": tol / 10.0, "maxiter": 4000, "initial_simplex": _simplex(u0)},
    )
    return -float(res.fun)
