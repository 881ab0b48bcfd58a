"""Monte-Carlo versus closed-form cross-validation matrix."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import dark_prob, event_probabilities
from .config import RunConfig
from .interferometry import (
    InterferometerKind,
    cfi_visibility_gaussian,
    franson_visibility_gaussian,
    jitter_fourth_moment_time,
    lemma_inequality_gap,
    raw_time_excess,
)
from .montecarlo import (
    McEstimate,
    binned_mutual_information,
    covariance_estimate,
    discretized_gaussian_mi,
    gaussian_quantile_edges,
    mc_visibility,
    mean_estimate,
    sample_biphoton,
    sample_gaussian_pair,
    simulate_frames,
)
from .pipeline import Scenario
from .rate import build_mixture, gaussian_mutual_information
from .source import FWHM_TO_RMS

Z_LIMIT = 3.0
MI_TOL_BITS = 0.05
# Frames per check: the 0 km case uses 1e7; the lossy case needs
# more frames to collect a comparable number of coincidences.
FRAMES_NEAR = 10_000_000
FRAMES_FAR = 1_000_000_000
FAR_DISTANCE_KM = 100.0
MI_SAMPLES = 1_000_000
MI_MODERATE_RHO = 0.9


@dataclass(frozen=True)
class Check:
    name: str
    closed_form: float
    estimate: float
    stderr: float
    passed: bool
    criterion: str

    @property
    def z(self) -> float:
        if self.stderr == 0 or not math.isfinite(self.stderr):
            return math.nan
        return (self.estimate - self.closed_form) / self.stderr


def _z_check(name: str, est: McEstimate, ref: float) -> Check:
    z = est.z_score(ref)
    return Check(name, ref, est.value, est.stderr, bool(abs(z) <= Z_LIMIT), f"|z| <= {Z_LIMIT:g}")


def _abs_check(name: str, est: float, ref: float, tol: float) -> Check:
    return Check(name, ref, est, 0.0, bool(abs(est - ref) <= tol), f"|diff| <= {tol:g}")


def cross_validation_matrix(scn: Scenario, seed: int, n_samples: int | None = None) -> list[Check]:
    """Every closed form with a Monte-Carlo counterpart, at the scenario's parameters."""
    cfg: RunConfig = scn.config
    n = n_samples or cfg.montecarlo.n_samples
    ss = np.random.SeedSequence(seed)
    s_bi, s_jit, s_fr0, s_fr1, s_mi0, s_mi1, s_adv = ss.spawn(7)
    mo = scn.moments
    g0 = scn.gamma0.matrix
    det = cfg.detector_params()
    ip = cfg.interferometer_params()
    src = cfg.source_params()
    checks: list[Check] = []

    # Source covariance.
    bi = sample_biphoton(mo, n, s_bi)
    rows = bi.as_matrix()
    labels = ("t_S", "w_S", "t_I", "w_I")
    for i, j in ((0, 0), (0, 2), (2, 2), (1, 1), (1, 3), (3, 3)):
        checks.append(_z_check(f"gamma0[{labels[i]},{labels[j]}]", covariance_estimate(rows[i], rows[j]), g0[i, j]))
    t_minus = bi.t_s - bi.t_i
    t_plus = (bi.t_s + bi.t_i) / 2.0
    checks.append(_z_check("var(t_-)", covariance_estimate(t_minus, t_minus), mo.sigma_cor**2))
    checks.append(_z_check("var(t_+)", covariance_estimate(t_plus, t_plus), mo.sigma_coh**2))

    # Visibilities.
    v_w0 = 1.0 / (4.0 * mo.sigma_coh**2)
    checks.append(
        _z_check("V_FI", mc_visibility(bi, ip.delta_t, InterferometerKind.FRANSON), franson_visibility_gaussian(v_w0, ip.delta_t))
    )
    checks.append(
        _z_check(
            "V_CFI",
            mc_visibility(bi, ip.delta_omega, InterferometerKind.CONJUGATE_FRANSON),
            cfi_visibility_gaussian(mo.sigma_cor**2, ip.delta_omega),
        )
    )

    # Jitter statistics.
    rng = np.random.default_rng(s_jit)
    sj = det.timing_jitter / FWHM_TO_RMS
    jd = rng.normal(0.0, sj, n) - rng.normal(0.0, sj, n)
    checks.append(_z_check("jitter 4th moment", mean_estimate(jd**4), jitter_fourth_moment_time(det.timing_jitter)))
    jittered = t_minus + jd
    checks.append(
        _z_check(
            "raw-timing xi_t",
            covariance_estimate(jittered, jittered),
            (1.0 + raw_time_excess(det.timing_jitter, mo.sigma_cor)) * mo.sigma_cor**2,
        )
    )

    # Lemma inequality on adversarial heavy-tailed samples.
    adv = np.random.default_rng(s_adv)
    x = np.concatenate([adv.standard_t(5, n // 2) * 3e9, adv.uniform(-4e10, 4e10, n - n // 2)])
    gap = lemma_inequality_gap(x, ip.delta_t)
    checks.append(Check("lemma inequality (slack >= 0)", 0.0, gap, 0.0, bool(gap >= 0.0), "slack >= 0"))

    # Channel statistics and event-1 covariance.
    p_d = dark_prob(det.dark_rate, src.frame_duration)
    for tag, dist, frames, stream in (("0 km", 0.0, FRAMES_NEAR, s_fr0), (f"{FAR_DISTANCE_KM:g} km", FAR_DISTANCE_KM, FRAMES_FAR, s_fr1)):
        link = cfg.link_params(dist)
        ev = event_probabilities(src.mean_pairs_per_frame, det.efficiency_alice, det.efficiency_bob * link.transmissivity, p_d)
        sim = simulate_frames(src, det, link, frames, stream, scn.gamma_mi)
        checks.append(_z_check(f"p_r @ {tag}", sim.p_r, ev.p_r))
        for k, (est, ref) in enumerate(zip(sim.P, ev.weights), start=1):
            checks.append(_z_check(f"P{k} @ {tag}", est, ref))
        checks.append(_z_check(f"F @ {tag}", sim.F, ev.F))
        if dist == 0.0:
            lam = build_mixture(scn.gamma_mi, det, ev, src.frame_duration).lam
            c = sim.event == 1
            for (i, j), (a, b) in (((0, 0), (sim.t_a, sim.t_a)), ((0, 1), (sim.t_a, sim.t_b)), ((1, 1), (sim.t_b, sim.t_b))):
                checks.append(_z_check(f"Lambda[{i},{j}] @ {tag}", covariance_estimate(a[c], b[c]), lam[i, j]))

    # Plug-in MI: continuous closed form at moderate correlation, and the
    # exactly discretized Gaussian at the scenario's own event-1 correlation.
    for rho, stream, tag in ((MI_MODERATE_RHO, s_mi0, "rho=0.9"), (None, s_mi1, "event-1")):
        if rho is None:
            ev0 = event_probabilities(src.mean_pairs_per_frame, det.efficiency_alice, det.efficiency_bob, p_d)
            mix = build_mixture(scn.gamma_mi, det, ev0, src.frame_duration)
            lam = np.array(mix.lam)
            rho = mix.correlation
        else:
            lam = np.array([[1.0, rho], [rho, 1.0]])
        bins = cfg.montecarlo.mi_bins
        xa, xb = sample_gaussian_pair(lam, MI_SAMPLES, stream)
        edges = (gaussian_quantile_edges(lam[0, 0], bins), gaussian_quantile_edges(lam[1, 1], bins))
        est = binned_mutual_information(xa, xb, bins, edges)
        if tag == "rho=0.9":
            checks.append(_abs_check(f"binned MI vs Gaussian ({tag})", est, gaussian_mutual_information(rho), MI_TOL_BITS))
        else:
            checks.append(_abs_check(f"binned MI vs discretized Gaussian ({tag})", est, discretized_gaussian_mi(rho, bins), MI_TOL_BITS))
    return checks


def format_matrix(checks: list[Check]) -> str:
    lines = [f"{'check':<40} {'closed form':>14} {'estimate':>14} {'z':>7}  result"]
    for c in checks:
        z = "" if math.isnan(c.z) else f"{c.z:7.2f}"
        lines.append(f"{c.name:<40} {c.closed_form:14.6g} {c.estimate:14.6g} {z:>7}  {'PASS' if c.passed else 'FAIL'} ({c.criterion})")
    return "\n".join(lines)
