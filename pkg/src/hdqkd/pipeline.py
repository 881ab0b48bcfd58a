"""End-to-end evaluation: visibilities -> excess noise -> chi^UB -> I(A;B) -> SKR."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .channel import dark_prob, event_probabilities
from .config import RunConfig
from .errors import DomainError, NumericalError
from .holevo import HolevoResult, holevo_upper_bound
from .interferometry import (
    InterferometerKind,
    VisibilityReading,
    cfi_visibility_gaussian,
    excess_noise,
    franson_visibility_gaussian,
    jitter_fourth_moment_freq,
    jitter_fourth_moment_time,
    lemma1_bound,
    lemma2_bound,
    raw_time_excess,
)
from .rate import RateBreakdown, build_mixture, mi_tfcm, secure_key_rate, shannon_information
from .source import SourceMoments, derive_moments, nominal_tfcm
from .tfcm import TFCM, NoiseBounds, nominal_difference_variances

CSV_COLUMNS = (
    "distance_km",
    "eta_P",
    "p_r",
    "F",
    "xi_t",
    "xi_omega",
    "I_AB_bits",
    "chi_UB_bits",
    "bits_per_frame",
    "SKR_bps",
    "PIE_bits",
    "clamped",
    "error",
)


@dataclass(frozen=True)
class NoiseReport:
    """Visibilities and the excess-noise factors they imply.

    ``xi_t`` / ``xi_w`` are the unclamped values used in the constraint set;
    the ``*_clamped`` fields are floored at zero for display.
    """

    v_fi_ideal: float
    v_cfi_ideal: float
    v_fi: float
    v_cfi: float
    xi_w: float
    xi_w_clamped: float
    xi_t_cfi: float
    xi_t_raw_timing: float
    xi_t: float
    xi_t_clamped: float
    xi_t_source: str

    @property
    def bounds(self) -> NoiseBounds:
        return NoiseBounds(self.xi_t, self.xi_w)


def noise_report(cfg: RunConfig, moments: SourceMoments | None = None) -> NoiseReport:
    moments = moments or derive_moments(cfg.source_params())
    det = cfg.detector_params()
    ip = cfg.interferometer_params()
    nz = cfg.noise
    v_t0, v_w0 = nominal_difference_variances(moments)
    v_fi_ideal = franson_visibility_gaussian(v_w0, ip.delta_t)
    v_cfi_ideal = cfi_visibility_gaussian(v_t0, ip.delta_omega)
    v_fi = v_fi_ideal * nz.visibility_multiplier if nz.franson_visibility is None else nz.franson_visibility
    v_cfi = v_cfi_ideal * nz.visibility_multiplier if nz.cfi_visibility is None else nz.cfi_visibility
    m4_w = nz.fourth_moment_freq_rad4_per_s4
    if m4_w is None:
        m4_w = jitter_fourth_moment_freq(det.timing_jitter, ip.beta2)
    m4_t = nz.fourth_moment_time_s4
    if m4_t is None:
        m4_t = jitter_fourth_moment_time(det.timing_jitter)

    xi_w = excess_noise(lemma1_bound(VisibilityReading(InterferometerKind.FRANSON, v_fi, ip.delta_t), m4_w), v_w0)
    if nz.xi_omega_override is not None:
        xi_w = excess_noise((1.0 + nz.xi_omega_override) * v_w0, v_w0)
    xi_cfi = excess_noise(
        lemma2_bound(VisibilityReading(InterferometerKind.CONJUGATE_FRANSON, v_cfi, ip.delta_omega), m4_t), v_t0
    )
    xi_raw = raw_time_excess(det.timing_jitter, moments.sigma_cor)
    xi_t = {"cfi": xi_cfi.raw, "raw": xi_raw, "override": nz.xi_t_override}[nz.xi_t_source]
    return NoiseReport(
        v_fi_ideal=v_fi_ideal,
        v_cfi_ideal=v_cfi_ideal,
        v_fi=v_fi,
        v_cfi=v_cfi,
        xi_w=xi_w.raw,
        xi_w_clamped=xi_w.clamped,
        xi_t_cfi=xi_cfi.raw,
        xi_t_raw_timing=xi_raw,
        xi_t=xi_t,
        xi_t_clamped=max(0.0, xi_t),
        xi_t_source=nz.xi_t_source,
    )


@dataclass(frozen=True)
class Scenario:
    """Distance-independent part of the pipeline, computed once per config."""

    config: RunConfig
    moments: SourceMoments
    gamma0: TFCM
    noise: NoiseReport
    holevo: HolevoResult
    gamma_mi: TFCM | None

    @property
    def aborted(self) -> bool:
        return self.holevo.aborted


def build_scenario(cfg: RunConfig) -> Scenario:
    moments = derive_moments(cfg.source_params())
    gamma0 = nominal_tfcm(moments)
    noise = noise_report(cfg, moments)
    opt = cfg.optimizer
    h = holevo_upper_bound(
        gamma0, noise.bounds, grid_points=opt.grid_points, refine_starts=opt.refine_starts, tol=opt.tol_bits
    )
    gamma_mi = None
    if not h.aborted:
        gamma_mi = mi_tfcm(gamma0, h.gamma_star, noise.bounds, cfg.protocol.mi_model)
    return Scenario(cfg, moments, gamma0, noise, h, gamma_mi)


def evaluate_point(scn: Scenario, distance_km: float) -> RateBreakdown:
    """Full rate breakdown at one distance; raises on abort or bad input."""
    cfg = scn.config
    if scn.aborted:
        raise DomainError(f"protocol abort: {scn.holevo.reason}", field="noise")
    src = cfg.source_params()
    det = cfg.detector_params()
    link = cfg.link_params(distance_km)
    eta_p = link.transmissivity
    p_d = dark_prob(det.dark_rate, src.frame_duration)
    ev = event_probabilities(src.mean_pairs_per_frame, det.efficiency_alice, det.efficiency_bob * eta_p, p_d)
    mix = build_mixture(scn.gamma_mi, det, ev, src.frame_duration)
    i_ab = shannon_information(mix)
    r = secure_key_rate(cfg.protocol_params(), ev, i_ab, scn.holevo.chi, src.frame_duration)
    r.extras.update(
        distance_km=float(distance_km),
        eta_P=eta_p,
        xi_t=scn.noise.xi_t,
        xi_omega=scn.noise.xi_w,
        events=ev,
    )
    return r


def row_from_breakdown(r: RateBreakdown) -> dict:
    x = r.extras
    return {
        "distance_km": x["distance_km"],
        "eta_P": x["eta_P"],
        "p_r": r.p_r,
        "F": r.F,
        "xi_t": x["xi_t"],
        "xi_omega": x["xi_omega"],
        "I_AB_bits": r.I_AB,
        "chi_UB_bits": r.chi_UB,
        "bits_per_frame": r.bits_per_frame,
        "SKR_bps": r.SKR,
        "PIE_bits": r.PIE,
        "clamped": r.clamped,
        "error": "",
    }


def _error_row(scn: Scenario, distance_km: float, exc: Exception) -> dict:
    row = {k: math.nan for k in CSV_COLUMNS}
    row.update(distance_km=float(distance_km), xi_t=scn.noise.xi_t, xi_omega=scn.noise.xi_w, clamped=False)
    try:
        row["eta_P"] = scn.config.link_params(distance_km).transmissivity
    except DomainError:
        pass
    if not scn.aborted:
        row["chi_UB_bits"] = scn.holevo.chi
    row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def sweep_row(scn: Scenario, distance_km: float) -> dict:
    try:
        return row_from_breakdown(evaluate_point(scn, distance_km))
    except (DomainError, NumericalError) as exc:
        return _error_row(scn, distance_km, exc)


def _worker(args):
    scn, d = args
    return sweep_row(scn, d)


def thread_cap() -> int:
    env = os.environ.get("HDQKD_THREADS")
    cpus = os.cpu_count() or 1
    if env:
        try:
            return max(1, min(int(env), cpus))
        except ValueError:
            raise DomainError(f"HDQKD_THREADS must be an integer, got {env!r}", field="HDQKD_THREADS") from None
    return cpus


def sweep(scn: Scenario, distances: list[float], workers: int | None = None) -> list[dict]:
    """One CSV-ready row per distance, in input order; failures land in the ``error`` column."""
    distances = [float(d) for d in distances]
    if distances != sorted(distances):
        raise DomainError("distances must be sorted ascending", field="distances_km")
    workers = thread_cap() if workers is None else workers
    if workers <= 1 or len(distances) <= 1:
        return [sweep_row(scn, d) for d in distances]
    with ProcessPoolExecutor(max_workers=min(workers, len(distances))) as pool:
        return list(pool.map(_worker, [(scn, d) for d in distances]))
