"""Second-order statistics of the Gaussian biphoton source."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

FWHM_TO_RMS = math.sqrt(8.0 * math.log(2.0))  # 2.3548...
# Ratio sigma_coh / sigma_cor below which multi-bit operation is doubtful.
MIN_SCHMIDT_RATIO = 4.0


@dataclass(frozen=True)
class SourceParams:
    """Protocol-level description of the SPDC source.

    Attributes
    ----------
    frame_duration : float
        Frame duration T_f in seconds (FWHM coherence time of the pump pulse).
    phase_matching_bandwidth : float
        FWHM phase-matching bandwidth B_PM in Hz.
    mean_pairs_per_frame : float
        Poisson mean mu of pairs emitted per frame.
    """

    frame_duration: float
    phase_matching_bandwidth: float
    mean_pairs_per_frame: float = 0.0

    @property
    def frame_period(self) -> float:
        """Frames occur once every 3 T_f."""
        return 3.0 * self.frame_duration

    def frame_center(self, m: int) -> float:
        return 3.0 * m * self.frame_duration


@dataclass(frozen=True)
class SourceMoments:
    sigma_coh: float
    sigma_cor: float

    @property
    def t_norm(self) -> float:
        """Normalization time that equalizes dimensionless t and omega spreads."""
        return math.sqrt(2.0 * self.sigma_coh * self.sigma_cor)

    @property
    def schmidt_ratio(self) -> float:
        return self.sigma_coh / self.sigma_cor


def derive_moments(params: SourceParams) -> SourceMoments:
    """RMS coherence and correlation times of the biphoton.

    sigma_coh = T_f / sqrt(8 ln 2) and sigma_cor = sqrt(2 ln 2) / (2 pi B_PM).
    """
    if not params.frame_duration > 0:
        raise DomainError(
            f"frame_duration must be positive, got {params.frame_duration!r}",
            field="frame_duration",
        )
    if not params.phase_matching_bandwidth > 0:
        raise DomainError(
            f"phase_matching_bandwidth must be positive, got {params.phase_matching_bandwidth!r}",
            field="phase_matching_bandwidth",
        )
    if params.mean_pairs_per_frame < 0:
        raise DomainError(
            f"mean_pairs_per_frame must be >= 0, got {params.mean_pairs_per_frame!r}",
            field="mean_pairs_per_frame",
        )
    sigma_coh = params.frame_duration / FWHM_TO_RMS
    sigma_cor = math.sqrt(2.0 * math.log(2.0)) / (2.0 * math.pi * params.phase_matching_bandwidth)
    moments = SourceMoments(sigma_coh=sigma_coh, sigma_cor=sigma_cor)
    if moments.schmidt_ratio < MIN_SCHMIDT_RATIO:
        warnings.warn(
            f"sigma_coh/sigma_cor = {moments.schmidt_ratio:.3g} < {MIN_SCHMIDT_RATIO}; "
            "the source cannot support multiple bits per coincidence",
            RuntimeWarning,
            stacklevel=2,
        )
    return moments


def nominal_tfcm(moments: SourceMoments):
    """TFCM of the undisturbed biphoton, ordering (t_S, w_S, t_I, w_I)."""
    from .tfcm import TFCM, FamilyParams

    s_coh2 = moments.sigma_coh**2
    s_cor2 = moments.sigma_cor**2
    t_var = s_cor2 / 4.0 + s_coh2
    t_cov = s_coh2 - s_cor2 / 4.0
    w_var = 1.0 / (4.0 * s_cor2) + 1.0 / (16.0 * s_coh2)
    w_cov = 1.0 / (4.0 * s_cor2) - 1.0 / (16.0 * s_coh2)
    m = np.array(
        [
            [t_var, 0.0, t_cov, 0.0],
            [0.0, w_var, 0.0, w_cov],
            [t_cov, 0.0, t_var, 0.0],
            [0.0, w_cov, 0.0, w_var],
        ]
    )
    # Gamma0 is the zero-parameter member of the attack family.
    return TFCM(m, moments, family=FamilyParams())
