"""Seeded sampling oracles for the closed forms in the other modules."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import ndtr, ndtri

from .channel import LinkParams, dark_prob
from .errors import DomainError
from .interferometry import DetectorParams, InterferometerKind
from .source import FWHM_TO_RMS, SourceMoments, SourceParams
from .tfcm import TFCM

# Frames are simulated in fixed-size chunks, each with its own spawned substream,
# so results depend only on (seed, n_frames).
FRAME_CHUNK = 1 << 24
MIN_VISIBILITY_SAMPLES = 1000


@dataclass(frozen=True)
class McConfig:
    seed: int
    n_samples: int = 1_000_000
    n_frames: int = 10_000_000
    scenario: str = "visibility"

    def __post_init__(self):
        if self.n_samples < 1 or self.n_frames < 1:
            raise DomainError("sample and frame counts must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer", field="seed")
        if self.scenario not in ("visibility", "frames", "mixture"):
            raise DomainError(f"unknown scenario {self.scenario!r}", field="scenario")


@dataclass(frozen=True)
class BiphotonSamples:
    t_s: np.ndarray
    t_i: np.ndarray
    w_s: np.ndarray
    w_i: np.ndarray

    def as_matrix(self) -> np.ndarray:
        """Rows ordered (t_S, w_S, t_I, w_I)."""
        return np.vstack([self.t_s, self.w_s, self.t_i, self.w_i])


@dataclass(frozen=True)
class McEstimate:
    value: float
    stderr: float

    def z_score(self, reference: float) -> float:
        if self.stderr == 0:
            return 0.0 if self.value == reference else math.inf
        return (self.value - reference) / self.stderr


def _seed_sequence(seed) -> np.random.SeedSequence:
    return seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(_seed_sequence(seed))


def sample_biphoton(moments: SourceMoments, n: int, seed) -> BiphotonSamples:
    """Gaussian samples whose covariance converges to the nominal TFCM.

    Sum and difference coordinates are independent:
    t_+ ~ N(0, s_coh^2), t_- ~ N(0, s_cor^2), w_+ ~ N(0, 1/4 s_cor^2),
    w_- ~ N(0, 1/4 s_coh^2), with t_S,I = t_+ +- t_-/2 and likewise for w.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    rng = _rng(seed)
    z = rng.standard_normal((4, n))
    t_plus = moments.sigma_coh * z[0]
    t_minus = moments.sigma_cor * z[1]
    w_plus = z[2] / (2.0 * moments.sigma_cor)
    w_minus = z[3] / (2.0 * moments.sigma_coh)
    return BiphotonSamples(
        t_s=t_plus + t_minus / 2.0,
        t_i=t_plus - t_minus / 2.0,
        w_s=w_plus + w_minus / 2.0,
        w_i=w_plus - w_minus / 2.0,
    )


def add_jitter(t: np.ndarray, timing_jitter: float, rng: np.random.Generator) -> np.ndarray:
    return t + rng.normal(0.0, timing_jitter / FWHM_TO_RMS, size=t.shape)


def mean_estimate(x) -> McEstimate:
    x = np.asarray(x, dtype=float)
    se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else math.inf
    return McEstimate(float(x.mean()), se)


def mc_visibility(samples: BiphotonSamples, setting: float, kind: InterferometerKind) -> McEstimate:
    """Sample mean of cos(x * setting) with its standard error.

    x is w_S - w_I for a Franson reading (setting = Delta_T) and t_S - t_I
    for a conjugate-Franson reading (setting = Delta_Omega).
    """
    if samples.t_s.size < MIN_VISIBILITY_SAMPLES:
        raise DomainError(f"need at least {MIN_VISIBILITY_SAMPLES} samples")
    if kind is InterferometerKind.FRANSON:
        x = samples.w_s - samples.w_i
    else:
        x = samples.t_s - samples.t_i
    return mean_estimate(np.cos(x * setting))


def covariance_estimate(x: np.ndarray, y: np.ndarray) -> McEstimate:
    """Sample covariance with the Gaussian-free standard error sd((x-mx)(y-my))/sqrt(n)."""
    prod = (x - x.mean()) * (y - y.mean())
    return McEstimate(float(prod.sum() / (x.size - 1)), float(prod.std(ddof=1) / math.sqrt(x.size)))


@dataclass(frozen=True)
class FrameSimulation:
    """Empirical postselection statistics and arrival-time records.

    ``counts[k]`` is the number of postselected frames of event type k + 1;
    ``single_pair`` counts postselected frames that held exactly one pair.
    Times are relative to the frame center.
    """

    n_frames: int
    counts: np.ndarray
    single_pair: int
    t_a: np.ndarray
    t_b: np.ndarray
    event: np.ndarray

    @property
    def n_postselected(self) -> int:
        return int(self.counts.sum())

    @property
    def p_r(self) -> McEstimate:
        p = self.n_postselected / self.n_frames
        return McEstimate(p, math.sqrt(p * (1.0 - p) / self.n_frames))

    def _fraction(self, k: int) -> McEstimate:
        n = self.n_postselected
        if n == 0:
            return McEstimate(math.nan, math.inf)
        p = k / n
        return McEstimate(p, math.sqrt(max(p * (1.0 - p), 1.0 / n) / n))

    @property
    def P(self) -> list[McEstimate]:
        return [self._fraction(int(c)) for c in self.counts]

    @property
    def F(self) -> McEstimate:
        return self._fraction(self.single_pair)

    def dump_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["event", "t_A_s", "t_B_s"])
            for e, a, b in zip(self.event.tolist(), self.t_a.tolist(), self.t_b.tolist()):
                w.writerow([e, repr(a), repr(b)])


def _truncated_poisson(mu: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Pair numbers conditioned on n >= 1, by inversion of the conditional CDF."""
    if size == 0:
        return np.zeros(0, dtype=np.int64)
    n = np.arange(1, 65)
    logp = n * math.log(mu) - mu - np.cumsum(np.log(n))
    pmf = np.exp(logp)
    cdf = np.cumsum(pmf) / -math.expm1(-mu)
    cdf[-1] = 1.0
    return 1 + np.searchsorted(cdf, rng.random(size), side="right")


def _frame_chunk(
    n: int,
    mu: float,
    eta_a: float,
    eta_b: float,
    p_d: float,
    lam_src: np.ndarray,
    det: DetectorParams,
    frame_duration: float,
    rng: np.random.Generator,
):
    # Each frame falls in one of eight cells: (has pairs, Alice dark, Bob dark).
    q = -math.expm1(-mu)
    cells = []
    for has_pair in (0, 1):
        for da in (0, 1):
            for db in (0, 1):
                cells.append((q if has_pair else 1 - q) * (p_d if da else 1 - p_d) * (p_d if db else 1 - p_d))
    counts = rng.multinomial(n, cells)
    pairs, dark_a, dark_b = [], [], []
    for idx, c in enumerate(counts):
        if c == 0:
            continue
        has_pair, da, db = idx >> 2 & 1, idx >> 1 & 1, idx & 1
        if not has_pair and not (da and db):
            continue  # no pairs and at most one dark count: never postselected
        pairs.append(_truncated_poisson(mu, int(c), rng) if has_pair else np.zeros(int(c), dtype=np.int64))
        dark_a.append(np.full(int(c), bool(da)))
        dark_b.append(np.full(int(c), bool(db)))
    if not pairs:
        return np.zeros(5, dtype=np.int64), 0, np.zeros(0), np.zeros(0), np.zeros(0, dtype=np.int8)
    npairs = np.concatenate(pairs)
    dark_a = np.concatenate(dark_a)
    dark_b = np.concatenate(dark_b)
    ph_a = rng.binomial(npairs, eta_a) > 0
    ph_b = rng.binomial(npairs, eta_b) > 0
    keep = (ph_a | dark_a) & (ph_b | dark_b)
    npairs, dark_a, dark_b, ph_a, ph_b = npairs[keep], dark_a[keep], dark_b[keep], ph_a[keep], ph_b[keep]

    event = np.full(npairs.size, 2, dtype=np.int8)
    event[(npairs == 1) & ph_a & ph_b & ~dark_a & ~dark_b] = 1
    event[ph_a & ~ph_b] = 3
    event[~ph_a & ph_b] = 4
    event[~ph_a & ~ph_b] = 5
    ev_counts = np.bincount(event, minlength=6)[1:].astype(np.int64)
    single = int(np.count_nonzero(npairs == 1))

    # Arrival times: correlated draw for event 1; otherwise the photon side is
    # resampled from its own Gaussian and a dark-only side is uniform in the frame.
    m = event.size
    sd_a = math.sqrt(lam_src[0, 0])
    sd_b = math.sqrt(lam_src[1, 1])
    z = rng.standard_normal((2, m))
    t_a = sd_a * z[0]
    t_b = sd_b * z[1]
    corr = event == 1
    if corr.any():
        chol = np.linalg.cholesky(lam_src)
        t_a[corr] = chol[0, 0] * z[0, corr]
        t_b[corr] = chol[1, 0] * z[0, corr] + chol[1, 1] * z[1, corr]
    uni_a = ~ph_a
    uni_b = ~ph_b
    t_a[uni_a] = rng.uniform(-frame_duration / 2, frame_duration / 2, size=int(uni_a.sum()))
    t_b[uni_b] = rng.uniform(-frame_duration / 2, frame_duration / 2, size=int(uni_b.sum()))
    jit = det.timing_jitter / FWHM_TO_RMS
    t_a = t_a + rng.normal(0.0, jit, size=m)
    t_b = t_b + rng.normal(0.0, jit, size=m)
    return ev_counts, single, t_a, t_b, event


def simulate_frames(
    source: SourceParams,
    det: DetectorParams,
    link: LinkParams,
    n_frames: int,
    seed,
    gamma: TFCM,
) -> FrameSimulation:
    """Frame-by-frame protocol simulation (exact in distribution, sparse in cost).

    Only frames that hold pairs or two dark counts are materialized; the
    rest cannot be postselected.  ``gamma`` supplies the arrival-time block
    (before jitter) for photon detections.
    """
    if n_frames < 1:
        raise DomainError("n_frames must be >= 1")
    mu = source.mean_pairs_per_frame
    eta_a = det.efficiency_alice
    eta_b = det.efficiency_bob * link.transmissivity
    p_d = dark_prob(det.dark_rate, source.frame_duration)
    g = gamma.matrix
    lam_src = np.array([[g[0, 0], g[0, 2]], [g[2, 0], g[2, 2]]])
    n_chunks = -(-n_frames // FRAME_CHUNK)
    streams = _seed_sequence(seed).spawn(n_chunks)
    counts = np.zeros(5, dtype=np.int64)
    single = 0
    ta, tb, ev = [], [], []
    for k, ss in enumerate(streams):
        n = min(FRAME_CHUNK, n_frames - k * FRAME_CHUNK)
        c, s, a, b, e = _frame_chunk(n, mu, eta_a, eta_b, p_d, lam_src, det, source.frame_duration, np.random.default_rng(ss))
        counts += c
        single += s
        ta.append(a)
        tb.append(b)
        ev.append(e)
    return FrameSimulation(
        n_frames=int(n_frames),
        counts=counts,
        single_pair=single,
        t_a=np.concatenate(ta),
        t_b=np.concatenate(tb),
        event=np.concatenate(ev),
    )


def sample_gaussian_pair(lam: np.ndarray, n: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """n draws of a zero-mean bivariate Gaussian with covariance ``lam``."""
    rng = _rng(seed)
    x = rng.multivariate_normal(np.zeros(2), np.asarray(lam, dtype=float), size=n, method="cholesky")
    return x[:, 0], x[:, 1]


def binned_mutual_information(x, y, bins: int = 64, edges=None) -> float:
    """Plug-in MI (bits) from a bins x bins histogram.

    By default the edges are empirical quantiles, so each marginal bin holds
    about the same number of samples.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if edges is None:
        qs = np.linspace(0.0, 1.0, bins + 1)
        edges = (np.quantile(x, qs), np.quantile(y, qs))
    h, _, _ = np.histogram2d(x, y, bins=edges)
    p = h / h.sum()
    px = p.sum(axis=1, keepdims=True)
    py = p.sum(axis=0, keepdims=True)
    nz = p > 0
    return float(np.sum(p[nz] * np.log2(p[nz] / (px * py)[nz])))


def gaussian_quantile_edges(var: float, bins: int) -> np.ndarray:
    """Equiprobable bin edges of N(0, var), with finite outer edges at 40 sd."""
    e = math.sqrt(var) * ndtri(np.linspace(0.0, 1.0, bins + 1))
    e[0], e[-1] = -40.0 * math.sqrt(var), 40.0 * math.sqrt(var)
    return e


def discretized_gaussian_mi(rho: float, bins: int = 64, nodes: int = 64) -> float:
    """Exact MI (bits) of a standard bivariate Gaussian after equiprobable binning.

    Cell probabilities are integrated over x by Gauss-Legendre per bin of
    the conditional normal CDF in y.
    """
    edges = ndtri(np.linspace(0.0, 1.0, bins + 1))
    edges[0], edges[-1] = -12.0, 12.0
    s = math.sqrt(1.0 - rho * rho)
    gx, gw = np.polynomial.legendre.leggauss(nodes)
    cells = np.empty((bins, bins))
    for i in range(bins):
        a, b = edges[i], edges[i + 1]
        x = 0.5 * (b - a) * gx + 0.5 * (a + b)
        w = 0.5 * (b - a) * gw * np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
        cdf = ndtr((edges[None, :] - rho * x[:, None]) / s)
        cells[i] = w @ np.diff(cdf, axis=1)
    cells = np.clip(cells, 0.0, None)
    cells /= cells.sum()
    px = cells.sum(axis=1, keepdims=True)
    py = cells.sum(axis=0, keepdims=True)
    nz = cells > 0
    return float(np.sum(cells[nz] * np.log2(cells[nz] / (px * py)[nz])))
