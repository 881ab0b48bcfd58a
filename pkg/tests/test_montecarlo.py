import csv
import math

import numpy as np
import pytest

from hdqkd.channel import LinkParams, event_probabilities, dark_prob
from hdqkd.config import builtin_config
from hdqkd.errors import DomainError
from hdqkd.interferometry import (
    DetectorParams,
    InterferometerKind,
    cfi_visibility_gaussian,
    franson_visibility_gaussian,
)
from hdqkd.montecarlo import (
    McConfig,
    McEstimate,
    binned_mutual_information,
    covariance_estimate,
    discretized_gaussian_mi,
    mc_visibility,
    sample_biphoton,
    sample_gaussian_pair,
    simulate_frames,
)
from hdqkd.pipeline import build_scenario
from hdqkd.rate import gaussian_mutual_information
from hdqkd.source import SourceParams
from hdqkd.validation import cross_validation_matrix, format_matrix

SRC = SourceParams(480e-12, 200e9, 0.01)
DET = DetectorParams(timing_jitter=30e-12, efficiency_alice=0.15, efficiency_bob=0.15, dark_rate=1e3, gate=108e-12)


def test_samples_reproducible(moments16):
    a = sample_biphoton(moments16, 1000, 7)
    b = sample_biphoton(moments16, 1000, 7)
    c = sample_biphoton(moments16, 1000, 8)
    assert np.array_equal(a.as_matrix(), b.as_matrix())
    assert not np.array_equal(a.as_matrix(), c.as_matrix())


def test_sample_covariance_matches_nominal(moments16, gamma16):
    s = sample_biphoton(moments16, 400_000, 3)
    x = s.as_matrix()
    g = gamma16.matrix
    for i in range(4):
        for j in range(i, 4):
            est = covariance_estimate(x[i], x[j])
            if g[i, j] == 0:
                assert abs(est.value) < 4 * est.stderr
            else:
                assert abs(est.z_score(g[i, j])) < 4


def test_visibility_estimates(moments16):
    s = sample_biphoton(moments16, 200_000, 11)
    dt = 152.735e-12
    dw = 2 * math.pi * 5e9
    fi = mc_visibility(s, dt, InterferometerKind.FRANSON)
    ref = franson_visibility_gaussian(1 / (4 * moments16.sigma_coh**2), dt)
    assert abs(fi.z_score(ref)) < 4
    cfi = mc_visibility(s, dw, InterferometerKind.CONJUGATE_FRANSON)
    assert abs(cfi.value - cfi_visibility_gaussian(moments16.sigma_cor**2, dw)) < 1e-3
    with pytest.raises(DomainError):
        mc_visibility(sample_biphoton(moments16, 10, 1), dt, InterferometerKind.FRANSON)


def test_estimate_z_score():
    assert McEstimate(1.0, 0.0).z_score(1.0) == 0.0
    assert McEstimate(1.0, 0.0).z_score(2.0) == math.inf
    assert McEstimate(1.0, 0.5).z_score(2.0) == -2.0


def test_config_validation():
    with pytest.raises(DomainError):
        McConfig(seed=-1)
    with pytest.raises(DomainError):
        McConfig(seed=1, n_frames=0)
    with pytest.raises(DomainError):
        McConfig(seed=1, scenario="other")


def test_frames_match_closed_form(gamma16):
    link = LinkParams(20.0)
    sim = simulate_frames(SRC, DET, link, 4_000_000, 5, gamma16)
    ev = event_probabilities(SRC.mean_pairs_per_frame, 0.15, 0.15 * link.transmissivity, dark_prob(1e3, 480e-12))
    assert abs(sim.p_r.z_score(ev.p_r)) < 4
    for est, ref in zip(sim.P, ev.weights):
        assert abs(est.z_score(ref)) < 4
    assert abs(sim.F.z_score(ev.F)) < 4


def test_frames_reproducible(gamma16):
    a = simulate_frames(SRC, DET, LinkParams(0.0), 100_000, 9, gamma16)
    b = simulate_frames(SRC, DET, LinkParams(0.0), 100_000, 9, gamma16)
    assert np.array_equal(a.counts, b.counts)
    assert np.array_equal(a.t_a, b.t_a)


def test_no_light_no_darks_no_frames(gamma16):
    src = SourceParams(480e-12, 200e9, 0.0)
    det = DetectorParams(timing_jitter=30e-12, dark_rate=0.0)
    sim = simulate_frames(src, det, LinkParams(0.0), 10_000, 1, gamma16)
    assert sim.p_r.value == 0.0
    assert sim.n_postselected == 0
    assert math.isnan(sim.F.value)


def test_dump_csv(tmp_path, gamma16):
    sim = simulate_frames(SRC, DET, LinkParams(0.0), 200_000, 2, gamma16)
    path = tmp_path / "frames.csv"
    sim.dump_csv(path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["event", "t_A_s", "t_B_s"]
    assert len(rows) - 1 == sim.n_postselected
    assert {r[0] for r in rows[1:]} <= {"1", "2", "3", "4", "5"}
    assert float(rows[1][1]) == sim.t_a[0]


def test_event1_times_carry_source_correlation(gamma16):
    sim = simulate_frames(SRC, DET, LinkParams(0.0), 2_000_000, 4, gamma16)
    e1 = sim.event == 1
    dt = sim.t_a[e1] - sim.t_b[e1]
    jv = (30e-12 / 2.35) ** 2
    g = gamma16.matrix
    ref = g[0, 0] + g[2, 2] - 2 * g[0, 2] + 2 * jv
    n = dt.size
    assert abs(dt.var() - ref) < 4 * math.sqrt(2 / n) * ref


def test_binned_mi_moderate_correlation():
    x, y = sample_gaussian_pair(np.array([[1.0, 0.9], [0.9, 1.0]]), 1_000_000, 6)
    assert binned_mutual_information(x, y, 64) == pytest.approx(gaussian_mutual_information(0.9), abs=0.05)


def test_binned_mi_against_discretized_oracle():
    rho = 0.99
    x, y = sample_gaussian_pair(np.array([[1.0, rho], [rho, 1.0]]), 1_000_000, 8)
    assert binned_mutual_information(x, y, 64) == pytest.approx(discretized_gaussian_mi(rho, 64), abs=0.02)
    # Discretization only loses information.
    assert discretized_gaussian_mi(rho, 64) < gaussian_mutual_information(rho)
    assert discretized_gaussian_mi(0.0, 16) == pytest.approx(0.0, abs=1e-9)


@pytest.fixture(scope="module")
def default_scenario():
    return build_scenario(builtin_config("default"))


def test_validation_matrix_passes(default_scenario):
    checks = cross_validation_matrix(default_scenario, 20240601, n_samples=300_000)
    table = format_matrix(checks)
    failed = [c.name for c in checks if not c.passed]
    assert not failed, table
    assert len(checks) >= 20
