import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hdqkd.errors import DomainError
from hdqkd.source import SourceParams, derive_moments, nominal_tfcm
from hdqkd.tfcm import difference_variances, is_physical


def test_moments_480ps():
    m = derive_moments(SourceParams(480e-12, 200e9))
    assert m.sigma_coh == pytest.approx(0.2038e-9, rel=1e-3)
    assert m.sigma_cor == pytest.approx(0.937e-12, rel=1e-3)
    assert m.t_norm == pytest.approx(math.sqrt(2 * m.sigma_coh * m.sigma_cor), rel=1e-15)


def test_moments_960ps():
    assert derive_moments(SourceParams(960e-12, 200e9)).sigma_coh == pytest.approx(0.41e-9, rel=0.01)


def test_doubling_frame_doubles_sigma_coh_only():
    a = derive_moments(SourceParams(480e-12, 200e9))
    b = derive_moments(SourceParams(960e-12, 200e9))
    assert b.sigma_coh == 2 * a.sigma_coh
    assert b.sigma_cor == a.sigma_cor


@pytest.mark.parametrize(
    "kwargs, field",
    [
        (dict(frame_duration=0.0, phase_matching_bandwidth=1e11), "frame_duration"),
        (dict(frame_duration=-1e-9, phase_matching_bandwidth=1e11), "frame_duration"),
        (dict(frame_duration=1e-9, phase_matching_bandwidth=0.0), "phase_matching_bandwidth"),
        (dict(frame_duration=1e-9, phase_matching_bandwidth=1e11, mean_pairs_per_frame=-0.1), "mean_pairs_per_frame"),
    ],
)
def test_invalid_params_name_field(kwargs, field):
    with pytest.raises(DomainError) as exc:
        derive_moments(SourceParams(**kwargs))
    assert exc.value.field == field


def test_low_schmidt_ratio_warns():
    with pytest.warns(RuntimeWarning, match="sigma_coh/sigma_cor"):
        derive_moments(SourceParams(5e-12, 200e9))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        derive_moments(SourceParams(480e-12, 200e9))


def test_frame_geometry():
    p = SourceParams(480e-12, 200e9)
    assert p.frame_period == pytest.approx(1.44e-9)
    assert p.frame_center(3) == pytest.approx(9 * 480e-12)


def test_nominal_difference_variances(gamma16, moments16):
    v_t, v_w = difference_variances(gamma16)
    assert v_t == pytest.approx(moments16.sigma_cor**2, rel=1e-12)
    assert v_w == pytest.approx(1 / (4 * moments16.sigma_coh**2), rel=1e-12)
    # Directly from the matrix entries, up to cancellation in the differences.
    m = gamma16.matrix
    assert m[0, 0] + m[2, 2] - 2 * m[0, 2] == pytest.approx(moments16.sigma_cor**2, rel=1e-9)
    assert m[1, 1] + m[3, 3] - 2 * m[1, 3] == pytest.approx(1 / (4 * moments16.sigma_coh**2), rel=1e-9)


def test_nominal_is_physical_and_heisenberg(gamma16):
    assert is_physical(gamma16)
    m = gamma16.matrix
    assert m[0, 0] * m[1, 1] >= 0.25


@given(
    tf=st.floats(1e-11, 1e-8),
    bpm=st.floats(5e10, 1e12),
    k=st.floats(0.1, 10.0),
)
def test_scale_covariance(tf, bpm, k):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = derive_moments(SourceParams(tf, bpm))
        b = derive_moments(SourceParams(k * tf, bpm / k))
    assert b.sigma_coh == pytest.approx(k * a.sigma_coh, rel=1e-12)
    assert b.sigma_cor == pytest.approx(k * a.sigma_cor, rel=1e-12)
    assert b.t_norm == pytest.approx(k * a.t_norm, rel=1e-12)


def test_nominal_tfcm_structure(gamma16):
    m = gamma16.matrix
    assert np.array_equal(m, m.T)
    assert m[0, 1] == m[0, 3] == m[1, 2] == m[2, 3] == 0.0
    assert not m.flags.writeable
