import numpy as np
import pytest

from ewfluct import covariance as cov
from ewfluct.errors import DegenerateDt, GridResolutionError, TooFewSamples
from ewfluct.grid import TorusGrid
from ewfluct.noise import empirical_cov, sample_increment
from ewfluct.rng import ReplicaStreams, stream

COMPR = cov.CovarianceSpec(kind=cov.COMPRESSIBLE, d=1, amp=1.0, R=1.0)
INCOM = cov.CovarianceSpec(kind=cov.INCOMPRESSIBLE, d=2, g0=1.0, zeta=1.0)


def test_determinism_bit_identical():
    g = TorusGrid(1, 16.0, 128)
    a = sample_increment(COMPR, g, 1e-3, stream(9, "noise", 2, 7)).dw.values
    b = sample_increment(COMPR, g, 1e-3, stream(9, "noise", 2, 7)).dw.values
    assert np.array_equal(a, b)
    c = sample_increment(COMPR, g, 1e-3, stream(9, "noise", 2, 8)).dw.values
    assert not np.array_equal(a, c)


def test_cached_stream_matches_fresh():
    g = TorusGrid(1, 16.0, 128)
    rs = ReplicaStreams(9, 2)
    _ = sample_increment(COMPR, g, 1e-3, rs.noise(0))
    via_cached = sample_increment(COMPR, g, 1e-3, rs.noise(7)).dw.values
    via_fresh = sample_increment(COMPR, g, 1e-3, stream(9, "noise", 2, 7)).dw.values
    assert np.array_equal(via_cached, via_fresh)


def test_mean_zero():
    g = TorusGrid(1, 16.0, 128)
    rs = ReplicaStreams(1, 0)
    M, dt = 10000, 1e-3
    vals = np.empty(M)
    for m in range(M):
        vals[m] = sample_increment(COMPR, g, dt, rs.noise(m)).dw.values[0, 13]
    target_sd = np.sqrt(2 * COMPR.nu * dt)
    assert abs(vals.mean()) < 4 * target_sd / np.sqrt(M)


def test_pointwise_variance_matches_2nu_dt():
    g = TorusGrid(1, 16.0, 128)
    rs = ReplicaStreams(2, 0)
    M, dt = 10000, 1e-3
    vals = np.empty(M)
    for m in range(M):
        vals[m] = sample_increment(COMPR, g, dt, rs.noise(m)).dw.values[0, 40]
    assert abs(vals.var() / (2 * COMPR.nu * dt) - 1.0) < 0.05


def test_incompressible_divergence_free():
    g = TorusGrid(2, 8.0, 64)
    rs = ReplicaStreams(3, 0)
    for m in range(3):
        inc = sample_increment(INCOM, g, 1e-3, rs.noise(m))
        div = inc.dw.divergence().values
        assert np.abs(div).max() <= 1e-10 * np.abs(inc.dw.values).max()


def test_white_in_time():
    g = TorusGrid(1, 16.0, 128)
    rs = ReplicaStreams(4, 0)
    M, dt = 4000, 1e-3
    vals = np.empty((M, 2))
    for m in range(M):
        vals[m, 0] = sample_increment(COMPR, g, dt, rs.noise(2 * m)).dw.values[0, 64]
        vals[m, 1] = sample_increment(COMPR, g, dt, rs.noise(2 * m + 1)).dw.values[0, 64]
    rho = np.corrcoef(vals[:, 0], vals[:, 1])[0, 1]
    assert abs(rho) < 4.0 / np.sqrt(M)


def test_rescaled_variance_independent_of_n():
    g = TorusGrid(1, 8.0, 128)
    dt = 1e-3
    for n in (1, 2):
        spec_n = cov.rescale(COMPR, n)
        rs = ReplicaStreams(5, n)
        M = 4000
        vals = np.empty(M)
        for m in range(M):
            vals[m] = sample_increment(spec_n, g, dt, rs.noise(m)).dw.values[0, 9]
        assert abs(vals.var() / (2 * COMPR.nu * dt) - 1.0) < 0.07


def test_empirical_cov_lag0_and_support():
    g = TorusGrid(1, 16.0, 128)
    rs = ReplicaStreams(6, 0)
    dt = 1e-3
    samples = [sample_increment(COMPR, g, dt, rs.noise(m)) for m in range(300)]
    c0, se0 = empirical_cov(samples, [0.0])
    assert abs(c0[0, 0] - 1.0 * dt) <= 3 * se0[0, 0]
    cfar, sefar = empirical_cov(samples, [1.5])
    assert abs(cfar[0, 0]) <= 3 * sefar[0, 0]
    cpos, sepos = empirical_cov(samples, [0.5])
    cneg, seneg = empirical_cov(samples, [-0.5])
    assert abs(cpos[0, 0] - cneg.T[0, 0]) <= 3 * np.hypot(sepos[0, 0], seneg[0, 0])


def test_empirical_cov_too_few():
    g = TorusGrid(1, 16.0, 128)
    rs = ReplicaStreams(7, 0)
    samples = [sample_increment(COMPR, g, 1e-3, rs.noise(m)) for m in range(10)]
    with pytest.raises(TooFewSamples):
        empirical_cov(samples, [0.0])


def test_grid_resolution_guard():
    g = TorusGrid(1, 16.0, 64)  # dx = 0.25, 4 points across R = 1
    with pytest.raises(GridResolutionError):
        sample_increment(COMPR, g, 1e-3, stream(0, "noise"))


def test_degenerate_dt():
    g = TorusGrid(1, 16.0, 128)
    with pytest.raises(DegenerateDt):
        sample_increment(COMPR, g, 0.0, stream(0, "noise"))
