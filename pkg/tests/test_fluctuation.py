import numpy as np
import pytest

from ewfluct import covariance as cov
from ewfluct.errors import (
    DegenerateInput,
    DegenerateSample,
    NonUniformTimes,
    TimeMismatch,
    TooFewSamples,
)
from ewfluct.fluctuation import (
    normality_test,
    qv_estimate,
    scaling_fit,
    x_n,
)
from ewfluct.grid import ScalarField, TorusGrid, bump_field, cos_mode
from ewfluct.rng import ReplicaStreams
from ewfluct.spde import Trajectory, mean_heat, run


def _toy_traj(g, fields, times):
    return Trajectory(times=times, fields=fields)


def test_x_n_zero_when_equal():
    g = TorusGrid(1, 8.0, 64)
    f = bump_field(g, width=1.0)
    tr = _toy_traj(g, [f], [0.5])
    out = x_n(tr, tr, 4)
    assert np.abs(out.fields[0].values).max() == 0.0


def test_x_n_linear_scaling():
    g = TorusGrid(1, 8.0, 64)
    f = bump_field(g, width=1.0)
    zero = ScalarField(g, np.zeros(g.N))
    tr = _toy_traj(g, [f], [0.5])
    mean = _toy_traj(g, [zero], [0.5])
    out2 = x_n(tr, mean, 4)
    out1 = x_n(tr, mean, 1)
    assert np.allclose(out2.fields[0].values, 2.0 * out1.fields[0].values)


def test_x_n_time_mismatch():
    g = TorusGrid(1, 8.0, 64)
    f = bump_field(g, width=1.0)
    with pytest.raises(TimeMismatch):
        x_n(_toy_traj(g, [f], [0.5]), _toy_traj(g, [f], [0.6]), 2)


def test_x_n_mean_zero_ensemble():
    spec = cov.CovarianceSpec(kind=cov.COMPRESSIBLE, d=1, amp=1.0, R=1.0)
    g = TorusGrid(1, 16.0, 128)
    phi = bump_field(g, width=1.0, normalize=True)
    kappa, T = 0.5, 0.2
    phi_b = ScalarField.from_spectrum(g, g.fwd(phi.values) * g.dealias / g.N)
    mean_traj = Trajectory(times=[T], fields=[mean_heat(phi_b, kappa + spec.nu, T)])
    R = 300
    probe = cos_mode(g, 1)
    vals = np.empty(R)
    for r in range(R):
        tr = run(spec, phi, T, 1e-3, ReplicaStreams(17, r), [T], kappa=kappa)
        xs = x_n(tr, mean_traj, 1)
        vals[r] = np.sum(xs.fields[0].values * probe.values) * g.cell
    assert abs(vals.mean()) <= 3 * vals.std(ddof=1) / np.sqrt(R)


def test_scaling_fit_exact_power_law():
    table = {n: 3.7 * n ** (-0.5) for n in (2, 4, 8, 16)}
    fit = scaling_fit(table)
    assert abs(fit.slope + 0.5) < 1e-12


def test_scaling_fit_noisy_within_tolerance():
    rng = np.random.default_rng(123)
    table = {n: 2.0 * n ** (-0.5) * (1 + 0.05 * rng.standard_normal(60))
             for n in (2, 4, 8)}
    fit = scaling_fit(table)
    assert abs(fit.slope + 0.5) < 0.1
    assert fit.ci[0] <= fit.slope <= fit.ci[1]


def test_scaling_fit_degenerate():
    with pytest.raises(DegenerateInput):
        scaling_fit({2: 1.0, 4: 0.5})
    with pytest.raises(DegenerateInput):
        scaling_fit({2: 1.0, 4: 0.5, 8: 0.0})


def test_qv_noise_free_residue():
    # a deterministic heat pairing has zero martingale part; the compensated
    # increments leave only the O(dt^2) expansion residue per step
    g = TorusGrid(1, 16.0, 128)
    phi = bump_field(g, width=1.0, normalize=True)
    probe = cos_mode(g, 1)
    D, dt, T = 1.0, 1e-3, 0.5
    nst = int(T / dt)
    times = np.arange(nst + 1) * dt
    c = phi.spectrum()
    p = np.empty(nst + 1)
    q = np.empty(nst + 1)
    for m, t in enumerate(times):
        f = ScalarField.from_spectrum(g, c * np.exp(-D * g.xi_sq * t))
        p[m] = np.sum(f.values * probe.values) * g.cell
        lap = ScalarField.from_spectrum(g, -g.xi_sq * f.spectrum())
        q[m] = np.sum(lap.values * probe.values) * g.cell
    _, curve = qv_estimate(times, p, q, D)
    scale = np.abs(p).max()
    assert curve[-1] <= 10 * T * dt**3 * (scale * D) ** 2 / dt  # ~ T dt^2 rate
    assert curve[-1] < 1e-9 * scale**2


def test_qv_additivity():
    rng = np.random.default_rng(7)
    times = np.arange(101) * 0.01
    p = np.cumsum(rng.standard_normal(101)) * 0.1
    q = rng.standard_normal(101)
    _, full = qv_estimate(times, p, q, 0.7)
    _, first = qv_estimate(times[:51], p[:51], q[:51], 0.7)
    _, second = qv_estimate(times[50:], p[50:], q[50:], 0.7)
    assert abs(full[-1] - (first[-1] + second[-1])) < 1e-12 * full[-1]
    assert abs(full[50] - first[-1]) == 0.0


def test_qv_nonuniform_times():
    times = np.array([0.0, 0.1, 0.25])
    with pytest.raises(NonUniformTimes):
        qv_estimate(times, np.zeros(3), np.zeros(3), 1.0)


def test_increment_moments_grow_with_lag():
    # E|<X(t) - X(s), phi>|^2 increases over dyadic lags (Holder-type proxy)
    spec = cov.CovarianceSpec(kind=cov.COMPRESSIBLE, d=1, amp=1.0, R=1.0)
    g = TorusGrid(1, 16.0, 128)
    phi = bump_field(g, width=1.0, normalize=True)
    probe = cos_mode(g, 1)
    lapp = ScalarField.from_spectrum(g, -g.xi_sq * probe.spectrum())
    kappa, dt, T = 0.5, 1e-3, 0.32
    R = 80
    series = []
    for r in range(R):
        tr = run(spec, phi, T, dt, ReplicaStreams(29, r), [], kappa=kappa,
                 probes={"p": probe})
        series.append(tr.probe_series["p"])
    series = np.stack(series)
    nst = series.shape[1] - 1
    moments = []
    for lag in (nst // 8, nst // 4, nst // 2, nst):
        inc = series[:, lag] - series[:, 0]
        moments.append(np.mean(inc**2))
    assert all(a < b for a, b in zip(moments, moments[1:]))


def test_normality_gaussian_calibration():
    rng = np.random.default_rng(2718)
    rejections = 0
    for _ in range(200):
        _, p = normality_test(rng.standard_normal(1000))
        rejections += p < 0.01
    # Binomial(200, 0.01): P(X > 8) < 1e-4
    assert rejections <= 8


def test_normality_rejects_uniform():
    rng = np.random.default_rng(3)
    _, p = normality_test(rng.random(1000))
    assert p < 0.001


def test_normality_statistic_matches_scipy():
    from scipy.stats import anderson

    rng = np.random.default_rng(4)
    x = rng.standard_normal(500)
    stat, _ = normality_test(x)
    ref = anderson(x, dist="norm").statistic
    # scipy reports the unmodified A^2; undo the small-sample factor
    n = len(x)
    assert abs(stat / (1.0 + 0.75 / n + 2.25 / n**2) - ref) < 1e-10


def test_normality_degenerate_and_small():
    with pytest.raises(DegenerateSample):
        normality_test(np.ones(500))
    with pytest.raises(TooFewSamples):
        normality_test(np.random.default_rng(0).standard_normal(50))
