import numpy as np
import pytest

from ewfluct import covariance as cov
from ewfluct.correlation import (
    S2Trajectory,
    assemble_C2,
    cfl_limit,
    heat_kernel_bound_check,
    mc_S2,
    solve_S2,
)
from ewfluct.errors import CFLViolation, EmptyTrajectory, TooFewSamples
from ewfluct.grid import ScalarField, TorusGrid, bump_field, heat_propagate
from ewfluct.rng import ReplicaStreams
from ewfluct.spde import Trajectory, run

COMPR = cov.CovarianceSpec(kind=cov.COMPRESSIBLE, d=1, amp=1.0, R=1.0)


def _band(phi):
    g = phi.grid
    return ScalarField.from_spectrum(g, g.fwd(phi.values) * g.dealias / g.N**g.d)


def test_assemble_c2_blocks():
    g = TorusGrid(1, 16.0, 128)
    asm = assemble_C2(COMPR, 0.5, g)
    at0 = asm.matrix(np.array([3.0]), np.array([3.0]))
    knu = 0.5 + COMPR.nu
    assert np.abs(at0 - np.array([[knu, 1.0], [1.0, knu]])).max() < 1e-12
    far = asm.matrix(np.array([3.0]), np.array([6.0]))
    assert np.abs(far - knu * np.eye(2)).max() < 1e-14


def test_assemble_c2_uniform_ellipticity_when_kappa_exceeds_nu():
    g = TorusGrid(1, 16.0, 128)
    asm = assemble_C2(COMPR, 0.75, g)   # kappa > nu
    assert asm.eig_min > 0
    assert abs(asm.eig_min - (0.75 - COMPR.nu)) < 1e-12
    # eigen-solve oracle over sampled lags
    worst = np.inf
    for z in np.linspace(0, 2, 41):
        m = asm.matrix(np.array([z]), np.array([0.0]))
        worst = min(worst, np.linalg.eigvalsh(m).min())
    assert worst > 0
    assert abs(worst - asm.eig_min) < 1e-9
    # the degenerate point: kappa = nu gives eig_min = 0
    asm0 = assemble_C2(COMPR, 0.5, g)
    assert abs(asm0.eig_min) < 1e-12


def test_solve_s2_initial_condition():
    g = TorusGrid(1, 16.0, 128)
    phi = _band(bump_field(g, width=1.0, normalize=True))
    s2 = solve_S2(COMPR, 0.5, phi, 0.01, 1e-3, [0.0, 0.01])
    assert np.abs(s2.values[0] - np.outer(phi.values, phi.values)).max() == 0.0


def test_solve_s2_zero_noise_is_product_of_heat_flows():
    g = TorusGrid(1, 16.0, 128)
    spec0 = cov.CovarianceSpec(kind=cov.COMPRESSIBLE, d=1, amp=0.0, R=1.0)
    phi = _band(bump_field(g, width=1.0, normalize=True))
    T = 0.2
    dt = cfl_limit(g, 0.5, 0.0) * 0.9
    nst = int(np.ceil(T / dt))
    dt = T / nst
    s2 = solve_S2(spec0, 0.5, phi, T, dt, [T])
    hp = heat_propagate(phi, 0.5, T).values
    ref = np.outer(hp, hp)
    err = np.abs(s2.values[-1] - ref).max()
    # centred FD in space vs spectral reference: O(dx^2) dominates
    assert err < 2e-3 * np.abs(ref).max()


def test_solve_s2_mass_conservation_and_symmetry():
    g = TorusGrid(1, 16.0, 128)
    phi = _band(bump_field(g, width=1.0, normalize=True))
    dt = cfl_limit(g, 0.5, COMPR.nu) * 0.9
    nst = int(np.ceil(0.2 / dt))
    s2 = solve_S2(COMPR, 0.5, phi, 0.2, 0.2 / nst, [0.1, 0.2])
    assert np.abs(s2.mass / s2.mass[0] - 1.0).max() <= 1e-10
    for v in s2.values:
        assert np.abs(v - v.T).max() < 1e-12


def test_solve_s2_comparison_principle_proxy():
    g = TorusGrid(1, 16.0, 128)
    phi = _band(bump_field(g, width=1.0, normalize=True))
    dt = cfl_limit(g, 0.5, COMPR.nu) * 0.9
    nst = int(np.ceil(0.3 / dt))
    s2 = solve_S2(COMPR, 0.5, phi, 0.3, 0.3 / nst, [0.3])
    v = s2.values[-1]
    assert v.min() >= -1e-8 * v.max()


def test_solve_s2_cfl_guard():
    g = TorusGrid(1, 16.0, 128)
    phi = _band(bump_field(g, width=1.0))
    with pytest.raises(CFLViolation):
        solve_S2(COMPR, 0.5, phi, 0.1, 1e-2, [0.1])


def test_stationary_consistency_with_closed_form():
    # evolving from S2 = 1, the pair solver must settle on the closed-form
    # profile (periodised); validates the cross-term convention, the closed
    # form, and the solver in one shot
    kappa, amp = 0.5, 0.5
    spec = cov.CovarianceSpec(kind=cov.COMPRESSIBLE, d=1, amp=amp, R=1.0)
    g = TorusGrid(1, 8.0, 128)
    ones = ScalarField(g, np.ones(g.N))
    dt = cfl_limit(g, kappa, spec.nu) * 0.9
    T = 8.0
    nst = int(np.ceil(T / dt))
    s2 = solve_S2(spec, kappa, ones, T, T / nst, [T])
    prof = s2.values[-1][:, 0]  # translation invariant: any row
    dist = g.torus_distance((0.0,))
    w_t = cov.stationary_w_torus(spec, kappa, g.L)(dist)
    sup = np.abs(prof - w_t).max() / np.abs(w_t).max()
    assert sup < 0.02


def test_mc_s2_deterministic_case():
    g = TorusGrid(1, 16.0, 128)
    spec0 = cov.CovarianceSpec(kind=cov.COMPRESSIBLE, d=1, amp=0.0, R=1.0)
    phi = bump_field(g, width=1.0, normalize=True)
    trajs = [run(spec0, phi, 0.1, 1e-3, ReplicaStreams(0, r), [0.1], kappa=0.5)
             for r in range(8)]
    times, means, stderrs = mc_S2(trajs, min_replicas=8)
    v = trajs[0].fields[-1].values
    assert np.abs(means[0] - np.outer(v, v)).max() < 1e-14
    # one-pass accumulation leaves only float cancellation residue
    assert stderrs[0].max() < 1e-7 * np.abs(means[0]).max()


def test_mc_s2_too_few():
    g = TorusGrid(1, 16.0, 128)
    phi = bump_field(g, width=1.0)
    trajs = [Trajectory(times=[0.0], fields=[phi])] * 10
    with pytest.raises(TooFewSamples):
        mc_S2(trajs, min_replicas=50)


def test_mc_s2_symmetry_within_stderr():
    g = TorusGrid(1, 16.0, 128)
    phi = bump_field(g, width=1.0, normalize=True)
    trajs = [run(COMPR, phi, 0.1, 1e-3, ReplicaStreams(77, r), [0.1], kappa=0.5)
             for r in range(250)]
    _, means, stderrs = mc_S2(trajs, min_replicas=250)
    m, se = means[0], stderrs[0]
    # estimator is exactly symmetric by construction; check within float noise
    assert np.abs(m - m.T).max() < 1e-12


def _product_heat_trajectory(g, phi, knu, times):
    vals = []
    for t in times:
        hp = heat_propagate(phi, knu, t).values
        vals.append(np.outer(hp, hp))
    return S2Trajectory(times=list(times), values=vals, grid=g)


def test_bound_check_exact_product_data():
    g = TorusGrid(1, 16.0, 128)
    phi = _band(bump_field(g, width=1.0, normalize=True))
    knu = 1.0
    times = [round(0.05 * k, 10) for k in range(1, 21)]
    traj = _product_heat_trajectory(g, phi, knu, times)
    cands = 2.0 * knu * np.geomspace(0.25, 4.0, 17)  # includes 2 knu exactly
    rep = heat_kernel_bound_check(traj, phi, c_candidates=cands)
    assert rep.holds
    assert abs(rep.c - 2.0 * knu) < 1e-12
    assert rep.C <= 1.0 + 1e-6


def test_bound_check_compressible_holds_and_control_fails():
    g = TorusGrid(1, 16.0, 128)
    phi = _band(bump_field(g, width=1.0, normalize=True))
    kappa = 0.5
    dt = cfl_limit(g, kappa, COMPR.nu) * 0.9
    sub = int(np.ceil(0.05 / dt))
    dt = 0.05 / sub
    times = [round(0.05 * k, 10) for k in range(1, 21)]
    s2 = solve_S2(COMPR, kappa, phi, 1.0, dt, times)
    cands = 2.0 * (kappa + COMPR.nu) * np.geomspace(0.25, 8.0, 25)
    rep = heat_kernel_bound_check(s2, phi, c_candidates=cands)
    assert rep.holds
    inflated = S2Trajectory(times=s2.times,
                            values=[v * np.exp(t) for t, v in zip(s2.times, s2.values)],
                            grid=g, mass=s2.mass)
    rep2 = heat_kernel_bound_check(inflated, phi, c_candidates=cands)
    assert not rep2.holds


def test_bound_check_empty():
    g = TorusGrid(1, 16.0, 128)
    phi = _band(bump_field(g, width=1.0))
    traj = S2Trajectory(times=[5.0], values=[np.ones((g.N, g.N))], grid=g)
    with pytest.raises(EmptyTrajectory):
        heat_kernel_bound_check(traj, phi, t_window=(0.05, 1.0))
