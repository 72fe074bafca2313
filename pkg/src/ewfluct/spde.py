"""Mild (exponential Euler) time stepping of the Ito transport-diffusion law.

One step advances theta by

    theta_{m+1} = E_dt [ theta_m - div( theta_m dW_m ) ],

with E_dt the exact spectral multiplier exp(-(kappa+nu)|xi|^2 dt): the
Stratonovich correction is absorbed analytically into the kappa+nu
diffusivity and never discretised.  The transport product is formed in
physical space and truncated by the 2/3 rule before the spectral divergence;
since the increments and the initial datum are band-limited, the retained
band evolves alias-free.  The divergence has no zero mode, so mass is
conserved exactly, and consequently the ensemble mean obeys the discrete
heat semigroup with no time-discretisation bias.

`step` is the single-step contract; `run` / `run_stationary` integrate whole
replicas with the d = 1 loop specialised for speed (bit-identical to
composing `step` with `sample_increment`).
"""

from dataclasses import dataclass, field

import numpy as np

from . import covariance as cov
from .errors import BlowupDetected, DomainError, GridMismatch, TimeMismatch
from .grid import ScalarField, heat_propagate, spectral_inner
from .noise import check_resolution, scaled_gain, synth_values

DEFAULT_GUARD = 1e6


@dataclass
class SolverState:
    grid: object
    spec: object
    kappa: float
    theta_hat: np.ndarray     # raw rfftn spectrum (values * N^d convention)
    t: float = 0.0
    step_index: int = 0
    guard: float = DEFAULT_GUARD

    def theta(self):
        g = self.grid
        return ScalarField(g, g.inv(self.theta_hat),
                           spectrum=self.theta_hat / g.N**g.d)

    def mass(self):
        flat_zero = self.theta_hat.reshape(-1)[0]
        return float(flat_zero.real) * self.grid.cell


def initial_state(spec, phi, kappa, guard=DEFAULT_GUARD):
    """Band-limit the initial datum and wrap it as a solver state."""
    g = phi.grid
    check_resolution(spec, g)
    th = g.fwd(phi.values) * g.dealias
    return SolverState(grid=g, spec=spec, kappa=kappa, theta_hat=th, guard=guard)


def step(state, inc):
    """One mild Euler-Maruyama step against the given noise increment."""
    g = state.grid
    if inc.grid != g:
        raise GridMismatch("increment grid differs from solver grid")
    dt = inc.dt
    emul = _heat_multiplier(g, state.kappa + state.spec.nu, dt)
    vals = g.inv(state.theta_hat)
    mx = float(np.max(np.abs(vals)))
    if not np.isfinite(mx) or mx > state.guard:
        raise BlowupDetected(
            f"|theta|_inf = {mx:.3g} beyond guard {state.guard:.3g} "
            f"at step {state.step_index} (t = {state.t:.6g}); reduce dt"
        )
    phat = g.fwd(vals * inc.dw.values)
    div = sum(1j * g.xi_axes[a] * phat[a] for a in range(g.d))
    new_hat = emul * (state.theta_hat - div * g.dealias)
    return SolverState(grid=g, spec=state.spec, kappa=state.kappa,
                       theta_hat=new_hat, t=state.t + dt,
                       step_index=state.step_index + 1, guard=state.guard)


_MULT_CACHE = {}


def _heat_multiplier(grid, D, dt):
    key = (grid.key, float(D), float(dt))
    if key not in _MULT_CACHE:
        if len(_MULT_CACHE) > 64:
            _MULT_CACHE.clear()
        _MULT_CACHE[key] = np.exp(-D * grid.xi_sq * dt)
    return _MULT_CACHE[key]


@dataclass
class Trajectory:
    times: list
    fields: list
    diagnostics: dict = field(default_factory=dict)
    probe_series: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)


def _steps_for(times, dt):
    out = []
    for t in times:
        m = t / dt
        if abs(m - round(m)) > 1e-9:
            raise TimeMismatch(f"record time {t} is not a multiple of dt = {dt}")
        out.append(int(round(m)))
    return out


class _Recorder:
    """Collects snapshots, per-step diagnostics and probe pairings."""

    def __init__(self, grid, rec_steps, probes, track_steps):
        self.grid = grid
        self.rec = set(rec_steps)
        self.track = track_steps
        self.times, self.fields = [], []
        self.diag = {"t": [], "mass": [], "l2": [], "min": [], "max": []}
        pref = grid.L**grid.d / grid.N**(2 * grid.d)
        self.probe_vecs = {name: pref * grid.mult * grid.fwd(p.values)
                           for name, p in (probes or {}).items()}
        self.series = {name: [] for name in self.probe_vecs}

    def probes_and_diag(self, m, dt, th, vals=None):
        for name, cvec in self.probe_vecs.items():
            self.series[name].append(float(np.vdot(cvec, th).real))
        if self.track:
            g = self.grid
            if vals is None:
                vals = g.inv(th)
            self.diag["t"].append(m * dt)
            self.diag["mass"].append(float(th.reshape(-1)[0].real) * g.cell)
            self.diag["l2"].append(float(np.sqrt(np.sum(vals * vals) * g.cell)))
            self.diag["min"].append(float(vals.min()))
            self.diag["max"].append(float(vals.max()))

    def snapshot(self, m, dt, th):
        if m in self.rec:
            g = self.grid
            self.times.append(m * dt)
            self.fields.append(ScalarField(g, g.inv(th), spectrum=th / g.N**g.d))

    def final_diag(self, m, dt, th):
        if not self.track:
            g = self.grid
            vals = g.inv(th)
            self.diag["t"].append(m * dt)
            self.diag["mass"].append(float(th.reshape(-1)[0].real) * g.cell)
            self.diag["l2"].append(float(np.sqrt(np.sum(vals * vals) * g.cell)))
            self.diag["min"].append(float(vals.min()))
            self.diag["max"].append(float(vals.max()))

    def trajectory(self, meta):
        return Trajectory(
            times=self.times,
            fields=self.fields,
            diagnostics={k: np.asarray(v) for k, v in self.diag.items()},
            probe_series={k: np.asarray(v) for k, v in self.series.items()},
            meta=meta,
        )


def _integrate_1d(spec, g, th, nsteps, dt, streams, kappa, guard, recorder):
    """Hot loop for d = 1; draw order matches synth_values exactly."""
    rshape = g.rshape[0]
    nb = g.N // 3 + 1
    gain_band = scaled_gain(spec, g, dt)[:nb]
    emul = _heat_multiplier(g, kappa + spec.nu, dt)
    ixi_mask = (1j * g.xi_axes[0]) * g.dealias
    root_n = np.sqrt(g.N)
    c_half = np.sqrt(0.5) * root_n
    N = g.N
    rfft = np.fft.rfft
    irfft = np.fft.irfft
    what = np.zeros(rshape, dtype=complex)
    for m in range(nsteps):
        z = streams.noise(m).standard_normal(2 * nb)
        what[:nb] = c_half * (z[:nb] + 1j * z[nb:])
        what[0] = root_n * z[0]
        what[:nb] *= gain_band
        dw = irfft(what, n=N)
        vals = irfft(th, n=N)
        hi = vals.max()
        lo = vals.min()
        if not (hi < guard and lo > -guard):
            raise BlowupDetected(
                f"|theta|_inf beyond guard {guard:.3g} at step {m} "
                f"(t = {m * dt:.6g}); reduce dt")
        th = emul * (th - ixi_mask * rfft(vals * dw))
        recorder.probes_and_diag(m + 1, dt, th)
        recorder.snapshot(m + 1, dt, th)
    return th


def _integrate_general(spec, g, th, nsteps, dt, streams, kappa, guard, recorder):
    gain = scaled_gain(spec, g, dt)
    emul = _heat_multiplier(g, kappa + spec.nu, dt)
    for m in range(nsteps):
        dw = synth_values(spec, g, dt, streams.noise(m), gain=gain)
        vals = g.inv(th)
        mx = float(np.max(np.abs(vals)))
        if not np.isfinite(mx) or mx > guard:
            raise BlowupDetected(
                f"|theta|_inf = {mx:.3g} beyond guard {guard:.3g} at step {m} "
                f"(t = {m * dt:.6g}); reduce dt")
        phat = g.fwd(vals * dw)
        div = sum(1j * g.xi_axes[a] * phat[a] for a in range(g.d))
        th = emul * (th - div * g.dealias)
        recorder.probes_and_diag(m + 1, dt, th, vals=None)
        recorder.snapshot(m + 1, dt, th)
    return th


def run(spec, phi, T, dt, streams, record_times, kappa,
        probes=None, guard=DEFAULT_GUARD, track_steps=False):
    """Integrate one replica to time T, recording fields and diagnostics.

    `streams` is a ReplicaStreams bundle; the noise of step m comes from its
    (seed, replica, m) cell, so a rerun is bit-identical.  `probes` maps
    names to ScalarFields whose pairings <theta, p> are recorded every step.
    """
    g = phi.grid
    state = initial_state(spec, phi, kappa, guard)
    nsteps = int(round(T / dt))
    if abs(nsteps * dt - T) > 1e-9 * max(T, 1.0):
        raise TimeMismatch(f"T = {T} is not a multiple of dt = {dt}")
    rec_steps = _steps_for(record_times, dt)
    recorder = _Recorder(g, rec_steps, probes, track_steps)
    recorder.probes_and_diag(0, dt, state.theta_hat)
    recorder.snapshot(0, dt, state.theta_hat)
    loop = _integrate_1d if g.d == 1 else _integrate_general
    th = loop(spec, g, state.theta_hat, nsteps, dt, streams, kappa, guard, recorder)
    recorder.final_diag(nsteps, dt, th)
    return recorder.trajectory({"seed": streams.seed, "replica": streams.replica,
                                "dt": dt, "T": T, "kappa": kappa})


def run_stationary(spec, M, T_obs, dt, streams, grid, kappa,
                   sample_every, guard=DEFAULT_GUARD):
    """Burn in from the constant datum 1 and sample the quasi-stationary field.

    Mimics the construction of the stationary corrector: start at t = -M with
    theta = 1, discard [0, M), then record every `sample_every` over a window
    of length T_obs.  Only meaningful for the compressible family (the
    incompressible dynamics leaves the constant field invariant).
    """
    if spec.kind != cov.COMPRESSIBLE:
        raise DomainError("stationary runs require the compressible model")
    ones = ScalarField(grid, np.ones(grid.shape))
    state = initial_state(spec, ones, kappa, guard)
    n_burn = int(round(M / dt))
    n_obs = int(round(T_obs / dt))
    every = int(round(sample_every / dt))
    rec_steps = [n_burn + k * every for k in range(1, n_obs // every + 1)]
    recorder = _Recorder(grid, rec_steps, None, False)
    loop = _integrate_1d if grid.d == 1 else _integrate_general
    th = loop(spec, grid, state.theta_hat, n_burn + n_obs, dt, streams,
              kappa, guard, recorder)
    recorder.final_diag(n_burn + n_obs, dt, th)
    traj = recorder.trajectory({"seed": streams.seed, "replica": streams.replica,
                                "M": M, "T_obs": T_obs, "dt": dt, "kappa": kappa})
    traj.times = [t - M for t in traj.times]
    return traj


def mean_heat(phi, D, t):
    """Deterministic mean evolution: the heat flow of phi at diffusivity D."""
    return heat_propagate(phi, D, t)
