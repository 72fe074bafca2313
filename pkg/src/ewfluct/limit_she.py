"""The limiting additive stochastic heat equation: targets and sampling.

The limit field U solves  dU = (kappa+nu) Lap U dt + div(mean_theta V_eff dxi)
with U(0) = 0 and xi a vector space-time white noise.  Pairings <U(t), phi>
are Gaussian with

    Var = int_0^t int mean_theta_s(x)^2 | V_eff grad(P_{t-s} phi)(x) |^2 dx ds,

evaluated here by trapezoid quadrature in s and exact spectral calculus in x.
The sampler uses the same exponential Euler scheme as the transport solver
with i.i.d. per-gridpoint Gaussians of variance dt/dx^d per component.
"""

from dataclasses import dataclass

import numpy as np

from .errors import BlowupDetected, NegativeTime
from .grid import ScalarField, heat_propagate
from .spde import Trajectory, _heat_multiplier


@dataclass
class LimitSpec:
    diffusivity: float          # kappa + nu
    veff: np.ndarray            # (d, d) symmetric PSD
    phi: ScalarField            # initial mean datum
    grid: object

    def __post_init__(self):
        self.veff = np.atleast_2d(np.asarray(self.veff, dtype=float))
        if self.veff.shape != (self.grid.d, self.grid.d):
            raise ValueError("veff must be (d, d)")
        if not np.allclose(self.veff, self.veff.T, atol=1e-12):
            raise ValueError("veff must be symmetric")
        if np.linalg.eigvalsh(self.veff).min() < -1e-12:
            raise ValueError("veff must be PSD")
        if self.diffusivity <= 0:
            raise ValueError("diffusivity must be positive")


def _grad_values(field):
    g = field.grid
    spec = field.spectrum()
    return np.stack([g.inv((1j * g.xi_axes[a] * spec) * g.N**g.d) for a in range(g.d)])


def var_u(phi_test, t, limit, n_time=256):
    """Var <U(t), phi_test> by tensor-product quadrature."""
    if t < 0:
        raise NegativeTime(f"t = {t}")
    if t == 0:
        return 0.0
    g = limit.grid
    v2 = limit.veff @ limit.veff
    s_nodes = np.linspace(0.0, t, max(int(n_time), 64) + 1)
    vals = np.empty_like(s_nodes)
    for i, s in enumerate(s_nodes):
        theta_bar = heat_propagate(limit.phi, limit.diffusivity, s).values
        grad = _grad_values(heat_propagate(phi_test, limit.diffusivity, t - s))
        quad_form = np.einsum("a...,ab,b...->...", grad, v2, grad)
        vals[i] = np.sum(theta_bar**2 * quad_form) * g.cell
    return float(np.trapezoid(vals, s_nodes))


def qv_limit(phi_test, t, limit, n_time=256):
    """Limiting quadratic variation of <M, phi_test> on [0, t].

    The time kernel is the evolved mean theta_bar_r (heat flow of phi at
    kappa+nu), and the spatial factor is grad(phi)^T V_eff^2 grad(phi).
    """
    if t < 0:
        raise NegativeTime(f"t = {t}")
    if t == 0:
        return 0.0
    g = limit.grid
    v2 = limit.veff @ limit.veff
    grad = _grad_values(phi_test)
    quad_form = np.einsum("a...,ab,b...->...", grad, v2, grad)
    s_nodes = np.linspace(0.0, t, max(int(n_time), 64) + 1)
    vals = np.empty_like(s_nodes)
    for i, s in enumerate(s_nodes):
        theta_bar = heat_propagate(limit.phi, limit.diffusivity, s).values
        vals[i] = np.sum(theta_bar**2 * quad_form) * g.cell
    return float(np.trapezoid(vals, s_nodes))


def sample_u(limit, T, dt, streams, record_times, probes=None, guard=1e9):
    """Exponential-Euler sample path of the limit equation, U(0) = 0."""
    g = limit.grid
    nsteps = int(round(T / dt))
    emul = _heat_multiplier(g, limit.diffusivity, dt)
    rec = {int(round(t / dt)) for t in record_times}
    uhat = np.zeros(g.rshape, dtype=complex)
    theta_hat = g.fwd(limit.phi.values).astype(complex)
    noise_std = np.sqrt(dt / g.cell)
    probe_hats = {name: g.fwd(p.values) for name, p in (probes or {}).items()}
    series = {name: [_inner(g, uhat, ph)] for name, ph in probe_hats.items()}
    times, fields = [], []
    if 0 in rec:
        times.append(0.0)
        fields.append(ScalarField(g, np.zeros(g.shape)))
    for m in range(nsteps):
        theta_bar = g.inv(theta_hat)
        eta = noise_std * streams.white(m).standard_normal((g.d,) + g.shape)
        forced = np.einsum("ab,b...->a...", limit.veff, eta) * theta_bar
        fhat = g.fwd(forced)
        div = sum(1j * g.xi_axes[a] * fhat[a] for a in range(g.d))
        uhat = emul * (uhat + div)
        theta_hat = emul * theta_hat
        for name, ph in probe_hats.items():
            series[name].append(_inner(g, uhat, ph))
        if m + 1 in rec:
            vals = g.inv(uhat)
            mx = float(np.max(np.abs(vals)))
            if not np.isfinite(mx) or mx > guard:
                raise BlowupDetected(f"|U|_inf = {mx:.3g} at step {m + 1}")
            times.append((m + 1) * dt)
            fields.append(ScalarField(g, vals))
    return Trajectory(times=times, fields=fields,
                      probe_series={k: np.asarray(v) for k, v in series.items()},
                      meta={"seed": streams.seed, "replica": streams.replica,
                            "dt": dt, "T": T})


def _inner(grid, fhat, ghat):
    from .grid import spectral_inner

    return spectral_inner(grid, fhat, ghat)
