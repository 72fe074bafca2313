"""Gaussian noise increments with prescribed spatial covariance.

One increment per time step is synthesised by colouring white noise in
Fourier space so that the real-space field has Cov(dW_a(x), dW_b(y)) =
dt * Q_per(x - y) exactly on the grid, with Q_per the (band-limited)
periodised covariance.  In d = 1 the half-spectrum modes are drawn directly
(self-conjugate modes real, others circular complex); in d >= 2 white noise
is seeded in physical space and transformed, which keeps the Hermitian
bookkeeping implicit.  Increments are restricted to the 2/3 dealias band so
the transport product downstream is alias-free.
"""

import numpy as np

from . import covariance as cov
from .errors import DegenerateDt, GridResolutionError, TooFewSamples
from .grid import VectorField

MIN_POINTS_PER_LENGTH = 8


class NoiseIncrement:
    """One-step increment field with covariance dt * Q_per(x - y)."""

    def __init__(self, dw, dt, spec, meta=None):
        self.dw = dw            # VectorField
        self.dt = float(dt)
        self.spec = spec
        self.meta = meta or {}

    @property
    def grid(self):
        return self.dw.grid


def check_resolution(spec, grid):
    ell = spec.correlation_length
    if grid.dx * MIN_POINTS_PER_LENGTH > ell * (1.0 + 1e-12):
        raise GridResolutionError(
            f"dx = {grid.dx:.4g} too coarse: need >= {MIN_POINTS_PER_LENGTH} points "
            f"across correlation length {ell:.4g}"
        )


def scaled_gain(spec, grid, dt):
    """sqrt(dt * gain_k) restricted to the dealias band (cachable per dt)."""
    tab = cov.noise_mode_table(spec, grid)
    return np.sqrt(dt) * tab.sqrt_gain * grid.dealias


def synth_values(spec, grid, dt, rng, gain=None):
    """Raw increment values, shape (d,) + grid.shape.

    Draw order is fixed, so identical (rng state, spec, grid, dt) give a
    bit-identical field.
    """
    if gain is None:
        gain = scaled_gain(spec, grid, dt)
    if grid.d == 1:
        # increments are band-limited by construction, so only the dealias
        # band is drawn; the zero mode is real, the band edge is interior
        nb = grid.N // 3 + 1
        z = rng.standard_normal(2 * nb)
        root_n = np.sqrt(grid.N)
        what = np.zeros(grid.rshape[0], dtype=complex)
        what[:nb] = np.sqrt(0.5) * root_n * (z[:nb] + 1j * z[nb:])
        what[0] = root_n * z[0]
        return grid.inv(what * gain)[np.newaxis, :]
    white = rng.standard_normal((spec.d,) + grid.shape)
    what = grid.fwd(white)
    if spec.kind == cov.COMPRESSIBLE:
        return grid.inv(what * gain)
    # incompressible: project each mode onto the plane orthogonal to xi;
    # the zero mode carries the angular-average weight sqrt(1 - 1/d)
    with np.errstate(invalid="ignore", divide="ignore"):
        radial = sum(grid.xi_axes[a] * what[a] for a in range(spec.d)) / grid.xi_sq
    zero = grid.xi_sq == 0.0
    coeffs = np.empty_like(what)
    for a in range(spec.d):
        proj = what[a] - grid.xi_axes[a] * np.where(zero, 0.0, radial)
        proj = np.where(zero, what[a] * np.sqrt(1.0 - 1.0 / spec.d), proj)
        coeffs[a] = proj * gain
    return grid.inv(coeffs)


def sample_increment(spec, grid, dt, rng, meta=None):
    """Draw one NoiseIncrement; bit-identical under identical inputs."""
    if dt <= 0:
        raise DegenerateDt(f"dt = {dt}")
    check_resolution(spec, grid)
    vals = synth_values(spec, grid, dt, rng)
    return NoiseIncrement(VectorField(grid, vals), dt, spec, meta)


def empirical_cov(samples, lag):
    """Sample covariance matrix at a spatial lag, with entrywise stderr.

    Averages dW_a(x) dW_b(x + lag) over all base points of every increment;
    the replica-to-replica scatter of those spatial means gives the stderr.
    """
    if len(samples) < 100:
        raise TooFewSamples(f"need >= 100 increments, got {len(samples)}")
    grid = samples[0].grid
    d = grid.d
    lag = np.atleast_1d(np.asarray(lag, dtype=float))
    shifts = []
    for a in range(d):
        j = lag[a] / grid.dx
        if abs(j - round(j)) > 1e-9:
            raise ValueError(f"lag[{a}] = {lag[a]} is not grid aligned")
        shifts.append(int(round(j)))
    per = np.zeros((len(samples), d, d))
    for m, inc in enumerate(samples):
        if inc.grid != grid:
            raise ValueError("increments on different grids")
        w = inc.dw.values
        ws = np.roll(w, shift=[-s for s in shifts], axis=tuple(range(-d, 0)))
        for a in range(d):
            for b in range(d):
                per[m, a, b] = np.mean(w[a] * ws[b])
    mean = per.mean(axis=0)
    stderr = per.std(axis=0, ddof=1) / np.sqrt(len(samples))
    return mean, stderr
