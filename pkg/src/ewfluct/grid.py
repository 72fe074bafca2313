"""Periodic grids, spectral transforms, Sobolev norms and heat propagation.

Spectral convention: a real field on the torus [0, L)^d sampled at N^d points
is represented as f(x) = sum_k c_k exp(i xi_k . x) with xi_k = 2 pi k / L and
c_k = rfftn(values) / N^d.  Parseval then reads  int |f|^2 dx = L^d sum_k
mult_k |c_k|^2, where mult_k accounts for the conjugate modes not stored in
the rfft half-spectrum.
"""

import numpy as np

from .errors import NegativeTime, SizeMismatch

TWO_THIRDS_KEEP = 3  # keep |k_i| <= N // TWO_THIRDS_KEEP before products


class TorusGrid:
    """Uniform periodic grid on [0, L)^d with N points per dimension."""

    def __init__(self, d, L, N):
        if N % 2 != 0:
            raise ValueError("N must be even")
        self.d = int(d)
        self.L = float(L)
        self.N = int(N)
        self.dx = self.L / self.N
        self.shape = (self.N,) * self.d
        self.cell = self.dx**self.d
        self.x1 = np.arange(self.N) * self.dx

        # integer wavenumbers per axis, broadcastable over the rfftn layout
        full = np.fft.fftfreq(self.N, d=1.0 / self.N)  # signed integers
        half = np.arange(self.N // 2 + 1, dtype=float)
        ints = [full] * (self.d - 1) + [half]
        self.k_axes = []
        for ax, arr in enumerate(ints):
            sh = [1] * self.d
            sh[ax] = arr.size
            self.k_axes.append(arr.reshape(sh))
        self.xi_axes = [2.0 * np.pi / self.L * k for k in self.k_axes]
        self.xi_sq = sum(x * x for x in self.xi_axes)
        self.rshape = tuple(np.broadcast_shapes(*(k.shape for k in self.k_axes)))

        # conjugate-mode multiplicity: modes with 0 < k_last < N/2 stand for two
        mult_last = np.ones(self.N // 2 + 1)
        mult_last[1:-1] = 2.0
        self.mult = np.broadcast_to(mult_last.reshape((1,) * (self.d - 1) + (-1,)), self.rshape)

        keep = self.N // TWO_THIRDS_KEEP
        self.dealias = np.ones(self.rshape, dtype=bool)
        for k in self.k_axes:
            self.dealias &= np.abs(k) <= keep
        self.xi_max = np.pi * self.N / self.L           # grid Nyquist, radians / length
        self.f_nyquist = self.N / (2.0 * self.L)        # Nyquist in cycles / length

    @property
    def key(self):
        return (self.d, self.L, self.N)

    def __eq__(self, other):
        return isinstance(other, TorusGrid) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        return f"TorusGrid(d={self.d}, L={self.L}, N={self.N})"

    def coords(self):
        """Meshgrid of coordinates, shape (d,) + shape."""
        axes = np.meshgrid(*([self.x1] * self.d), indexing="ij")
        return np.stack(axes)

    def torus_distance(self, center):
        """Distance to `center` with periodic wrapping, shape == grid shape."""
        c = np.atleast_1d(np.asarray(center, dtype=float))
        axes = np.meshgrid(*([self.x1] * self.d), indexing="ij")
        acc = np.zeros(self.shape)
        for ax, xs in enumerate(axes):
            delta = np.abs(xs - c[ax])
            delta = np.minimum(delta, self.L - delta)
            acc += delta * delta
        return np.sqrt(acc)

    # raw transforms over the trailing d axes
    def fwd(self, values):
        return np.fft.rfftn(values, axes=tuple(range(-self.d, 0)))

    def inv(self, coeffs):
        return np.fft.irfftn(coeffs, s=self.shape, axes=tuple(range(-self.d, 0)))


class ScalarField:
    """Real scalar field on a TorusGrid with a lazily cached spectrum."""

    def __init__(self, grid, values, spectrum=None):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            raise SizeMismatch(f"values shape {values.shape} != grid shape {grid.shape}")
        self.grid = grid
        self.values = values
        self._spec = spectrum

    @classmethod
    def from_spectrum(cls, grid, coeffs):
        if coeffs.shape != grid.rshape:
            raise SizeMismatch(f"spectrum shape {coeffs.shape} != rfft shape {grid.rshape}")
        values = grid.inv(coeffs * grid.N**grid.d)
        return cls(grid, values, spectrum=np.array(coeffs))

    def spectrum(self):
        """Coefficients c_k of f = sum c_k exp(i xi_k x), rfft half-layout."""
        if self._spec is None:
            self._spec = self.grid.fwd(self.values) / self.grid.N**self.grid.d
        return self._spec

    def copy(self):
        return ScalarField(self.grid, self.values.copy(),
                           None if self._spec is None else self._spec.copy())

    def l2(self):
        return float(np.sqrt(np.sum(self.values**2) * self.grid.cell))

    def mass(self):
        return float(np.sum(self.values) * self.grid.cell)


class VectorField:
    """Real d-component field on a TorusGrid."""

    def __init__(self, grid, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.d,) + grid.shape:
            raise SizeMismatch(f"values shape {values.shape} != {(grid.d,) + grid.shape}")
        self.grid = grid
        self.values = values

    def component(self, a):
        return ScalarField(self.grid, self.values[a])

    def divergence(self):
        g = self.grid
        spec = g.fwd(self.values) / g.N**g.d
        div = sum(1j * g.xi_axes[a] * spec[a] for a in range(g.d))
        return ScalarField.from_spectrum(g, div)


def transform(field, direction):
    """Refresh the spectral cache (forward) or the values (inverse)."""
    if direction not in ("forward", "inverse"):
        raise ValueError("direction must be 'forward' or 'inverse'")
    g = field.grid
    if isinstance(field, VectorField):
        out = g.inv(g.fwd(field.values)) if direction == "inverse" else field.values
        return VectorField(g, np.array(out))
    if direction == "forward":
        spec = g.fwd(field.values) / g.N**g.d
        return ScalarField(g, field.values, spectrum=spec)
    return ScalarField.from_spectrum(g, field.spectrum())


def sobolev_weights(grid, alpha, flavor):
    if flavor == "inhomogeneous":
        return (1.0 + grid.xi_sq) ** alpha
    if flavor == "homogeneous":
        w = np.zeros(grid.rshape)
        nz = grid.xi_sq > 0
        w[nz] = grid.xi_sq[nz] ** alpha
        if alpha == 0:
            w[~nz] = 1.0
        # alpha < 0: the k = 0 term is dropped (diverging weight); alpha > 0: it is 0
        return w
    raise ValueError("flavor must be 'inhomogeneous' or 'homogeneous'")


def sobolev_norm(field, alpha, flavor="inhomogeneous"):
    """H^alpha (or homogeneous) norm via the half-spectrum Parseval sum."""
    g = field.grid
    w = sobolev_weights(g, alpha, flavor)
    c = field.spectrum()
    total = np.sum(g.mult * w * (c.real**2 + c.imag**2))
    return float(np.sqrt(g.L**g.d * total))


def heat_propagate(field, D, t):
    """Apply the heat semigroup exp(t D Laplacian); exact on the grid."""
    if t < 0:
        raise NegativeTime(f"t = {t} < 0")
    if D <= 0:
        raise ValueError("diffusivity must be positive")
    g = field.grid
    decay = np.exp(-D * g.xi_sq * t)
    return ScalarField.from_spectrum(g, field.spectrum() * decay)


def l2_inner(f, g_field):
    if f.grid != g_field.grid:
        raise SizeMismatch("fields on different grids")
    return float(np.sum(f.values * g_field.values) * f.grid.cell)


def spectral_inner(grid, fhat, ghat):
    """<f, g> from raw rfftn outputs (unnormalised spectra)."""
    acc = np.sum(grid.mult * (fhat * np.conj(ghat)).real)
    return float(acc * grid.L**grid.d / grid.N**(2 * grid.d))


def mollifier_profile(u):
    """exp(1 - 1/(1-u^2)) inside |u| < 1, zero outside."""
    u = np.abs(np.asarray(u, dtype=float))
    out = np.zeros_like(u)
    m = u < 1.0
    out[m] = np.exp(1.0 - 1.0 / (1.0 - u[m] ** 2))
    return out


def bump_field(grid, center=None, width=1.0, normalize=False):
    """Smooth compactly supported bump, the canonical initial datum."""
    if center is None:
        center = (grid.L / 2.0,) * grid.d
    r = grid.torus_distance(center)
    vals = mollifier_profile(r / width)
    if normalize:
        vals = vals / (np.sum(vals) * grid.cell)
    return ScalarField(grid, vals)


def cos_mode(grid, k_axis=1, axis=0):
    """cos(2 pi k x_axis / L), a spectrally clean low-frequency probe."""
    axes = np.meshgrid(*([grid.x1] * grid.d), indexing="ij")
    return ScalarField(grid, np.cos(2.0 * np.pi * k_axis * axes[axis] / grid.L))


def sin_mode(grid, k_axis=1, axis=0):
    axes = np.meshgrid(*([grid.x1] * grid.d), indexing="ij")
    return ScalarField(grid, np.sin(2.0 * np.pi * k_axis * axes[axis] / grid.L))
