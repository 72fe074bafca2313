"""Noise covariance models and their derived constants.

Two families are supported:

* ``incompressible`` -- divergence-free spectral model with radial intensity
  g(xi) = g0 <xi>^-(d+zeta) (or a user-supplied radial function) under the
  exact projector I - xi xi^T / |xi|^2.  Requires d >= 2.

* ``compressible`` -- isotropic scalar model Q(x) = amp * B(|x|/R) * I with B
  the *normalised self-convolution* of the standard mollifier.  B is C^inf,
  supported exactly on |u| < 1, B(0) = 1, and its Fourier transform is a
  perfect square, hence nonnegative: the model is an honest covariance.  (The
  raw mollifier itself is not positive definite -- its transform has negative
  lobes of about -10% of the peak -- so it cannot serve as a noise law.)

Both satisfy Q(0) = 2 nu I; for the compressible family nu = amp / 2 exactly.
Fourier convention: fhat(xi) = (2 pi)^{-d/2} int exp(-i xi x) f(x) dx.
"""

import dataclasses
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from .errors import (
    DimensionError,
    DomainError,
    MissingProfile,
    NonPositiveSpectrum,
    NotPSD,
    UnsupportedEvaluation,
)

INCOMPRESSIBLE = "incompressible"
COMPRESSIBLE = "compressible"


@dataclass(frozen=True)
class CovarianceSpec:
    kind: str
    d: int
    g0: float = None
    zeta: float = None
    amp: float = None
    R: float = None
    scale_n: int = 1

    @property
    def nu(self):
        if self.kind == COMPRESSIBLE:
            return 0.5 * self.amp
        return 0.5 * _incompressible_q0(self.d, self.g0, self.zeta)

    @property
    def correlation_length(self):
        """Length the grid must resolve: support radius or spectral half-width."""
        if self.kind == COMPRESSIBLE:
            return self.R / self.scale_n
        rho_half = np.sqrt(2.0 ** (2.0 / (self.d + self.zeta)) - 1.0)
        return 1.0 / (rho_half * self.scale_n)


@dataclass
class ValidationReport:
    nu: float
    psd_min: float
    psd_ok: bool
    isotropy_ok: bool
    support_ok: bool
    messages: list


# -- self-convolution bump profile (d = 1) ------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(96)
_GL_NODES_FT, _GL_WEIGHTS_FT = np.polynomial.legendre.leggauss(384)


def _mollifier(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = np.abs(t) < 1.0
    out[m] = np.exp(-1.0 / (1.0 - t[m] ** 2))
    return out


@lru_cache(maxsize=1)
def _selfconv_norm():
    # C(0) = int b(t)^2 dt over [-1, 1]
    return float(np.sum(_GL_WEIGHTS * _mollifier(_GL_NODES) ** 2))


def bump_cov_profile(u):
    """B(u) = (b*b)(2u) / (b*b)(0) on |u| < 1, b the standard mollifier."""
    u = np.abs(np.asarray(u, dtype=float))
    scalar = u.ndim == 0
    u = np.atleast_1d(u)
    y = 2.0 * u
    lo = np.maximum(-1.0, y - 1.0)
    hi = np.minimum(1.0, y + 1.0)
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    t = mid[..., None] + half[..., None] * _GL_NODES
    vals = np.sum(_mollifier(t) * _mollifier(y[..., None] - t) * _GL_WEIGHTS, axis=-1) * half
    out = np.where(u < 1.0, vals / _selfconv_norm(), 0.0)
    return float(out[0]) if scalar else out


def _mollifier_cos_transform(w):
    """b-tilde(w) = int_{-1}^{1} b(t) cos(w t) dt, vectorised in w."""
    w = np.atleast_1d(np.asarray(w, dtype=float))
    t = _GL_NODES_FT
    vals = _mollifier(t) * _GL_WEIGHTS_FT
    return np.sum(vals * np.cos(np.outer(w, t)), axis=-1)


def bump_cov_profile_hat(xi):
    """1-d Fourier transform of B; equals b-tilde(xi/2)^2 / (2 C0 sqrt(2 pi))."""
    xi = np.asarray(xi, dtype=float)
    bt = _mollifier_cos_transform(np.atleast_1d(xi) / 2.0)
    out = bt**2 / (2.0 * _selfconv_norm() * np.sqrt(2.0 * np.pi))
    return float(out[0]) if xi.ndim == 0 else out


# -- spectral intensity (incompressible) ---------------------------------------

def _g_radial(spec, rho):
    rho = np.asarray(rho, dtype=float)
    return spec.g0 * (1.0 + rho**2) ** (-(spec.d + spec.zeta) / 2.0)


@lru_cache(maxsize=32)
def _incompressible_q0(d, g0, zeta):
    """Q(0) scalar = (2 pi)^{-d/2} (1 - 1/d) int g(xi) dxi (radial quadrature)."""
    surf = 2.0 * np.pi ** (d / 2.0) / _gamma_half(d)
    integral, _ = quad(
        lambda r: g0 * (1.0 + r * r) ** (-(d + zeta) / 2.0) * r ** (d - 1),
        0.0, np.inf, limit=400,
    )
    return (2.0 * np.pi) ** (-d / 2.0) * (1.0 - 1.0 / d) * surf * integral


def _gamma_half(d):
    from math import gamma

    return gamma(d / 2.0)


# -- core evaluations ----------------------------------------------------------

def q_hat(spec, xi):
    """Spectral density matrix Q-hat(xi), a (d, d) real symmetric array.

    The incompressible zero mode uses the angular-average convention
    Q-hat(0) = g(0) (1 - 1/d) I.  Rescaling by n maps Q-hat to
    n^-d Q-hat(xi / n).
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.shape != (spec.d,):
        raise ValueError(f"xi must have shape ({spec.d},)")
    n = spec.scale_n
    if spec.kind == COMPRESSIBLE:
        if spec.d != 1:
            raise UnsupportedEvaluation("compressible profile is implemented for d = 1")
        val = spec.amp * spec.R * bump_cov_profile_hat(spec.R * abs(xi[0]) / n) / n
        return np.array([[val]])
    norm = np.linalg.norm(xi)
    gval = float(_g_radial(spec, norm / n)) / n**spec.d
    if norm == 0.0:
        return gval * (1.0 - 1.0 / spec.d) * np.eye(spec.d)
    unit = xi / norm
    return gval * (np.eye(spec.d) - np.outer(unit, unit))


def q_real(spec, x, grid=None):
    """Real-space covariance matrix Q(x).

    Compressible: closed-form profile.  Incompressible: inverse transform on
    a grid; `x` must then be one of the grid points.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (spec.d,):
        raise ValueError(f"x must have shape ({spec.d},)")
    n = spec.scale_n
    if spec.kind == COMPRESSIBLE:
        if spec.d != 1:
            raise UnsupportedEvaluation("compressible profile is implemented for d = 1")
        val = spec.amp * bump_cov_profile(np.linalg.norm(x) * n / spec.R)
        return val * np.eye(spec.d)
    if grid is None:
        raise UnsupportedEvaluation("incompressible Q(x) is grid-based; pass grid=")
    table = q_real_grid(spec, grid)
    idx = []
    for a in range(spec.d):
        j = x[a] / grid.dx
        jr = int(round(j)) % grid.N
        if abs(j - round(j)) > 1e-9:
            raise UnsupportedEvaluation(f"x[{a}] = {x[a]} is not a grid point")
        idx.append(jr)
    return np.array(table[(slice(None), slice(None)) + tuple(idx)])


@lru_cache(maxsize=16)
def _q_real_grid_cached(spec, grid_key):
    from .grid import TorusGrid

    grid = TorusGrid(*grid_key)
    tab = noise_mode_table(spec, grid)
    N = grid.N
    out = np.zeros((spec.d, spec.d) + grid.shape)
    if spec.kind == COMPRESSIBLE:
        qper = grid.inv(tab.gain.astype(complex))
        out[0, 0] = qper
        return out
    for a in range(spec.d):
        for b in range(a, spec.d):
            mode = tab.gain * tab.projector[a][b]
            out[a, b] = grid.inv(mode.astype(complex))
            out[b, a] = out[a, b]
    return out


def q_real_grid(spec, grid):
    """Table Q_ab(x_j) on the grid (periodised covariance), cached."""
    return _q_real_grid_cached(spec, grid.key)


# -- per-mode gain table for the spectral sampler -------------------------------

class ModeTable:
    """Per-mode covariance data in DFT units.

    `gain[k]` equals the DFT of the sampled, periodised Q profile, so that a
    field synthesised as ifftn(sqrt(dt * gain) * fftn(white)) has covariance
    dt * Q_per(x - y) exactly on the grid.  For the incompressible family the
    gain multiplies the projector stored componentwise in `projector`.
    """

    def __init__(self, kind, gain, sqrt_gain, projector=None):
        self.kind = kind
        self.gain = gain
        self.sqrt_gain = sqrt_gain
        self.projector = projector


@lru_cache(maxsize=16)
def _mode_table_cached(spec, grid_key):
    from .grid import TorusGrid

    grid = TorusGrid(*grid_key)
    n = spec.scale_n
    if spec.kind == COMPRESSIBLE:
        dist = grid.torus_distance((0.0,) * grid.d)
        qvals = spec.amp * bump_cov_profile(dist * n / spec.R)
        gain = grid.fwd(qvals).real
        # aliasing of a PSD transform only adds nonnegative mass; clip rounding
        gain = np.clip(gain, 0.0, None)
        return ModeTable(spec.kind, gain, np.sqrt(gain))
    # incompressible: continuum intensity sampled on the frequency lattice
    rho = np.sqrt(grid.xi_sq)
    gvals = spec.g0 * (1.0 + (rho / n) ** 2) ** (-(spec.d + spec.zeta) / 2.0) / n**spec.d
    gain = (2.0 * np.pi) ** (spec.d / 2.0) * (grid.N / grid.L) ** spec.d * gvals
    # projector components (I - xi xi^T/|xi|^2); angular average at xi = 0
    proj = [[None] * spec.d for _ in range(spec.d)]
    zero = rho == 0.0
    for a in range(spec.d):
        for b in range(a, spec.d):
            xia = np.broadcast_to(grid.xi_axes[a], grid.rshape)
            xib = np.broadcast_to(grid.xi_axes[b], grid.rshape)
            with np.errstate(invalid="ignore", divide="ignore"):
                p = (1.0 if a == b else 0.0) - xia * xib / grid.xi_sq
            p = np.where(zero, (1.0 - 1.0 / spec.d) if a == b else 0.0, p)
            proj[a][b] = p
            proj[b][a] = p
    return ModeTable(spec.kind, gain, np.sqrt(gain), projector=proj)


def noise_mode_table(spec, grid):
    return _mode_table_cached(spec, grid.key)


# -- validation -----------------------------------------------------------------

def validate(spec, tol=1e-10):
    """Check the model is a usable covariance; extract nu.

    Raises NonPositiveSpectrum if any sampled spectral eigenvalue is below
    -tol, DimensionError for the degenerate incompressible d = 1 case.
    """
    messages = []
    if spec.kind not in (INCOMPRESSIBLE, COMPRESSIBLE):
        raise DomainError(f"unknown covariance kind {spec.kind!r}")
    if spec.kind == INCOMPRESSIBLE:
        if spec.d < 2:
            raise DimensionError("divergence-free fields in d = 1 are spatially constant")
        if spec.g0 is None or spec.g0 < 0:
            raise DomainError("incompressible spec needs g0 >= 0")
        if spec.zeta is None or not (0.0 < spec.zeta < 2.0):
            raise DomainError("zeta must lie in (0, 2)")
    else:
        if spec.amp is None or spec.amp < 0 or spec.R is None or spec.R <= 0:
            raise DomainError("compressible spec needs amp >= 0 and R > 0")
        if spec.d != 1:
            raise UnsupportedEvaluation("compressible profile is implemented for d = 1")

    nu = spec.nu
    # PSD over a frequency sample: log-spaced radii x directions
    rng = np.random.default_rng(2024)
    radii = np.concatenate([[0.0], np.geomspace(1e-3, 1e3, 25)])
    psd_min = np.inf
    for r in radii:
        for _ in range(4):
            direction = rng.standard_normal(spec.d)
            nrm = np.linalg.norm(direction)
            xi = r * direction / nrm if nrm > 0 else np.zeros(spec.d)
            eigs = np.linalg.eigvalsh(q_hat(spec, xi))
            psd_min = min(psd_min, float(eigs.min()))
    psd_ok = psd_min >= -tol
    if not psd_ok:
        raise NonPositiveSpectrum(f"min sampled spectral eigenvalue {psd_min:.3e} < -{tol:.1e}")

    # isotropy at the origin: Q(0) = 2 nu I
    if spec.kind == COMPRESSIBLE:
        q0 = q_real(spec, np.zeros(spec.d))
        isotropy_ok = bool(np.allclose(q0, 2.0 * nu * np.eye(spec.d), atol=1e-12))
        support_ok = True
        Reff = spec.R / spec.scale_n
        for factor in (1.0, 1.0001, 1.5, 2.0):
            qv = q_real(spec, np.array([factor * Reff]))
            support_ok &= bool(np.all(qv == 0.0))
        if not support_ok:
            messages.append("compact support violated")
    else:
        # Q(0) known through the radial quadrature that defines nu
        isotropy_ok = True
        support_ok = True

    if not isotropy_ok:
        messages.append("Q(0) != 2 nu I")
    return ValidationReport(nu=nu, psd_min=psd_min, psd_ok=psd_ok,
                            isotropy_ok=isotropy_ok, support_ok=support_ok,
                            messages=messages)


# -- effective variance ----------------------------------------------------------

def veff_sq(spec, w=None):
    """Effective variance matrix V_eff^2 of the limiting additive equation.

    Incompressible: (2 pi)^{d/2} g(0) (1 - 1/d) I, the improper integral of Q
    under the angular-average reading of the zero mode.  Compressible: the
    quadrature int w(z) Q(z) dz over the support, with `w` the scalar
    stationary correlation profile (pass w = 1 for the plain integral of Q).
    """
    n = spec.scale_n
    if spec.kind == INCOMPRESSIBLE:
        g0val = float(_g_radial(spec, 0.0))
        return (2.0 * np.pi) ** (spec.d / 2.0) * g0val * (1.0 - 1.0 / spec.d) \
            * np.eye(spec.d) / n**spec.d
    if w is None:
        raise MissingProfile("compressible V_eff^2 needs the correlation profile w")
    if spec.d != 1:
        raise UnsupportedEvaluation("compressible profile is implemented for d = 1")
    Reff = spec.R / n
    nodes, weights = np.polynomial.legendre.leggauss(512)
    z = Reff * nodes
    qz = spec.amp * bump_cov_profile(np.abs(z) / Reff)
    wz = np.asarray(w(z), dtype=float) if callable(w) else float(w) * np.ones_like(z)
    val = float(np.sum(weights * wz * qz) * Reff)
    if val < -1e-12 * max(spec.amp, 1.0):
        raise NotPSD(f"quadrature returned {val:.3e} < 0; inconsistent profile")
    return np.array([[max(val, 0.0)]])


# -- stationary correlation profile (d = 1, compressible) ------------------------

def stationary_w_1d(spec, kappa):
    """Closed-form stationary two-point profile w(z) = 2(k+nu)/(2(k+nu)-Q(z)).

    Stationary translation-invariant solutions of the two-point equation obey
    2 (kappa + nu) w'' = (Q w)'' with w(+-inf) = 1; integrating twice gives the
    formula.  Cross-checked against the time-dependent two-point solver (see
    the correlation module tests) before use in any quadrature.
    """
    if spec.kind != COMPRESSIBLE or spec.d != 1:
        raise DomainError("stationary profile requires the compressible d = 1 model")
    if kappa <= 0:
        raise DomainError("kappa must be positive")
    nu = spec.nu
    denom0 = 2.0 * (kappa + nu) - spec.amp
    if denom0 <= 0:
        raise DomainError("requires Q(0) < 2 (kappa + nu)")
    Reff = spec.R / spec.scale_n

    def w(z):
        qz = spec.amp * bump_cov_profile(np.abs(np.asarray(z, dtype=float)) / Reff)
        return 2.0 * (kappa + nu) / (2.0 * (kappa + nu) - qz)

    return w


def stationary_w_torus(spec, kappa, L):
    """Periodised stationary profile on a torus of size L.

    The torus freezes the spatial mean of the stationary field at exactly 1,
    which rescales the profile by gamma = L / int_torus w = 1/(1 + c/L) with
    c = int (w - 1) dz.  The returned callable carries `gamma` as attribute.
    """
    w = stationary_w_1d(spec, kappa)
    Reff = spec.R / spec.scale_n
    c, _ = quad(lambda z: w(z) - 1.0, -Reff, Reff, limit=200)
    gamma = 1.0 / (1.0 + c / L)

    def w_torus(z):
        z = np.asarray(z, dtype=float)
        z = np.abs(z) % L
        z = np.minimum(z, L - z)
        return gamma * w(z)

    w_torus.gamma = gamma
    w_torus.excess = c
    return w_torus


def rescale(spec, n):
    """Spec of the diffusively rescaled noise V^n: Q^n(x) = Q(n x).

    Fourier side: Q-hat^n(xi) = n^-d Q-hat(xi / n); nu is unchanged.
    """
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    return dataclasses.replace(spec, scale_n=spec.scale_n * int(n))
