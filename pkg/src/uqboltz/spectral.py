"""Fourier representation on the periodic box: lattice, fields, projection, norms.

Conventions
-----------
Basis functions are exp(i*pi*n.v/L) on D_L = [-L, L]^d for n in the box
{-N..N}^d.  Coefficients are the normalized inner products
(2L)^-d * integral(f * conj(basis)), so the mass of a field is
(2L)^d * coeffs[0].  Norms are the unnormalized Lebesgue norms over D_L; this
module is the single place where the two conventions meet (the L2 norm carries
the factor (2L)^(d/2) in Parseval's identity).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import InputError, UsageError
from .kernel import Domain
from .quadrature import QuadratureRule


def mode_lattice(domain: Domain) -> np.ndarray:
    """All multi-indices of {-N..N}^d in lexicographic order (first index slowest)."""
    r = np.arange(-domain.N, domain.N + 1)
    mesh = np.meshgrid(*([r] * domain.d), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def lattice_shape(domain: Domain) -> tuple:
    return (2 * domain.N + 1,) * domain.d


def hermitian_flip(coeffs: np.ndarray) -> np.ndarray:
    """conj(c[-n]) arranged at position n."""
    return np.conj(coeffs[(slice(None, None, -1),) * coeffs.ndim])


@dataclass
class SpectralField:
    """Fourier coefficients of f_N on the box lattice (axis i holds n_i + N)."""

    domain: Domain
    coeffs: np.ndarray
    real_valued: bool = True

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape != lattice_shape(self.domain):
            raise UsageError(
                f"coefficient shape {self.coeffs.shape} does not match lattice {lattice_shape(self.domain)}")

    @property
    def flat(self) -> np.ndarray:
        return self.coeffs.reshape(-1)

    @property
    def mass(self) -> float:
        c0 = self.coeffs[(self.domain.N,) * self.domain.d]
        m = self.domain.volume * c0
        return float(m.real) if self.real_valued else m

    def hermitian_defect(self) -> float:
        """max |c[-n] - conj(c[n])| relative to max |c|."""
        scale = np.max(np.abs(self.coeffs))
        if scale == 0:
            return 0.0
        return float(np.max(np.abs(self.coeffs - hermitian_flip(self.coeffs))) / scale)

    def copy(self) -> "SpectralField":
        return SpectralField(self.domain, self.coeffs.copy(), self.real_valued)

    def __add__(self, other):
        _check_same(self, other)
        return SpectralField(self.domain, self.coeffs + other.coeffs,
                             self.real_valued and other.real_valued)

    def __sub__(self, other):
        _check_same(self, other)
        return SpectralField(self.domain, self.coeffs - other.coeffs,
                             self.real_valued and other.real_valued)

    def __mul__(self, scalar):
        real = self.real_valued and np.isrealobj(scalar)
        return SpectralField(self.domain, self.coeffs * scalar, real)

    __rmul__ = __mul__

    def resized(self, N: int) -> "SpectralField":
        """Truncate (Galerkin projection) or zero-pad to mode bound N."""
        return SpectralField(self.domain.with_N(N), resize_coeffs(self.coeffs, self.domain.N, N, self.domain.d),
                             self.real_valued)


def _check_same(a: SpectralField, b: SpectralField):
    if a.domain != b.domain:
        raise UsageError("fields live on different domains")


def resize_coeffs(coeffs: np.ndarray, N_from: int, N_to: int, d: int = 2) -> np.ndarray:
    """Truncate or zero-pad the trailing d axes of a coefficient array (leading axes kept)."""
    n = 2 * N_from + 1
    if coeffs.shape[coeffs.ndim - d:] != (n,) * d:
        raise UsageError(f"trailing axes {coeffs.shape} do not hold modes up to N={N_from}")
    lead = coeffs.shape[: coeffs.ndim - d]
    keep = (slice(None),) * len(lead)
    if N_to <= N_from:
        off = N_from - N_to
        return coeffs[keep + (slice(off, off + 2 * N_to + 1),) * d].copy()
    out = np.zeros(lead + (2 * N_to + 1,) * d, dtype=complex)
    off = N_to - N_from
    out[keep + (slice(off, off + n),) * d] = coeffs
    return out


# --------------------------------------------------------------------------
# projection and evaluation on the uniform grid


def _fft_slices(N: int, M: int):
    idx = np.arange(-N, N + 1) % M
    return idx


def grid_to_coeffs(values: np.ndarray, domain: Domain, N: int | None = None) -> np.ndarray:
    """Trapezoid projection of grid samples (trailing d axes, M each) onto modes |n_i| <= N."""
    N = domain.N if N is None else N
    d = domain.d
    M = values.shape[-1]
    if M < 2 * N + 1:
        raise UsageError(f"grid of {M} points cannot resolve modes up to N={N}")
    axes = tuple(range(values.ndim - d, values.ndim))
    F = np.fft.fftn(values, axes=axes) / M**d
    idx = _fft_slices(N, M)
    sign = (-1.0) ** np.arange(-N, N + 1)
    out = F
    for ax in axes:
        out = np.take(out, idx, axis=ax)
        shape = [1] * out.ndim
        shape[ax] = 2 * N + 1
        out = out * sign.reshape(shape)
    return out


def coeffs_to_grid(coeffs: np.ndarray, domain: Domain, M: int) -> np.ndarray:
    """Evaluate the truncated Fourier sum on the uniform M^d grid (trailing d axes)."""
    d = domain.d
    N = (coeffs.shape[-1] - 1) // 2
    if M < 2 * N + 1:
        raise UsageError(f"grid of {M} points cannot hold modes up to N={N}")
    lead = coeffs.shape[: coeffs.ndim - d]
    sign = (-1.0) ** np.arange(-N, N + 1)
    c = coeffs
    for ax in range(coeffs.ndim - d, coeffs.ndim):
        shape = [1] * c.ndim
        shape[ax] = 2 * N + 1
        c = c * sign.reshape(shape)
    full = np.zeros(lead + (M,) * d, dtype=complex)
    idx = _fft_slices(N, M)
    full[(Ellipsis,) + np.ix_(*([idx] * d))] = c
    axes = tuple(range(full.ndim - d, full.ndim))
    return np.fft.ifftn(full, axes=axes) * M**d


def project_initial(f0, z, domain: Domain, quad: QuadratureRule) -> SpectralField:
    """Project f0(v, z) onto the lattice by trapezoid quadrature on the uniform grid.

    ``f0`` is called with an array of points of shape (M, ..., M, d) and ``z``
    (omitted when z is None) and must return the sampled values.
    """
    pts = quad.grid_points(domain)
    vals = f0(pts) if z is None else f0(pts, z)
    vals = np.asarray(vals)
    if vals.shape != pts.shape[:-1]:
        vals = np.broadcast_to(vals, pts.shape[:-1])
    if not np.all(np.isfinite(vals)):
        raise InputError("initial data produced non-finite samples")
    real = bool(np.isrealobj(vals))
    return SpectralField(domain, grid_to_coeffs(vals, domain), real)


def evaluate_field(f: SpectralField, points) -> np.ndarray:
    """Truncated Fourier sum at arbitrary points (..., d)."""
    pts = np.asarray(points, dtype=float)
    dom = f.domain
    shape = pts.shape[:-1]
    pts = pts.reshape(-1, dom.d)
    n = np.arange(-dom.N, dom.N + 1)
    k = np.pi / dom.L
    if dom.d == 2:
        E1 = np.exp(1j * k * np.outer(pts[:, 0], n))
        E2 = np.exp(1j * k * np.outer(pts[:, 1], n))
        vals = np.einsum("pa,ab,pb->p", E1, f.coeffs, E2, optimize=True)
    else:
        E = [np.exp(1j * k * np.outer(pts[:, i], n)) for i in range(dom.d)]
        vals = np.einsum("pa,pb,pc,abc->p", *E, f.coeffs, optimize=True)
    return vals.reshape(shape)


def grid_values(f: SpectralField, quad: QuadratureRule) -> np.ndarray:
    vals = coeffs_to_grid(f.coeffs, f.domain, quad.grid_M)
    return vals.real if f.real_valued else vals


# --------------------------------------------------------------------------
# norms


def sobolev_weights(domain: Domain, k: int) -> np.ndarray:
    """sum over |nu| <= k of prod_i (pi n_i / L)^(2 nu_i), on the lattice."""
    xi2 = (np.pi * np.arange(-domain.N, domain.N + 1) / domain.L) ** 2
    grids = np.meshgrid(*([xi2] * domain.d), indexing="ij")
    w = np.zeros(lattice_shape(domain))
    for nu in itertools.product(range(k + 1), repeat=domain.d):
        if sum(nu) > k:
            continue
        term = np.ones_like(w)
        for g, p in zip(grids, nu):
            term = term * g**p
        w += term
    return w


def l2_norm(f: SpectralField) -> float:
    return float(np.sqrt(f.domain.volume * np.sum(np.abs(f.coeffs) ** 2)))


def hk_norm(f: SpectralField, k: int) -> float:
    w = sobolev_weights(f.domain, k)
    return float(np.sqrt(f.domain.volume * np.sum(w * np.abs(f.coeffs) ** 2)))


def norms(f: SpectralField, quad: QuadratureRule, k: int | None = None) -> dict:
    """L1, L2, H1, optional H^k and negative-part norms of a field.

    L2 and H^k use Parseval; L1 and the negative parts use the oversampled grid.
    """
    vals = coeffs_to_grid(f.coeffs, f.domain, quad.grid_M)
    w = (2.0 * f.domain.L / quad.grid_M) ** f.domain.d
    out = {
        "l1": float(np.sum(np.abs(vals)) * w),
        "l2": l2_norm(f),
        "h1": hk_norm(f, 1),
    }
    if f.real_valued:
        neg = np.maximum(-vals.real, 0.0)
        out["neg_l2"] = float(np.sqrt(np.sum(neg**2) * w))
        out["neg_l1"] = float(np.sum(neg) * w)
    else:
        out["neg_l2"] = out["neg_l1"] = float("nan")
    if k is not None:
        out["hk"] = hk_norm(f, k)
    return out


def grid_l2(f: SpectralField, quad: QuadratureRule) -> float:
    """L2 norm by trapezoid quadrature on the grid (independent of Parseval)."""
    vals = coeffs_to_grid(f.coeffs, f.domain, quad.grid_M)
    w = (2.0 * f.domain.L / quad.grid_M) ** f.domain.d
    return float(np.sqrt(np.sum(np.abs(vals) ** 2) * w))


# --------------------------------------------------------------------------


def constant_field(domain: Domain, c: float) -> SpectralField:
    coeffs = np.zeros(lattice_shape(domain), dtype=complex)
    coeffs[(domain.N,) * domain.d] = c
    return SpectralField(domain, coeffs, True)


def random_real_field(domain: Domain, rng: np.random.Generator, decay: float = 0.3,
                      mean: float = 0.0) -> SpectralField:
    """Hermitian-symmetric random coefficients with Gaussian spectral decay."""
    shape = lattice_shape(domain)
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    lat = mode_lattice(domain).reshape(shape + (domain.d,))
    c *= np.exp(-decay * np.sum(lat.astype(float) ** 2, axis=-1) / max(domain.N, 1))
    c = 0.5 * (c + hermitian_flip(c))
    c[(domain.N,) * domain.d] = mean / domain.volume + c[(domain.N,) * domain.d].real
    return SpectralField(domain, c, True)
