"""Legendre chaos in the random variable z ~ U[-1, 1] and the stochastic Galerkin system."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, UsageError
from .kernel import Domain
from .quadrature import QuadratureRule, gauss_legendre
from .spectral import SpectralField, coeffs_to_grid, lattice_shape
from .weights import WeightTable


def legendre_table(K: int, z, deriv: int = 0) -> np.ndarray:
    """Normalized Legendre polynomials (or their deriv-th derivatives) for k = 0..K.

    Returns an array of shape (K + 1,) + shape(z).  Values use the three-term
    recurrence; derivatives use the differentiated recurrence
    (k+1) P_{k+1}^(j) = (2k+1) (z P_k^(j) + j P_k^(j-1)) - k P_{k-1}^(j).
    """
    if K < 0 or deriv < 0:
        raise DomainError("order and derivative index must be nonnegative")
    z = np.asarray(z, dtype=float)
    P = np.zeros((deriv + 1, K + 1) + z.shape)
    P[0, 0] = 1.0
    if K >= 1:
        P[0, 1] = z
    for k in range(1, K):
        P[0, k + 1] = ((2 * k + 1) * z * P[0, k] - k * P[0, k - 1]) / (k + 1)
    for j in range(1, deriv + 1):
        if K >= 1:
            P[j, 1] = 1.0 if j == 1 else 0.0
        for k in range(1, K):
            P[j, k + 1] = ((2 * k + 1) * (z * P[j, k] + j * P[j - 1, k]) - k * P[j, k - 1]) / (k + 1)
    scale = np.sqrt(2.0 * np.arange(K + 1) + 1.0).reshape((K + 1,) + (1,) * z.ndim)
    return P[deriv] * scale


def legendre_psi(k: int, z):
    """Psi^k(z) = sqrt(2k+1) P_k(z), orthonormal for the density 1/2 on [-1, 1]."""
    if k < 0:
        raise DomainError("gPC index must be nonnegative")
    out = legendre_table(k, z)[k]
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class STensor:
    """S[k, i, j] = E[lambda(z) Psi^k Psi^i Psi^j]."""

    order: int
    entries: np.ndarray

    def symmetry_defect(self) -> float:
        S = self.entries
        perms = [(0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]
        return float(max(np.max(np.abs(S - S.transpose(p))) for p in perms))


def build_s_tensor(lam, K: int, quad: QuadratureRule) -> STensor:
    """Triple products by n_z-point Gauss-Legendre quadrature (density folded into weights)."""
    if K < 0:
        raise DomainError("gPC order K must be nonnegative")
    deg = getattr(lam, "degree", None)
    if deg is not None:
        need = math.ceil((3 * K + deg + 1) / 2)
        if quad.n_z < need:
            raise DomainError(f"n_z={quad.n_z} is too small for exact triple products (need {need})")
    z, w = quad.z_rule()
    psi = legendre_table(K, z)
    lw = np.asarray(lam(z), dtype=float) * w
    S = np.einsum("q,kq,iq,jq->kij", lw, psi, psi, psi)
    return STensor(K, S)


@dataclass
class GpcField:
    """Velocity coefficients for every chaos index: coeffs[k] is f^k on the lattice."""

    domain: Domain
    coeffs: np.ndarray
    real_valued: bool = True

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape[1:] != lattice_shape(self.domain):
            raise UsageError("gPC coefficient array does not match the lattice")

    @property
    def order(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def modes(self) -> list:
        return [SpectralField(self.domain, c, self.real_valued) for c in self.coeffs]

    @classmethod
    def from_modes(cls, modes) -> "GpcField":
        modes = list(modes)
        dom = modes[0].domain
        if any(m.domain != dom for m in modes):
            raise UsageError("all gPC modes must share one domain")
        return cls(dom, np.stack([m.coeffs for m in modes]), all(m.real_valued for m in modes))

    def copy(self) -> "GpcField":
        return GpcField(self.domain, self.coeffs.copy(), self.real_valued)

    def __add__(self, other):
        _check_pair(self, other)
        return GpcField(self.domain, self.coeffs + other.coeffs, self.real_valued and other.real_valued)

    def __sub__(self, other):
        _check_pair(self, other)
        return GpcField(self.domain, self.coeffs - other.coeffs, self.real_valued and other.real_valued)

    def __mul__(self, scalar):
        return GpcField(self.domain, self.coeffs * scalar, self.real_valued and np.isrealobj(scalar))

    __rmul__ = __mul__


def _check_pair(a: GpcField, b: GpcField):
    if a.domain != b.domain or a.order != b.order:
        raise UsageError("gPC fields differ in domain or order")


def gpc_collision_rhs(G: WeightTable, S: STensor, F: GpcField) -> GpcField:
    """out^k = sum_{i,j} S[k,i,j] Q(F^j, F^i), with F^i on the f slot and F^j on the g slot.

    The velocity contraction for each j is shared by all (i, k); the sum over j
    runs in a fixed order so results do not depend on scheduling.
    """
    if S.order != F.order:
        raise UsageError(f"tensor order {S.order} differs from field order {F.order}")
    if not (F.domain.same_geometry(G.domain) and F.domain.N == G.domain.N):
        raise UsageError("field and weight table live on different domains")
    Gd, mi = G.diagonal_form()
    K1 = F.order + 1
    flat = F.coeffs.reshape(K1, -1)
    padded = np.concatenate([flat, np.zeros((K1, 1), dtype=complex)], axis=1)
    out = np.zeros_like(flat)
    for j in range(K1):
        Sj = S.entries[:, :, j]
        if not np.any(Sj):
            continue
        Oj = flat @ (Gd * padded[j][mi])  # [i, n]
        out += Sj @ Oj
    return GpcField(F.domain, out.reshape(F.coeffs.shape), F.real_valued)


def reconstruct(F: GpcField, z: float) -> SpectralField:
    if not -1.0 - 1e-14 <= z <= 1.0 + 1e-14:
        raise DomainError("z must lie in [-1, 1]")
    psi = legendre_table(F.order, z)
    return SpectralField(F.domain, np.tensordot(psi, F.coeffs, axes=(0, 0)), F.real_valued)


def project_z(field_at, K: int, quad: QuadratureRule) -> GpcField:
    """Galerkin projection in z of a z-dependent spectral field.

    ``field_at(z)`` returns a SpectralField; the chaos coefficients are
    sum_q w_q Psi^k(z_q) field_at(z_q) on the n_z Gauss nodes.
    """
    z, w = quad.z_rule()
    psi = legendre_table(K, z)
    samples = [field_at(float(zq)) for zq in z]
    dom = samples[0].domain
    stack = np.stack([s.coeffs for s in samples])
    coeffs = np.tensordot(psi * w, stack, axes=(1, 0))
    return GpcField(dom, coeffs, all(s.real_valued for s in samples))


def statistics(F: GpcField, quad: QuadratureRule) -> dict:
    """Mean field (chaos mode 0) and pointwise variance on the projection grid."""
    vals = coeffs_to_grid(F.coeffs[1:], F.domain, quad.grid_M) if F.order >= 1 else None
    shape = (quad.grid_M,) * F.domain.d
    var = np.zeros(shape) if vals is None else np.sum(np.abs(vals) ** 2, axis=0)
    return {"mean": F.modes[0], "variance_field": var}


def sample_variance(F: GpcField, quad: QuadratureRule, n: int = 16) -> np.ndarray:
    """Variance on the grid from reconstructions at n Gauss nodes (independent estimator)."""
    z, w = gauss_legendre(n)
    w = 0.5 * w
    vals = np.stack([coeffs_to_grid(reconstruct(F, float(zq)).coeffs, F.domain, quad.grid_M) for zq in z])
    mean = np.tensordot(w, vals, axes=(0, 0))
    return np.tensordot(w, np.abs(vals - mean) ** 2, axes=(0, 0))
