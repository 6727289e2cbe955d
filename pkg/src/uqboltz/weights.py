"""Collision weights G(l, m) and the direct-sum collision operator.

For d = 2 the weight is

    G(l, m) = sum_r w_r r Phi(r) sum_j (2 pi / n_theta) exp(-i pi r m.qhat_j / L) H_{l+m}(r, theta_j)

where H_s(r, theta) is the sigma-integral of b(sigma.qhat) (exp(i pi s.(q - r sigma) / 2L) - 1).
Writing s = |s| (cos g, sin g), rho = pi r |s| / 2L and psi for the angle between
sigma and qhat, the sigma-integral is evaluated through the Jacobi-Anger series

    int b(cos psi) exp(-i rho cos(theta - g + psi)) dpsi = sum_k (-i)^k J_k(rho) beta_k exp(ik(theta - g))

with beta_k = int b(cos psi) cos(k psi) dpsi over the support arc.  The Bessel
coefficients come from an FFT of exp(-i rho cos alpha) and depend on |s| only, so
they are shared between all s on a lattice circle.  H_0 is set to zero exactly,
which makes G(l, -l) = 0 to round-off.

The contraction over (r, theta) is done with matrix products, one tile of m at a
time, keeping only the rows s = l + m that the tile needs.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import CacheMismatchError, CapabilityError, DomainError, QuadraturePrecisionError, UsageError
from .kernel import Domain, KernelSpec, digest
from .quadrature import QuadratureRule, gauss_legendre
from .spectral import SpectralField, lattice_shape, mode_lattice

CACHE_MAGIC = b"UQBZWGT\x00"
CACHE_VERSION = 1
_HEADER = struct.Struct("<8sIIIdd64sIIId")


def kernel_hash(spec: KernelSpec, domain: Domain, quad: QuadratureRule) -> str:
    """Digest of the lambda = 1 kernel, the truncation geometry and the rule sizes.

    N is deliberately left out: entries do not depend on the mode bound, so a
    table computed for a larger N can serve any smaller one.
    """
    geom = {"d": domain.d, "L": float(domain.L), "R": float(domain.R)}
    sizes = {"n_r": quad.n_r, "n_theta": quad.n_theta, "n_sigma": quad.n_sigma}
    return digest(spec.describe(), geom, sizes)


@dataclass
class WeightTable:
    """G(l, m) over the box lattice, rows l and columns m in lexicographic order."""

    domain: Domain
    entries: np.ndarray
    kernel_hash: str
    quad_tol: float = float("nan")
    quad: QuadratureRule | None = None
    part: str = "full"
    _diag: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        P = self.domain.n_modes
        self.entries = np.asarray(self.entries, dtype=complex)
        if self.entries.shape != (P, P):
            raise UsageError(f"weight table must be {P}x{P}, got {self.entries.shape}")
        self.entries.setflags(write=False)

    @property
    def N(self) -> int:
        return self.domain.N

    def as_blocks(self) -> np.ndarray:
        """View with one axis per index component: G[l1, l2, m1, m2] (offset N)."""
        s = lattice_shape(self.domain)
        return self.entries.reshape(s + s)

    def entry(self, l, m) -> complex:
        N = self.domain.N
        s = lattice_shape(self.domain)
        li = np.ravel_multi_index(tuple(int(x) + N for x in l), s)
        mi = np.ravel_multi_index(tuple(int(x) + N for x in m), s)
        return complex(self.entries[li, mi])

    def restrict(self, N: int) -> "WeightTable":
        """Sub-table for a smaller mode bound (entries do not depend on N)."""
        if N > self.domain.N:
            raise UsageError(f"cannot restrict a table for N={self.domain.N} to N={N}")
        if N == self.domain.N:
            return self
        off = self.domain.N - N
        sl = slice(off, off + 2 * N + 1)
        d = self.domain.d
        blocks = self.as_blocks()[(sl,) * (2 * d)]
        P = (2 * N + 1) ** d
        return WeightTable(self.domain.with_N(N), blocks.reshape(P, P).copy(), self.kernel_hash,
                           self.quad_tol, self.quad, self.part)

    def diagonal_form(self):
        """(Gd, mi): Gd[l, n] = G(l, n - l) and mi[l, n] = flat index of n - l.

        Pairs with n - l outside the lattice point at a padding slot P holding zero
        so gathers need no masking.
        """
        if self._diag is None:
            dom = self.domain
            N, d = dom.N, dom.d
            lat = mode_lattice(dom)
            P = len(lat)
            diff = lat[None, :, :] - lat[:, None, :]  # [l, n] -> n - l
            inside = np.all(np.abs(diff) <= N, axis=-1)
            flat = np.zeros((P, P), dtype=np.int64)
            mult = 1
            for ax in range(d - 1, -1, -1):
                flat += (diff[..., ax] + N) * mult
                mult *= 2 * N + 1
            mi = np.where(inside, flat, P)
            rows = np.broadcast_to(np.arange(P)[:, None], (P, P))
            Gd = np.where(inside, self.entries[rows, np.minimum(mi, P - 1)], 0.0)
            self._diag = (Gd, mi.astype(np.intp))
        return self._diag


def _check_domain(G: WeightTable, f: SpectralField):
    if not (f.domain.same_geometry(G.domain) and f.domain.N == G.domain.N):
        raise UsageError(f"field domain {f.domain.describe()} does not match weight table "
                         f"{G.domain.describe()}")


def _pad(x: np.ndarray) -> np.ndarray:
    return np.concatenate([x, np.zeros(1, dtype=complex)])


def collision_bilinear(G: WeightTable, g: SpectralField, f: SpectralField) -> SpectralField:
    """Spectral Q(g, f): out[n] = sum over l + m = n of G(l, m) f_l g_m.

    The column index m of G carries the factor g evaluated at the post- and
    pre-collision partner velocities, the row index l carries f.
    """
    _check_domain(G, f)
    _check_domain(G, g)
    Gd, mi = G.diagonal_form()
    out = f.flat @ (Gd * _pad(g.flat)[mi])
    return SpectralField(G.domain, out.reshape(f.coeffs.shape), f.real_valued and g.real_valued)


def collision_rhs(G: WeightTable, f: SpectralField) -> SpectralField:
    """Q_n = sum over l + m = n of G(l, m) f_l f_m (Galerkin-truncated)."""
    return collision_bilinear(G, f, f)


# --------------------------------------------------------------------------
# precomputation


def angular_moments(spec: KernelSpec, kmax: int, n_sigma: int) -> np.ndarray:
    """beta_k = int over [-pi/2, pi/2] of b0_sym(cos psi) cos(k psi), k = 0..kmax."""
    n = max(n_sigma, kmax + 16)
    psi, w = gauss_legendre(n, -0.5 * math.pi, 0.5 * math.pi)
    b = spec.b_base(np.cos(psi)) * w
    k = np.arange(kmax + 1)
    return np.cos(np.outer(k, psi)) @ b


def _bessel_order_bound(rho_max: float) -> int:
    return int(math.ceil(rho_max + 12.0 * rho_max ** (1.0 / 3.0) + 10.0))


def _bessel_coefficients(rho: np.ndarray, kmax: int) -> np.ndarray:
    """(-i)^k J_k(rho) for k = -kmax..kmax, one row per rho, via FFT."""
    nf = 1 << int(math.ceil(math.log2(2 * kmax + 2)))
    nf = max(nf, 64)
    alpha = 2.0 * math.pi * np.arange(nf) / nf
    c = np.fft.fft(np.exp(-1j * np.outer(rho, np.cos(alpha))), axis=1) / nf
    k = np.arange(-kmax, kmax + 1)
    return c[:, k % nf]


class _InnerSweep:
    """Evaluates H_s(r, theta_j) for every s in the doubled box {-2N..2N}^2.

    Everything that does not depend on r (the rotation factors beta_k e^{-ik gamma_s},
    the grouping of s by |s|^2) is prepared once.
    """

    def __init__(self, domain, theta, beta, kmax, part):
        N = domain.N
        self.L = domain.L
        self.part = part
        self.kmax = kmax
        self.theta = theta
        self.beta0 = beta[0]
        rng = np.arange(-2 * N, 2 * N + 1)
        self.rng = rng
        s1, s2 = (a.ravel() for a in np.meshgrid(rng, rng, indexing="ij"))
        self.n_s = len(s1)
        sq = s1 * s1 + s2 * s2
        self.zero = sq == 0
        self.uniq, self.inv = np.unique(sq, return_inverse=True)
        if part != "loss":
            k = np.arange(-kmax, kmax + 1)
            gamma = np.arctan2(s2, s1)
            self.rot = beta[np.abs(k)][None, :] * np.exp(-1j * np.outer(gamma, k))

    def __call__(self, r: float) -> np.ndarray:
        n_theta = len(self.theta)
        if self.part == "loss":
            return np.full((self.n_s, n_theta), -self.beta0, dtype=complex)
        kmax, L = self.kmax, self.L
        rho_u = math.pi * r * np.sqrt(self.uniq) / (2.0 * L)
        D = _bessel_coefficients(rho_u, kmax)[self.inv]
        D *= self.rot
        # fold frequencies onto the n_theta-point circle
        width = D.shape[1]
        c = -(-width // n_theta)
        if c * n_theta != width:
            D = np.concatenate([D, np.zeros((self.n_s, c * n_theta - width), dtype=complex)], axis=1)
        folded = np.roll(D.reshape(self.n_s, c, n_theta).sum(axis=1), (-kmax) % n_theta, axis=1)
        H = np.fft.ifft(folded, axis=1)
        H *= n_theta
        a = math.pi * r / (2.0 * L)
        p1 = np.exp(1j * a * np.outer(self.rng, np.cos(self.theta)))
        p2 = np.exp(1j * a * np.outer(self.rng, np.sin(self.theta)))
        H *= (p1[:, None, :] * p2[None, :, :]).reshape(self.n_s, n_theta)
        if self.part == "full":
            H -= self.beta0
            H[self.zero] = 0.0
        return H


def _tiles(N: int):
    """Square blocks of m covering every column with m_1 >= 0."""
    n = 2 * N + 1
    b = max(1, int(math.ceil(n / 7)))
    starts = list(range(-N, N + 1, b))
    for a1 in starts:
        if a1 + b - 1 < 0:
            continue
        for a2 in starts:
            yield a1, min(b, N + 1 - a1), a2, min(b, N + 1 - a2)


def _compute_entries(spec: KernelSpec, domain: Domain, quad: QuadratureRule, part: str) -> np.ndarray:
    N, L, R = domain.N, domain.L, domain.R
    r_nodes, r_w = quad.radial(R)
    theta, dtheta = quad.angular()
    W = r_w * r_nodes * spec.phi(r_nodes) * dtheta
    rho_max = math.pi * R * 2.0 * N * math.sqrt(2.0) / (2.0 * L)
    kmax = _bessel_order_bound(rho_max)
    beta = angular_moments(spec, kmax, quad.n_sigma)
    sweep = _InnerSweep(domain, theta, beta, kmax, part)

    n1 = 2 * N + 1
    n2 = 4 * N + 1
    P = n1 * n1
    tiles = list(_tiles(N))
    acc = []
    for a1, b1, a2, b2 in tiles:
        acc.append(np.zeros((b1 * b2, (b1 + 2 * N) * (b2 + 2 * N)), dtype=complex))
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    modes = np.arange(-N, N + 1)
    for ir, r in enumerate(r_nodes):
        H = sweep(r).reshape(n2, n2, -1)
        e1 = np.exp(-1j * math.pi * r / L * np.outer(modes, cos_t)) * W[ir]
        e2 = np.exp(-1j * math.pi * r / L * np.outer(modes, sin_t))
        for t, (a1, b1, a2, b2) in enumerate(tiles):
            i1, i2 = a1 + N, a2 + N
            E = (e1[i1:i1 + b1, None, :] * e2[None, i2:i2 + b2, :]).reshape(b1 * b2, -1)
            # s_i ranges over a_i - N .. a_i + b_i - 1 + N, i.e. doubled-box offset a_i + N
            Hs = H[i1:i1 + b1 + 2 * N, i2:i2 + b2 + 2 * N].reshape(-1, H.shape[-1])
            acc[t] += E @ Hs.T

    entries = np.empty((P, P), dtype=complex)
    lat = mode_lattice(domain)
    for t, (a1, b1, a2, b2) in enumerate(tiles):
        m1, m2 = (x.ravel() for x in np.meshgrid(np.arange(a1, a1 + b1), np.arange(a2, a2 + b2),
                                                  indexing="ij"))
        # local s index for s = l + m
        j1 = lat[None, :, 0] + m1[:, None] - (a1 - N)
        j2 = lat[None, :, 1] + m2[:, None] - (a2 - N)
        loc = j1 * (b2 + 2 * N) + j2
        vals = np.take_along_axis(acc[t], loc, axis=1)  # [m_local, l]
        cols = (m1 + N) * n1 + (m2 + N)
        entries[:, cols] = vals.T
    # remaining columns from the real-kernel symmetry G(l, m) = conj G(-l, -m);
    # -n sits at flat position P - 1 - index(n)
    neg = np.arange(P)[lat[:, 0] < 0]
    entries[:, neg] = np.conj(entries[::-1, P - 1 - neg])
    return entries


def precompute_weights(spec: KernelSpec, domain: Domain, quad: QuadratureRule, part: str = "full",
                       refine: bool = False, quad_tol: float = 1e-10) -> WeightTable:
    """Tabulate G(l, m) for the lambda = 1 kernel.

    ``part`` selects the full weight, only its gain term or only its loss term.
    With ``refine`` the table is recomputed with doubled radial, angular and
    arc rules; an entry moving by more than ``quad_tol`` times the largest entry
    raises QuadraturePrecisionError naming the worst (l, m).
    """
    if not spec.symmetrized:
        raise DomainError("weights require a symmetrized angular kernel")
    if part not in ("full", "gain", "loss"):
        raise UsageError(f"unknown weight part {part!r}")
    if domain.d != 2:
        raise CapabilityError("collision weights are implemented for d = 2 only")
    entries = _compute_entries(spec, domain, quad, part)
    tol = float("nan")
    if refine:
        fine = _compute_entries(spec, domain, quad.refined(2), part)
        diff = np.abs(fine - entries)
        scale = max(float(np.max(np.abs(fine))), 1e-300)
        worst = np.unravel_index(int(np.argmax(diff)), diff.shape)
        tol = float(diff[worst] / scale)
        if tol > quad_tol:
            lat = mode_lattice(domain)
            l, m = tuple(int(x) for x in lat[worst[0]]), tuple(int(x) for x in lat[worst[1]])
            raise QuadraturePrecisionError(
                f"weight G{l},{m} changed by {tol:.3e} (relative) under refinement, tolerance {quad_tol:.1e}",
                index=(l, m), change=tol)
    return WeightTable(domain, entries, kernel_hash(spec, domain, quad), tol, quad, part)


# --------------------------------------------------------------------------
# binary cache


def save_weights(G: WeightTable, path) -> None:
    q = G.quad or QuadratureRule()
    header = _HEADER.pack(CACHE_MAGIC, CACHE_VERSION, G.domain.d, G.domain.N, float(G.domain.L),
                          float(G.domain.R), G.kernel_hash.encode("ascii"), q.n_r, q.n_theta,
                          q.n_sigma, float(G.quad_tol))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(G.entries, dtype="<c16").tobytes())


def read_header(path) -> dict:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise CacheMismatchError(f"{path}: truncated weight cache header")
    magic, version, d, N, L, R, h, n_r, n_theta, n_sigma, tol = _HEADER.unpack(raw)
    if magic != CACHE_MAGIC:
        raise CacheMismatchError(f"{path}: not a weight cache file")
    if version != CACHE_VERSION:
        raise CacheMismatchError(f"{path}: cache version {version}, expected {CACHE_VERSION}")
    return {"d": d, "N": N, "L": L, "R": R, "kernel_hash": h.decode("ascii"),
            "n_r": n_r, "n_theta": n_theta, "n_sigma": n_sigma, "quad_tol": tol}


def load_weights(path, expected_hash: str | None = None, N: int | None = None,
                 force: bool = False) -> WeightTable:
    """Read a cache file; reject a kernel/geometry/rule digest mismatch unless ``force``.

    With ``N`` smaller than the stored bound the restricted table is returned.
    """
    hdr = read_header(path)
    if expected_hash is not None and hdr["kernel_hash"] != expected_hash and not force:
        raise CacheMismatchError(
            f"{path}: cached weights were built for a different kernel or geometry "
            f"(hash {hdr['kernel_hash'][:12]} vs {expected_hash[:12]}); use --force to override")
    d, Nc = hdr["d"], hdr["N"]
    P = (2 * Nc + 1) ** d
    data = np.fromfile(path, dtype="<c16", offset=_HEADER.size)
    if data.size != P * P:
        raise CacheMismatchError(f"{path}: expected {P * P} entries, found {data.size}")
    domain = Domain(d, hdr["L"], hdr["R"], Nc)
    quad = QuadratureRule(n_r=hdr["n_r"], n_theta=hdr["n_theta"], n_sigma=hdr["n_sigma"])
    G = WeightTable(domain, data.reshape(P, P).astype(complex), hdr["kernel_hash"],
                    hdr["quad_tol"], quad)
    if N is not None:
        if N > Nc:
            raise CacheMismatchError(f"{path}: cache holds N={Nc}, requested N={N}")
        G = G.restrict(N)
    return G
