"""Norm hierarchy in (v, z), initial-data checks, bilinear bounds and convergence studies."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapabilityError, UsageError
from .gpc import GpcField, legendre_table
from .kernel import Domain, KernelSpec, angular_l1
from .quadrature import QuadratureRule, default_rule
from .spectral import (SpectralField, coeffs_to_grid, l2_norm, norms,
                       project_initial, sobolev_weights)


def chebyshev_points(n: int = 33) -> np.ndarray:
    """Chebyshev extreme points cos(pi j / (n - 1)) in increasing order."""
    return np.cos(math.pi * np.arange(n - 1, -1, -1) / (n - 1))


@dataclass
class DiagnosticsRecord:
    t: float
    mass: float
    l1: float
    l2: float
    h1: float
    neg_l2: float
    mass_drift: float = 0.0
    error: float = float("nan")
    breakdown: dict = field(default_factory=dict)

    def row(self, N: int) -> dict:
        return {"N": N, "t": self.t, "mass": self.mass, "l1": self.l1, "l2": self.l2, "h1": self.h1,
                "neg_l2": self.neg_l2, "error": self.error, "mass_drift": self.mass_drift}


def _grid_norms(vals: np.ndarray, w: float) -> tuple:
    """L1 and L2 of the negative part for real grid samples on the trailing axes."""
    axes = tuple(range(vals.ndim - 2, vals.ndim))
    l1 = np.sum(np.abs(vals), axis=axes) * w
    neg = np.maximum(-vals, 0.0)
    return l1, np.sqrt(np.sum(neg * neg, axis=axes) * w)


def record_for(state, t: float, quad: QuadratureRule, reference: DiagnosticsRecord | None = None,
               z_check=None) -> DiagnosticsRecord:
    """Diagnostics of one snapshot.

    For a gPC state the norms are sups over the z check points (33 Chebyshev
    points by default) of the reconstructed fields; the mass is that of the
    mean (chaos mode 0) and per-mode masses go into the breakdown.  Mass drift
    is measured against ``reference``; for gPC states every mode's drift is
    scaled by the reference mean mass.
    """
    if isinstance(state, SpectralField):
        nr = norms(state, quad)
        rec = DiagnosticsRecord(t, state.mass, nr["l1"], nr["l2"], nr["h1"], nr["neg_l2"])
        if reference is not None and reference.mass != 0:
            rec.mass_drift = abs(rec.mass - reference.mass) / abs(reference.mass)
        return rec
    if not isinstance(state, GpcField):
        raise UsageError(f"cannot record diagnostics for {type(state).__name__}")
    dom = state.domain
    zs = chebyshev_points() if z_check is None else np.asarray(z_check, float)
    psi = legendre_table(state.order, zs)  # (K+1, nz)
    grid = coeffs_to_grid(state.coeffs, dom, quad.grid_M)  # (K+1, M, M)
    recon = np.tensordot(psi, grid, axes=(0, 0)).real  # (nz, M, M)
    w = (2.0 * dom.L / quad.grid_M) ** dom.d
    l1, neg = _grid_norms(recon, w)
    flat = state.coeffs.reshape(state.order + 1, -1)
    rc = psi.T @ flat  # (nz, P)
    wts = sobolev_weights(dom, 1).reshape(-1)
    l2 = np.sqrt(dom.volume * np.sum(np.abs(rc) ** 2, axis=1))
    h1 = np.sqrt(dom.volume * np.sum(wts * np.abs(rc) ** 2, axis=1))
    center = (slice(None),) + (dom.N,) * dom.d
    mode_mass = (dom.volume * state.coeffs[center]).real
    rec = DiagnosticsRecord(t, float(mode_mass[0]), float(l1.max()), float(l2.max()), float(h1.max()),
                            float(neg.max()))
    rec.breakdown = {"mode_mass": mode_mass.tolist(),
                     "mode_l2": [float(x) for x in np.sqrt(dom.volume * np.sum(np.abs(flat) ** 2, axis=1))]}
    if reference is not None:
        m0 = np.asarray(reference.breakdown["mode_mass"])
        scale = abs(m0[0]) if m0[0] != 0 else 1.0
        rec.mass_drift = float(np.max(np.abs(mode_mass - m0)) / scale)
    return rec


# --------------------------------------------------------------------------
# bilinear bound


def gain_jacobian_factor(d: int = 2, n: int = 181, h: float = 1e-6) -> float:
    """1 / min det of v -> v' at fixed (v_*, sigma) over angles in the support [0, pi/2].

    v' = (v + v_*)/2 + |v - v_*| sigma / 2; the determinant is computed by
    central differences, so the factor is measured rather than assumed.
    """
    if d != 2:
        raise CapabilityError("the Jacobian factor is measured for d = 2")
    sigma = np.array([1.0, 0.0])

    def vprime(v):
        return 0.5 * v + 0.5 * np.linalg.norm(v) * sigma  # v_* = 0

    dets = []
    for th in np.linspace(0.0, 0.5 * math.pi, n):
        v = np.array([math.cos(th), math.sin(th)])
        J = np.empty((2, 2))
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            J[:, i] = (vprime(v + e) - vprime(v - e)) / (2 * h)
        dets.append(abs(np.linalg.det(J)))
    return 1.0 / min(dets)


def bilinear_constant(spec: KernelSpec, domain: Domain, p: float = 2.0, part: str = "full",
                      lam_max: float = 1.0, geometry: float | None = None) -> float:
    """Bound constant for ||Q(g, f)||_p <= C ||g||_1 ||f||_p.

    gain: C_geo^(1/p) * sup_z ||b(., z)||_{L1(S^1)} * sup_{|q| <= R} Phi
    loss: sup_z ||b(., z)||_{L1(S^1)} * sup_{|q| <= R} Phi
    ``full`` adds both.
    """
    C_geo = gain_jacobian_factor(domain.d) if geometry is None else geometry
    r = np.linspace(0.0, domain.R, 513)
    phi_sup = float(np.max(spec.phi(r)))
    base = angular_l1(spec, domain.d) * abs(lam_max) * phi_sup
    gain = C_geo ** (1.0 / p) * base
    if part == "gain":
        return gain
    if part == "loss":
        return base
    return gain + base


@dataclass
class BoundCheck:
    part: str
    constant: float
    max_ratio: float
    violations: int
    ratios: list

    @property
    def passed(self) -> bool:
        return self.violations == 0


def bilinear_bound_check(G, spec: KernelSpec, quad: QuadratureRule, n_pairs: int = 50,
                         rng: np.random.Generator | None = None, geometry: float | None = None,
                         lam_max: float = 1.0) -> BoundCheck:
    """Ratios ||Q(g, f)||_2 / (||g||_1 ||f||_2) for random real field pairs against the bound."""
    from .spectral import random_real_field
    from .weights import collision_bilinear

    rng = np.random.default_rng(0) if rng is None else rng
    C = bilinear_constant(spec, G.domain, 2.0, G.part, lam_max, geometry)
    ratios = []
    for _ in range(n_pairs):
        g = random_real_field(G.domain, rng, decay=rng.uniform(0.05, 1.0), mean=rng.uniform(-1, 1))
        f = random_real_field(G.domain, rng, decay=rng.uniform(0.05, 1.0), mean=rng.uniform(-1, 1))
        q = collision_bilinear(G, g, f)
        ratios.append(l2_norm(q) / (norms(g, quad)["l1"] * l2_norm(f)))
    ratios = [float(x) for x in ratios]
    return BoundCheck(G.part, C, max(ratios), sum(x > C for x in ratios), ratios)


# --------------------------------------------------------------------------
# mixed (v, z) norms


@dataclass
class MixedNormReport:
    r: int
    z_grid: np.ndarray
    values: list  # values[l] = {"l1", "l2", "h1"}: sup over z of the l-th z-derivative norm
    totals: dict  # sum over l of values[l]
    pointwise_totals: dict  # sup over z of the sum over l (the seminorm-style total)

    def total(self, name: str) -> float:
        return self.totals[name]


def _derivative_grids(coeffs: np.ndarray, table: np.ndarray, dom, quad):
    """Fields sum_k table[k, z] coeffs[k] in coefficient and grid form for every z."""
    flat = coeffs.reshape(coeffs.shape[0], -1)
    rc = table.T @ flat
    grid = coeffs_to_grid(coeffs, dom, quad.grid_M)
    vals = np.tensordot(table, grid, axes=(0, 0))
    return rc, vals


def _norm_rows(rc, vals, dom, quad):
    w = (2.0 * dom.L / quad.grid_M) ** dom.d
    l1 = np.sum(np.abs(vals), axis=(-2, -1)) * w
    l2 = np.sqrt(dom.volume * np.sum(np.abs(rc) ** 2, axis=1))
    h1 = np.sqrt(dom.volume * np.sum(sobolev_weights(dom, 1).reshape(-1) * np.abs(rc) ** 2, axis=1))
    return {"l1": l1, "l2": l2, "h1": h1}


def mixed_norms(F, r: int, z_grid=None, quad: QuadratureRule | None = None) -> MixedNormReport:
    """sup over z of ||d^l/dz^l f(., z)|| in L1, L2, H1 for l = 0..r and their sums.

    ``F`` is a GpcField (derivatives from the differentiated Legendre basis) or
    a pair (z_nodes, list of SpectralField) from a collocation ensemble
    (derivatives of the polynomial interpolant through the nodes).
    """
    if r < 0:
        raise UsageError("derivative order must be nonnegative")
    zs = chebyshev_points() if z_grid is None else np.asarray(z_grid, float)
    if isinstance(F, GpcField):
        if r > F.order:
            raise CapabilityError(f"z-derivatives of order {r} are not resolved by gPC order K={F.order}")
        dom, coeffs = F.domain, F.coeffs
        tables = [legendre_table(F.order, zs, l) for l in range(r + 1)]
    else:
        nodes, fields = F
        nodes = np.asarray(nodes, float)
        if r >= len(nodes):
            raise CapabilityError(f"{len(nodes)} collocation nodes cannot resolve z-derivatives of order {r}")
        dom = fields[0].domain
        deg = len(nodes) - 1
        # Legendre coefficients of the interpolant through the nodes
        V = legendre_table(deg, nodes)  # (deg+1, n) normalized basis at nodes
        stack = np.stack([f.coeffs for f in fields])
        coeffs = np.tensordot(np.linalg.inv(V.T), stack, axes=(1, 0))
        tables = [legendre_table(deg, zs, l) for l in range(r + 1)]
    quad = quad or default_rule(dom)
    values, per_z = [], []
    for tab in tables:
        rows = _norm_rows(*_derivative_grids(coeffs, tab, dom, quad), dom, quad)
        per_z.append(rows)
        values.append({k: float(v.max()) for k, v in rows.items()})
    totals = {k: float(sum(v[k] for v in values)) for k in ("l1", "l2", "h1")}
    pointwise = {k: float(np.max(sum(p[k] for p in per_z))) for k in ("l1", "l2", "h1")}
    return MixedNormReport(r, zs, values, totals, pointwise)


# --------------------------------------------------------------------------
# initial data conditions


@dataclass
class InitialConditionReport:
    rows: list  # dicts: N, mass_error, l2_ratio, l1_ratio, neg_l2
    N0: int | None
    flags: dict

    @property
    def passed(self) -> bool:
        return all(self.flags.values())


def _reference_norms(f0, domain: Domain, M: int):
    q = QuadratureRule(grid_M=M)
    pts = q.grid_points(domain)
    vals = np.asarray(f0(pts), dtype=float)
    w = (2.0 * domain.L / M) ** domain.d
    return {"mass": float(np.sum(vals) * w), "l1": float(np.sum(np.abs(vals)) * w),
            "l2": float(np.sqrt(np.sum(vals**2) * w))}


def check_initial_conditions(f0, domain: Domain, quad: QuadratureRule | None, N_list,
                             mass_tol: float = 1e-12, l1_factor: float = 2.0) -> InitialConditionReport:
    """Mass, L2 contraction, L1 control and negative-part decay of P_N f0 over N.

    ``f0(v)`` takes points of shape (..., d).  Reference norms of f0 come from a
    fine uniform grid, which is also the projection grid for every N, so the
    mass row measures what the projection does to mode 0 and nothing else.  N0 is the smallest listed N from which on the L1
    ratio stays at or below ``l1_factor``.
    """
    N_list = sorted(int(n) for n in N_list)
    M_ref = max(512, 8 * (2 * N_list[-1] + 1))
    ref = _reference_norms(f0, domain, M_ref)
    rows = []
    for N in N_list:
        dom = domain.with_N(N)
        # project on the reference grid so the mass comparison isolates the projection itself
        base = quad if quad is not None else default_rule(dom)
        q = base.with_(grid_M=max(base.grid_M, M_ref))
        fN = project_initial(lambda v, _z: f0(v), 0.0, dom, q)
        nr = norms(fN, q)
        rows.append({"N": N, "mass_error": (fN.mass - ref["mass"]) / ref["mass"],
                     "l2_ratio": nr["l2"] / ref["l2"], "l1_ratio": nr["l1"] / ref["l1"],
                     "neg_l2": nr["neg_l2"]})
    N0 = None
    for i in range(len(rows)):
        if all(r["l1_ratio"] <= l1_factor for r in rows[i:]):
            N0 = rows[i]["N"]
            break
    negs = [r["neg_l2"] for r in rows]
    flags = {
        "mass": all(abs(r["mass_error"]) <= mass_tol for r in rows),
        "l2_contraction": all(r["l2_ratio"] <= 1.0 + 1e-12 for r in rows),
        "l1_control": N0 is not None,
        "negative_part_decreasing": all(b <= a or b == 0.0 for a, b in zip(negs, negs[1:])),
    }
    return InitialConditionReport(rows, N0, flags)


# --------------------------------------------------------------------------
# studies


@dataclass
class StudyResult:
    rows: list
    summary: dict
    trajectories: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v for k, v in self.summary.items() if isinstance(v, bool))


def local_orders(N_list, errors) -> list:
    """p_i = log(e_i / e_{i+1}) / log(N_{i+1} / N_i)."""
    out = []
    for (n0, e0), (n1, e1) in zip(zip(N_list, errors), zip(N_list[1:], errors[1:])):
        if e0 > 0 and e1 > 0:
            out.append(math.log(e0 / e1) / math.log(n1 / n0))
        else:
            out.append(float("inf") if e1 == 0 else float("nan"))
    return out


def _rows_from(traj, N, error_at_end=None):
    rows = [r.row(N) for r in traj.diagnostics]
    if error_at_end is not None:
        rows[-1]["error"] = error_at_end
    return rows


def convergence_study(reference, N_list, cfg, G, f0=None, quad_for=None) -> StudyResult:
    """Errors e_N = ||P_N f_ref(T) - f_N(T)||_2 over a list of mode bounds.

    ``reference`` is a BkwParams (exact solution; its initial profile is used
    and f0 is ignored) or a SpectralField holding a reference state at
    t_final on a lattice at least as large as every listed N (then ``f0(v)``
    gives the initial data).  ``G`` is a weight table for the largest N
    (restricted per run).
    """
    from .oracle import BkwParams, bkw
    from .solver import run

    N_list = [int(n) for n in N_list]
    quad_for = quad_for or (lambda dom: default_rule(dom))
    is_bkw = isinstance(reference, BkwParams)
    if is_bkw:
        f0 = lambda v: bkw(0.0, v, reference)  # noqa: E731
    elif f0 is None:
        raise UsageError("a high-N reference needs the initial data f0")
    rows, errors, trajs = [], [], {}
    for N in N_list:
        dom = G.domain.with_N(N)
        q = quad_for(dom)
        GN = G.restrict(N)
        fN0 = project_initial(lambda v, _z: f0(v), 0.0, dom, q)
        tr = run(fN0, GN, None, cfg, q, keep_states=False)
        if is_bkw:
            ref_N = project_initial(lambda v, _z: bkw(cfg.t_final, v, reference), 0.0, dom, q)
        else:
            if reference.domain.N < N:
                raise UsageError("reference lattice is smaller than a listed N")
            ref_N = reference.resized(N)
        e = l2_norm(ref_N - tr.final)
        errors.append(e)
        trajs[N] = tr
        rows.extend(_rows_from(tr, N, e))
    orders = local_orders(N_list, errors)
    summary = {"N": N_list, "errors": errors, "orders": orders}
    if len(N_list) > 1:
        summary["decreasing"] = all(b < a for a, b in zip(errors, errors[1:]))
        finite = [o for o in orders if math.isfinite(o)]
        summary["orders_increasing"] = all(b > a for a, b in zip(finite, finite[1:]))
    return StudyResult(rows, summary, trajs)


def negative_part_study(f0, spec, N_list, cfg, G, quad_for=None, pair_tol: float = 0.10) -> StudyResult:
    """||f_N^-(t)||_2 over N for fixed data and horizon, plus the a + b/N fit at t_final."""
    from .solver import run

    N_list = sorted(int(n) for n in N_list)
    quad_for = quad_for or (lambda dom: default_rule(dom))
    rows, finals, initials, trajs = [], [], [], {}
    for N in N_list:
        dom = G.domain.with_N(N)
        q = quad_for(dom)
        fN0 = project_initial(lambda v, _z: f0(v), 0.0, dom, q)
        tr = run(fN0, G.restrict(N), None, cfg, q, keep_states=False)
        trajs[N] = tr
        for r in tr.diagnostics:
            rows.append({"N": N, "t": r.t, "neg_l2": r.neg_l2})
        finals.append(tr.diagnostics[-1].neg_l2)
        initials.append(tr.diagnostics[0].neg_l2)
    A = np.stack([np.ones(len(N_list)), 1.0 / np.asarray(N_list, float)], axis=1)
    (a, b), *_ = np.linalg.lstsq(A, np.asarray(finals), rcond=None)
    summary = {
        "N": N_list, "neg_final": finals, "neg_initial": initials, "fit_a": float(a), "fit_b": float(b),
        "nonincreasing": all(y <= x * (1.0 + pair_tol) for x, y in zip(finals, finals[1:])),
        "b_dominates": bool(b / N_list[0] > abs(a)),
        "initial_decreasing": all(y <= x for x, y in zip(initials, initials[1:])),
    }
    return StudyResult(rows, summary, trajs)


def stability_check(trajectories, factor: float = 2.1) -> dict:
    """max_t ||f(t)||_1 against factor * ||f(0)||_1 for every trajectory."""
    worst = 0.0
    for tr in trajectories:
        l1 = tr.column("l1")
        worst = max(worst, float(l1.max() / l1[0]))
    return {"max_ratio": worst, "passed": worst <= factor}


def exponential_envelope(times, values, slack: float = 1.1) -> dict:
    """Least-squares fit log(values) ~ a + b t; passes when every value <= slack * envelope."""
    t = np.asarray(times, float)
    y = np.asarray(values, float)
    if np.any(~np.isfinite(y)) or np.any(y <= 0):
        return {"a": float("nan"), "b": float("nan"), "passed": False}
    b, a = np.polyfit(t, np.log(y), 1) if len(t) > 1 else (0.0, math.log(y[0]))
    env = np.exp(a + b * t)
    return {"a": float(a), "b": float(b), "max_excess": float(np.max(y / env)),
            "passed": bool(np.all(y <= slack * env))}


# --------------------------------------------------------------------------
# CSV


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path, rows, columns) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r.get(c, "")) for c in columns])


DIAG_COLUMNS = ["N", "t", "mass", "l1", "l2", "h1", "neg_l2", "error", "mass_drift"]
