"""JSON run configuration: schema, validation and object construction.

Top-level sections (all optional except ``domain``)::

    domain       {d, N, and either (L, R) or S (with optional L)}
    kernel       {kinetic: hard|soft, gamma, angular: constant | {cos, values},
                  cross_section, lambda: {type: constant|affine, eps}}
    solver       {dt, t_final, integrator: rk4|euler, record_every}
    uq           {K, mode: galerkin|collocation, n_collocation, r, tol}
    quad         {n_r, n_theta, n_sigma, n_z, grid_M}
    initial      {type: bkw|gaussian|harmonic|table, ...}
    convergence  {N_list, reference: bkw|high-N, N_ref}
    output       {dir, weights}

Everything is validated before any computation starts.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InputError
from .kernel import (AffineFactor, ConstantAngular, ConstantFactor, Domain, HardPower, KernelSpec,
                     ModifiedSoft, TabulatedAngular, sphere_area)
from .quadrature import QuadratureRule, default_rule
from .solver import SolverConfig

SECTIONS = {"domain", "kernel", "solver", "uq", "quad", "initial", "convergence", "output"}
QUAD_KEYS = {"n_r", "n_theta", "n_sigma", "n_z", "grid_M"}


def _check_keys(section: str, data: dict, allowed: set):
    if not isinstance(data, dict):
        raise InputError(f"config section '{section}' must be an object")
    extra = set(data) - allowed
    if extra:
        raise InputError(f"unknown keys in '{section}': {sorted(extra)}")


def _num(section, data, key, default=None, positive=False, integer=False):
    if key not in data:
        if default is None:
            raise InputError(f"missing '{section}.{key}'")
        return default
    val = data[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise InputError(f"'{section}.{key}' must be a number")
    if not math.isfinite(val):
        raise InputError(f"'{section}.{key}' must be finite")
    if integer and int(val) != val:
        raise InputError(f"'{section}.{key}' must be an integer")
    if positive and val <= 0:
        raise DomainError(f"'{section}.{key}' must be positive")
    return int(val) if integer else float(val)


def parse_domain(data: dict) -> Domain:
    _check_keys("domain", data, {"d", "N", "L", "R", "S"})
    d = _num("domain", data, "d", 2, integer=True)
    N = _num("domain", data, "N", integer=True)
    if "S" in data:
        S = _num("domain", data, "S", positive=True)
        L = _num("domain", data, "L") if "L" in data else None
        if "R" in data and not math.isclose(float(data["R"]), 2 * S, rel_tol=1e-12):
            raise DomainError(f"support radius S={S} requires R = 2S, got R={data['R']}")
        return Domain.from_support(S, N, d, L)
    L = _num("domain", data, "L")
    R = _num("domain", data, "R")
    return Domain(d, L, R, N)


def parse_kernel(data: dict, d: int) -> KernelSpec:
    _check_keys("kernel", data, {"kinetic", "gamma", "angular", "cross_section", "lambda"})
    kinetic = data.get("kinetic", "hard")
    gamma = _num("kernel", data, "gamma", 0.0 if kinetic == "hard" else -1.0)
    if kinetic == "hard":
        kin = HardPower(gamma)
    elif kinetic == "soft":
        kin = ModifiedSoft(gamma)
    else:
        raise InputError(f"kernel.kinetic must be 'hard' or 'soft', got {kinetic!r}")
    cs = _num("kernel", data, "cross_section", 1.0, positive=True)
    ang = data.get("angular", "constant")
    if ang == "constant":
        angular = ConstantAngular(cs / sphere_area(d))
    elif isinstance(ang, dict):
        _check_keys("kernel.angular", ang, {"cos", "values"})
        angular = TabulatedAngular(tuple(float(x) for x in ang["cos"]),
                                   tuple(cs * float(x) for x in ang["values"]))
    else:
        raise InputError("kernel.angular must be 'constant' or a {cos, values} table")
    lam = data.get("lambda", {"type": "constant"})
    _check_keys("kernel.lambda", lam, {"type", "eps"})
    if lam.get("type", "constant") == "constant":
        factor = ConstantFactor()
    elif lam["type"] == "affine":
        factor = AffineFactor(_num("kernel.lambda", lam, "eps", 0.0))
    else:
        raise InputError(f"kernel.lambda.type must be 'constant' or 'affine', got {lam['type']!r}")
    return KernelSpec(kin, angular, factor)


def is_maxwell(spec: KernelSpec) -> bool:
    return (isinstance(spec.kinetic, HardPower) and spec.kinetic.gamma == 0.0
            and isinstance(spec.angular, ConstantAngular))


@dataclass
class InitialCondition:
    """z-parametrized initial profile f0(v, z)."""

    kind: str
    params: dict
    func: object = field(repr=False)

    def __call__(self, v, z=0.0):
        return self.func(v, z)


def parse_initial(data: dict, domain: Domain, base_dir: str = ".") -> InitialCondition:
    from .oracle import BkwParams, bkw
    from .spectral import SpectralField, evaluate_field, grid_to_coeffs

    kind = data.get("type", "bkw")
    if kind == "bkw":
        _check_keys("initial", data, {"type", "rho", "T", "t0", "cross_section"})
        p = BkwParams(rho=_num("initial", data, "rho", 1.0, positive=True),
                      T=_num("initial", data, "T", 1.0, positive=True),
                      cross_section=_num("initial", data, "cross_section", 1.0, positive=True),
                      t0=_num("initial", data, "t0", 0.0))
        return InitialCondition("bkw", {"bkw": p}, lambda v, z: bkw(0.0, v, p))
    if kind == "gaussian":
        _check_keys("initial", data, {"type", "rho", "T1", "T2", "u", "T1_z", "rho_z"})
        rho = _num("initial", data, "rho", 1.0, positive=True)
        T1 = _num("initial", data, "T1", 1.0, positive=True)
        T2 = _num("initial", data, "T2", T1, positive=True)
        T1z = _num("initial", data, "T1_z", 0.0)
        rhoz = _num("initial", data, "rho_z", 0.0)
        u = np.asarray(data.get("u", [0.0] * domain.d), dtype=float)
        if abs(T1z) >= T1 or abs(rhoz) >= rho:
            raise DomainError("z-dependence must keep density and temperature positive on [-1, 1]")

        def gauss(v, z, rho=rho, T1=T1, T2=T2, T1z=T1z, rhoz=rhoz, u=u):
            a = T1 + T1z * z
            w = v - u
            return (rho + rhoz * z) * np.exp(-w[..., 0] ** 2 / (2 * a) - w[..., 1] ** 2 / (2 * T2)) / (
                2 * math.pi * math.sqrt(a * T2))

        return InitialCondition("gaussian", dict(data), gauss)
    if kind == "harmonic":
        _check_keys("initial", data, {"type", "background", "amplitude", "modes"})
        bg = _num("initial", data, "background", 1.0)
        amp = _num("initial", data, "amplitude", 0.1)
        modes = np.asarray(data.get("modes", [[1, 0]]), dtype=float)
        k = math.pi / domain.L

        def harm(v, z):
            out = np.full(v.shape[:-1], bg)
            for n in modes:
                out = out + amp * np.cos(k * (v @ n))
            return out

        return InitialCondition("harmonic", dict(data), harm)
    if kind == "table":
        _check_keys("initial", data, {"type", "path"})
        path = os.path.join(base_dir, data["path"])
        try:
            vals = np.loadtxt(path, delimiter=",")
        except OSError as exc:
            raise InputError(f"cannot read initial table {path}: {exc}") from exc
        if vals.ndim != 2 or vals.shape[0] != vals.shape[1] or not np.all(np.isfinite(vals)):
            raise InputError("initial table must be a finite square grid of samples on [-L, L)^2")
        Nt = (vals.shape[0] - 1) // 2
        tab_dom = domain.with_N(Nt)
        field_t = SpectralField(tab_dom, grid_to_coeffs(vals, tab_dom), True)
        return InitialCondition("table", {"path": path},
                                lambda v, z: evaluate_field(field_t, v).real)
    raise InputError(f"unknown initial type {kind!r}")


@dataclass
class RunConfig:
    domain: Domain
    kernel: KernelSpec
    solver: SolverConfig | None
    uq: dict
    quad_overrides: dict
    initial: InitialCondition
    convergence: dict
    output: dict
    raw: dict = field(repr=False, default_factory=dict)

    @property
    def K(self) -> int:
        return int(self.uq.get("K", 0))

    def quad_for(self, domain: Domain | None = None, K: int | None = None) -> QuadratureRule:
        dom = domain or self.domain
        return default_rule(dom, self.K if K is None else K, **self.quad_overrides)

    def max_N(self) -> int:
        Ns = [self.domain.N]
        if self.convergence:
            Ns += list(self.convergence.get("N_list", []))
            if self.convergence.get("reference") == "high-N":
                Ns.append(self.convergence.get("N_ref", 2 * max(Ns)))
        return int(max(Ns))


def parse_config(raw: dict, base_dir: str = ".") -> RunConfig:
    if not isinstance(raw, dict):
        raise InputError("config must be a JSON object")
    extra = set(raw) - SECTIONS
    if extra:
        raise InputError(f"unknown config sections: {sorted(extra)}")
    if "domain" not in raw:
        raise InputError("config needs a 'domain' section")
    domain = parse_domain(raw["domain"])
    kernel = parse_kernel(raw.get("kernel", {}), domain.d)

    solver = None
    if "solver" in raw:
        s = raw["solver"]
        _check_keys("solver", s, {"dt", "t_final", "integrator", "record_every"})
        solver = SolverConfig(_num("solver", s, "dt", positive=True),
                              _num("solver", s, "t_final", positive=True),
                              s.get("integrator", "rk4"),
                              _num("solver", s, "record_every", 1, integer=True))

    uq = dict(raw.get("uq", {}))
    _check_keys("uq", uq, {"K", "mode", "n_collocation", "r", "tol", "lambda"})
    if "lambda" in uq:  # allowed here too, mirrors kernel.lambda
        kernel = parse_kernel({**raw.get("kernel", {}), "lambda": uq.pop("lambda")}, domain.d)
    K = _num("uq", uq, "K", 0, integer=True)
    if K < 0:
        raise DomainError("uq.K must be nonnegative")
    uq["K"] = K
    uq["mode"] = uq.get("mode", "galerkin")
    if uq["mode"] not in ("galerkin", "collocation"):
        raise InputError("uq.mode must be 'galerkin' or 'collocation'")
    uq["n_collocation"] = _num("uq", uq, "n_collocation", max(K + 1, 2), positive=True, integer=True)
    uq["tol"] = _num("uq", uq, "tol", 1e-6, positive=True)
    if "r" in uq:
        uq["r"] = _num("uq", uq, "r", integer=True)

    quad = dict(raw.get("quad", {}))
    _check_keys("quad", quad, QUAD_KEYS)
    for k in quad:
        quad[k] = _num("quad", quad, k, positive=True, integer=True)

    initial = parse_initial(raw.get("initial", {"type": "bkw"}), domain, base_dir)

    conv = dict(raw.get("convergence", {}))
    _check_keys("convergence", conv, {"N_list", "reference", "N_ref"})
    if conv:
        Nl = conv.get("N_list", [])
        if not isinstance(Nl, list) or not Nl or any(int(n) != n or n < 1 for n in Nl):
            raise InputError("convergence.N_list must be a nonempty list of positive integers")
        conv["N_list"] = sorted(int(n) for n in Nl)
        conv["reference"] = conv.get("reference", "bkw")
        if conv["reference"] not in ("bkw", "high-N"):
            raise InputError("convergence.reference must be 'bkw' or 'high-N'")
        if conv["reference"] == "high-N":
            conv["N_ref"] = _num("convergence", conv, "N_ref", 2 * max(conv["N_list"]), integer=True)
            if conv["N_ref"] < max(conv["N_list"]):
                raise DomainError("convergence.N_ref must be at least the largest listed N")

    out = dict(raw.get("output", {}))
    _check_keys("output", out, {"dir", "weights"})
    return RunConfig(domain, kernel, solver, uq, quad, initial, conv, out, raw)


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(raw, os.path.dirname(os.path.abspath(path)))
