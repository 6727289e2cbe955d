"""Command line front end: ``uqboltz {weights,run,convergence,uq,verify}``.

Exit codes: 0 success, 1 usage or configuration error, 2 a checked property
failed, 3 the time integration blew up.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

import numpy as np

from .config import RunConfig, is_maxwell, load_config
from .errors import (AssumptionViolation, BlowUpError, CacheMismatchError, CapabilityError, UqBoltzError)

log = logging.getLogger("uqboltz")

EXIT_OK, EXIT_USAGE, EXIT_ASSERT, EXIT_BLOWUP = 0, 1, 2, 3
CONFIG_ENV = "UQBOLTZ_CONFIG"


def _out_dir(cfg: RunConfig, args) -> str:
    d = args.out or cfg.output.get("dir") or "."
    os.makedirs(d, exist_ok=True)
    return d


def _weights_path(cfg: RunConfig, out: str) -> str:
    name = cfg.output.get("weights")
    if name:
        return name if os.path.isabs(name) else os.path.join(out, name)
    return os.path.join(out, "weights.bin")


def obtain_weights(cfg: RunConfig, out: str, force: bool = False, N: int | None = None):
    """Load the cached table when its digest matches, otherwise compute and store it.

    Returns (table, info) where info records whether the cache was hit.
    """
    from .weights import kernel_hash, load_weights, precompute_weights, read_header, save_weights

    N = cfg.max_N() if N is None else N
    table_N = max(N, cfg.max_N())
    path = _weights_path(cfg, out)

    def digest_at(n):
        dom_n = cfg.domain.with_N(n)
        return kernel_hash(cfg.kernel, dom_n, cfg.quad_for(dom_n, 0))

    if os.path.exists(path):
        hdr = read_header(path)
        # the rule sizes grow with N, so a larger cached table carries its own digest
        if hdr["N"] >= table_N and hdr["kernel_hash"] == digest_at(hdr["N"]):
            G = load_weights(path, hdr["kernel_hash"])
            return _with_geometry(G, cfg.domain).restrict(N), {"path": path, "cache_hit": True,
                                                               "seconds": 0.0}
        if not force:
            raise CacheMismatchError(
                f"{path} holds weights for a different kernel, geometry, rule or a smaller N; "
                "rerun with --force")
    dom = cfg.domain.with_N(table_N)
    t0 = time.perf_counter()
    G = precompute_weights(cfg.kernel, dom, cfg.quad_for(dom, 0))
    secs = time.perf_counter() - t0
    save_weights(G, path)
    return G.restrict(N), {"path": path, "cache_hit": False, "seconds": secs}


def _with_geometry(G, dom):
    # the cache header does not carry S; reattach the configured domain object
    from .weights import WeightTable

    return WeightTable(dom.with_N(G.domain.N), G.entries, G.kernel_hash, G.quad_tol, G.quad, G.part)


def _write_json(path, data):
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=float)


def _dump_coefficients(path, state):
    from .gpc import GpcField
    from .spectral import mode_lattice

    coeffs = state.coeffs if isinstance(state, GpcField) else state.coeffs[None]
    lat = mode_lattice(state.domain)
    with open(path, "w") as fh:
        fh.write("k," + ",".join(f"n{i + 1}" for i in range(state.domain.d)) + ",re,im\n")
        for k, c in enumerate(coeffs):
            flat = c.reshape(-1)
            for n, val in zip(lat, flat):
                fh.write(f"{k}," + ",".join(str(int(x)) for x in n)
                         + f",{format(val.real, '.17g')},{format(val.imag, '.17g')}\n")


# --------------------------------------------------------------------------
# subcommands


def cmd_weights(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args)
    G, info = obtain_weights(cfg, out, args.force)
    from .spectral import mode_lattice

    lat = mode_lattice(G.domain)
    P = len(lat)
    neg = np.array([np.ravel_multi_index(tuple(-x + G.domain.N for x in n), (2 * G.domain.N + 1,) * G.domain.d)
                    for n in lat])
    resid = float(np.max(np.abs(G.entries[np.arange(P), neg])))
    msg = "loaded from cache" if info["cache_hit"] else f"computed in {info['seconds']:.2f} s"
    print(f"weights: N={G.domain.N} table {P}x{P} ({P * P} entries), {msg}")
    print(f"weights: max |G(l,-l)| = {resid:.3e}")
    print(f"weights: file {info['path']}")
    return EXIT_OK if resid <= 1e-12 else EXIT_ASSERT


def _initial_field(cfg, dom, quad, z=0.0):
    from .spectral import project_initial

    return project_initial(cfg.initial, z, dom, quad)


def _solve(cfg: RunConfig, G, mode: str | None = None):
    """Run the configured system; returns (kind, result)."""
    from .gpc import build_s_tensor, project_z
    from .quadrature import gauss_legendre
    from .solver import run, run_collocation

    dom = G.domain
    K = cfg.K
    mode = mode or cfg.uq["mode"]
    lam = cfg.kernel.random_factor
    if K == 0 and mode == "galerkin":
        quad = cfg.quad_for(dom, 0)
        f0 = _initial_field(cfg, dom, quad)
        scale = float(lam(0.0))
        return "deterministic", run(f0, G, None, cfg.solver, quad, scale=scale)
    if mode == "galerkin":
        quad = cfg.quad_for(dom, K)
        S = build_s_tensor(lam, K, quad)
        proj = quad.with_(n_z=max(quad.n_z, 4 * K + 8))
        F0 = project_z(lambda z: _initial_field(cfg, dom, quad, z), K, proj)
        return "galerkin", run(F0, G, S, cfg.solver, quad)
    quad = cfg.quad_for(dom, 0)
    nodes, _ = gauss_legendre(cfg.uq["n_collocation"])
    trajs = run_collocation(lambda z: _initial_field(cfg, dom, quad, z), nodes, G, cfg.solver, lam, quad)
    return "collocation", trajs


def cmd_run(cfg: RunConfig, args) -> int:
    from .diagnostics import DIAG_COLUMNS, write_csv

    if cfg.solver is None:
        raise CapabilityError("the run command needs a 'solver' section")
    out = _out_dir(cfg, args)
    G, _ = obtain_weights(cfg, out, args.force, N=cfg.domain.N)
    N = cfg.domain.N
    try:
        kind, res = _solve(cfg, G)
    except BlowUpError as exc:
        if exc.trajectory is not None:
            write_csv(os.path.join(out, "trajectory.csv"), [r.row(N) for r in exc.trajectory.diagnostics],
                      DIAG_COLUMNS)
            _dump_coefficients(os.path.join(out, "last_state.csv"), exc.trajectory.final)
        print(f"run: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    summary = {"kind": kind, "N": N, "K": cfg.K}
    if kind == "collocation":
        rows = []
        failed = []
        for tr in res:
            for r in tr.diagnostics:
                row = r.row(N)
                row["z"] = tr.z
                rows.append(row)
            if tr.failed:
                failed.append(tr.z)
        write_csv(os.path.join(out, "trajectory.csv"), rows, ["z"] + DIAG_COLUMNS)
        summary["failed_nodes"] = failed
        summary["mass_drift"] = max(tr.mass_drift for tr in res if not tr.failed) if len(failed) < len(res) else None
        ok = [tr for tr in res if not tr.failed]
        if ok:
            _dump_coefficients(os.path.join(out, "coefficients.csv"), ok[0].final)
        code = EXIT_BLOWUP if failed else EXIT_OK
    else:
        write_csv(os.path.join(out, "trajectory.csv"), [r.row(N) for r in res.diagnostics], DIAG_COLUMNS)
        _dump_coefficients(os.path.join(out, "coefficients.csv"), res.final)
        summary["mass_drift"] = res.mass_drift
        summary["max_l1_ratio"] = float(res.column("l1").max() / res.column("l1")[0])
        code = EXIT_OK
    _write_json(os.path.join(out, "summary.json"), summary)
    print(f"run: {kind}, N={N}, mass drift {summary.get('mass_drift')}")
    return code


def cmd_convergence(cfg: RunConfig, args) -> int:
    from .diagnostics import DIAG_COLUMNS, convergence_study, write_csv
    from .oracle import verify_bkw
    from .solver import run

    if not cfg.convergence or cfg.solver is None:
        raise CapabilityError("the convergence command needs 'convergence' and 'solver' sections")
    out = _out_dir(cfg, args)
    G, _ = obtain_weights(cfg, out, args.force)
    conv = cfg.convergence
    N_list = conv["N_list"]
    quad_for = lambda dom: cfg.quad_for(dom, 0)  # noqa: E731
    summary = {}
    if conv["reference"] == "bkw":
        if cfg.initial.kind != "bkw":
            raise CapabilityError("a BKW reference needs initial.type = 'bkw'")
        p = cfg.initial.params["bkw"]
        resid = verify_bkw(p, [0.0, cfg.solver.t_final], cfg.quad_for(G.domain), G.domain, kernel=cfg.kernel)
        summary["bkw_residual"] = resid
        if resid > 1e-4:
            print(f"convergence: BKW residual {resid:.3e} > 1e-4, reference rejected", file=sys.stderr)
            _write_json(os.path.join(out, "convergence_summary.json"), summary)
            return EXIT_ASSERT
        reference = p
        f0 = None
    else:
        N_ref = conv["N_ref"]
        dom_ref = G.domain.with_N(N_ref)
        q = quad_for(dom_ref)
        f0r = _initial_field(cfg, dom_ref, q)
        reference = run(f0r, G.restrict(N_ref), None, cfg.solver, q, keep_states=False).final
        f0 = lambda v: cfg.initial(v, 0.0)  # noqa: E731
    try:
        res = convergence_study(reference, N_list, cfg.solver, G, f0=f0, quad_for=quad_for)
    except BlowUpError as exc:
        print(f"convergence: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    write_csv(os.path.join(out, "convergence.csv"), res.rows, DIAG_COLUMNS)
    summary.update({k: v for k, v in res.summary.items()})
    _write_json(os.path.join(out, "convergence_summary.json"), summary)
    for N, e in zip(N_list, res.summary["errors"]):
        print(f"convergence: N={N} error={e:.6e}")
    if len(N_list) < 2:
        return EXIT_OK
    ok = res.summary["decreasing"] and res.summary["orders_increasing"]
    print(f"convergence: decreasing={res.summary['decreasing']} orders_increasing={res.summary['orders_increasing']}")
    return EXIT_OK if ok else EXIT_ASSERT


def cmd_uq(cfg: RunConfig, args) -> int:
    """Galerkin run compared node by node with collocation solves, plus mixed norms."""
    from .diagnostics import mixed_norms, write_csv
    from .gpc import reconstruct, statistics
    from .spectral import l2_norm

    if cfg.solver is None:
        raise CapabilityError("the uq command needs a 'solver' section")
    if cfg.K < 1:
        raise CapabilityError("the uq command needs uq.K >= 1")
    out = _out_dir(cfg, args)
    G, _ = obtain_weights(cfg, out, args.force, N=cfg.domain.N)
    r = cfg.uq.get("r", 0)
    try:
        _, gal = _solve(cfg, G, "galerkin")
        _, col = _solve(cfg, G, "collocation")
    except BlowUpError as exc:
        print(f"uq: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    rows = []
    for tr in col:
        d = l2_norm(reconstruct(gal.final, tr.z) - tr.final) if not tr.failed else float("nan")
        rows.append({"z": tr.z, "l2_difference": d, "mass": tr.diagnostics[-1].mass})
    write_csv(os.path.join(out, "uq.csv"), rows, ["z", "l2_difference", "mass"])
    mn = mixed_norms(gal.final, r, quad=cfg.quad_for(G.domain))
    stats = statistics(gal.final, cfg.quad_for(G.domain))
    worst = max(x["l2_difference"] for x in rows)
    summary = {"max_l2_difference": worst, "mixed_norm_totals": mn.totals, "r": r,
               "max_variance": float(np.max(stats["variance_field"])),
               "mass_drift": gal.mass_drift}
    _write_json(os.path.join(out, "uq_summary.json"), summary)
    print(f"uq: max Galerkin-collocation L2 difference {worst:.3e} (tol {cfg.uq['tol']:.1e})")
    return EXIT_OK if worst <= cfg.uq["tol"] else EXIT_ASSERT


def cmd_verify(cfg: RunConfig, args) -> int:
    from .diagnostics import bilinear_bound_check, check_initial_conditions, mixed_norms
    from .gpc import GpcField
    from .kernel import check_assumptions
    from .oracle import verify_bkw
    from .weights import precompute_weights

    out = _out_dir(cfg, args)
    ledger = []

    def note(name, passed, detail):
        ledger.append({"check": name, "passed": bool(passed), "detail": detail})
        print(f"verify: {'PASS' if passed else 'FAIL'} {name}: {detail}")

    r = int(cfg.uq.get("r", 0))
    rep = check_assumptions(cfg.kernel, r, d=cfg.domain.d, strict=False)
    note("kernel assumptions", rep.positive and np.isfinite(rep.cutoff_integral),
         f"positive={rep.positive}, cutoff integral {rep.cutoff_integral:.6g}, C_b {rep.C_b:.6g}, min lambda {rep.min_lambda:.6g}")

    if r > 0:
        try:
            dom = cfg.domain
            F = GpcField(dom, np.zeros((cfg.K + 1,) + (2 * dom.N + 1,) * dom.d))
            mixed_norms(F, r, quad=cfg.quad_for(dom))
            note("mixed-norm order", True, f"r={r} resolved by K={cfg.K}")
        except CapabilityError as exc:
            note("mixed-norm order", False, str(exc))

    N_list = list(range(4, max(24, cfg.domain.N) + 1, 4))
    ic = check_initial_conditions(lambda v: cfg.initial(v, 0.0), cfg.domain, None, N_list)
    for k, v in ic.flags.items():
        note(f"initial data: {k}", v, f"N0={ic.N0}")

    if is_maxwell(cfg.kernel) and cfg.initial.kind == "bkw" and cfg.domain.d == 2:
        p = cfg.initial.params["bkw"]
        try:
            res = verify_bkw(p, [0.0], cfg.quad_for(cfg.domain), cfg.domain, kernel=cfg.kernel)
            note("BKW residual", res <= 1e-4, f"{res:.3e}")
        except UqBoltzError as exc:
            note("BKW residual", False, str(exc))

    if cfg.domain.d == 2:
        dom6 = cfg.domain.with_N(min(cfg.domain.N, 6))
        q6 = cfg.quad_for(dom6)
        G6 = precompute_weights(cfg.kernel, dom6, q6)
        bc = bilinear_bound_check(G6, cfg.kernel, q6, n_pairs=10)
        note("bilinear bound", bc.passed, f"max ratio {bc.max_ratio:.4g} vs C {bc.constant:.4g} at lambda = 1")

    _write_json(os.path.join(out, "verify.json"), ledger)
    return EXIT_OK if all(x["passed"] for x in ledger) else EXIT_ASSERT


COMMANDS = {"weights": cmd_weights, "run": cmd_run, "convergence": cmd_convergence, "uq": cmd_uq,
            "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uqboltz", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help=f"JSON run configuration (default: ${CONFIG_ENV})")
    p.add_argument("--out", help="output directory (default: output.dir or .)")
    p.add_argument("--force", action="store_true", help="overwrite a weight cache built for another setup")
    p.add_argument("--threads", type=int, default=None, help="cap on BLAS/FFT worker threads")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    path = args.config or os.environ.get(CONFIG_ENV)
    if not path:
        print("error: no configuration given (--config or $UQBOLTZ_CONFIG)", file=sys.stderr)
        return EXIT_USAGE
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(path)
    except (UqBoltzError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.threads is not None:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=args.threads):
                return COMMANDS[args.command](cfg, args)
        return COMMANDS[args.command](cfg, args)
    except (CacheMismatchError, CapabilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE if isinstance(exc, CacheMismatchError) else EXIT_ASSERT
    except AssumptionViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ASSERT
    except BlowUpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except UqBoltzError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
