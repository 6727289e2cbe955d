import csv
import math

import numpy as np
import pytest

from uqboltz.diagnostics import (bilinear_bound_check, bilinear_constant, chebyshev_points,
                                 check_initial_conditions, exponential_envelope, gain_jacobian_factor,
                                 local_orders, mixed_norms, negative_part_study, record_for,
                                 stability_check, write_csv)
from uqboltz.errors import CapabilityError, UsageError
from uqboltz.gpc import GpcField, reconstruct
from uqboltz.kernel import HardPower, KernelSpec, maxwell_kernel
from uqboltz.oracle import BkwParams, bkw
from uqboltz.quadrature import default_rule
from uqboltz.solver import SolverConfig, Trajectory
from uqboltz.spectral import constant_field, random_real_field
from tests.conftest import main_domain, restricted, small_domain


def test_chebyshev_points():
    z = chebyshev_points()
    assert len(z) == 33 and z[0] == -1.0 and z[-1] == 1.0
    assert np.all(np.diff(z) > 0)


def test_mixed_norms_of_deterministic_field(rng):
    dom = small_domain(4)
    f = random_real_field(dom, rng, mean=1.0)
    rep = mixed_norms(GpcField(dom, f.coeffs[None]), 0)
    q = default_rule(dom)
    assert rep.values[0]["l2"] == pytest.approx(record_for(f, 0.0, q).l2, rel=1e-13)
    assert rep.total("l1") == pytest.approx(record_for(f, 0.0, q).l1, rel=1e-13)


def test_mixed_norms_of_first_chaos_mode_only():
    dom = small_domain(3)
    coeffs = np.zeros((3,) + (7, 7), complex)
    coeffs[1, 3, 3] = 1.0 / dom.volume  # psi_1(z) / |box|, unit L1 norm per unit psi_1
    rep = mixed_norms(GpcField(dom, coeffs), 2)
    assert rep.values[0]["l1"] == pytest.approx(math.sqrt(3.0), rel=1e-12)
    assert rep.values[1]["l1"] == pytest.approx(math.sqrt(3.0), rel=1e-12)
    assert rep.values[2]["l1"] == 0.0
    assert rep.total("l1") == pytest.approx(2 * math.sqrt(3.0), rel=1e-12)


def test_mixed_norm_derivative_matches_finite_differences(rng):
    dom = small_domain(3)
    F = GpcField(dom, np.stack([random_real_field(dom, rng, mean=1.0).coeffs * 0.5**k for k in range(4)]))
    z0, h = 0.3, 1e-5
    rep = mixed_norms(F, 1, z_grid=[z0])
    fd = (reconstruct(F, z0 + h) - reconstruct(F, z0 - h)) * (0.5 / h)
    q = default_rule(dom)
    assert rep.values[1]["l2"] == pytest.approx(record_for(fd, 0.0, q).l2, rel=1e-7)


def test_mixed_norm_order_above_chaos_order_is_a_capability_error(rng):
    dom = small_domain(2)
    F = GpcField(dom, np.zeros((3, 5, 5), complex))
    with pytest.raises(CapabilityError):
        mixed_norms(F, 3)
    with pytest.raises(UsageError):
        mixed_norms(F, -1)


def test_mixed_norms_from_collocation_nodes(rng):
    dom = small_domain(3)
    F = GpcField(dom, np.stack([random_real_field(dom, rng, mean=1.0).coeffs * 0.4**k for k in range(3)]))
    nodes = np.array([-0.8, -0.1, 0.5, 0.9])
    fields = [reconstruct(F, z) for z in nodes]
    a = mixed_norms(F, 2)
    b = mixed_norms((nodes, fields), 2)
    for k in ("l1", "l2", "h1"):
        assert b.total(k) == pytest.approx(a.total(k), rel=1e-10)
    with pytest.raises(CapabilityError):
        mixed_norms((nodes[:2], fields[:2]), 2)


def test_initial_conditions_for_band_limited_data():
    dom = small_domain(8)
    k = math.pi / dom.L

    def f0(v):
        return (1.0 + 0.5 * np.cos(k * v[..., 0]) * np.cos(2 * k * v[..., 1])) / dom.volume

    rep = check_initial_conditions(f0, dom, None, [2, 4, 6])
    assert rep.passed and rep.N0 == 2
    for r in rep.rows:
        assert abs(r["mass_error"]) <= 1e-13
        assert r["l2_ratio"] == pytest.approx(1.0, abs=1e-12)
        assert r["neg_l2"] == 0.0


def test_initial_conditions_for_gaussian():
    dom = main_domain(24)

    def f0(v):
        return np.exp(-np.sum(v * v, axis=-1) / 2.0) / (2 * math.pi)

    rep = check_initial_conditions(f0, dom, None, range(4, 25, 4))
    assert rep.flags["mass"] and rep.flags["l2_contraction"] and rep.flags["negative_part_decreasing"]
    assert rep.N0 is not None and rep.N0 <= 8


def test_local_orders():
    assert local_orders([8, 16], [1e-2, 2.5e-3]) == pytest.approx([2.0])
    assert local_orders([4, 8], [1.0, 0.0]) == [math.inf]


def test_stability_check_and_envelope():
    def traj(vals):
        tr = Trajectory(np.arange(len(vals), dtype=float), [], [])
        tr.diagnostics = [record for record in _records(vals)]
        return tr

    ok = stability_check([traj([1.0, 1.5, 2.0]), traj([2.0, 2.0])])
    assert ok["passed"] and ok["max_ratio"] == 2.0
    assert not stability_check([traj([1.0, 2.2])])["passed"]
    t = np.linspace(0, 2, 9)
    env = exponential_envelope(t, 3.0 * np.exp(0.4 * t))
    assert env["passed"] and env["b"] == pytest.approx(0.4) and env["a"] == pytest.approx(math.log(3.0))
    assert not exponential_envelope(t, np.r_[np.ones(8), np.nan])["passed"]


def _records(l1_values):
    from uqboltz.diagnostics import DiagnosticsRecord

    return [DiagnosticsRecord(float(i), 1.0, x, 1.0, 1.0, 0.0) for i, x in enumerate(l1_values)]


def test_csv_keeps_seventeen_significant_digits(tmp_path):
    path = tmp_path / "out.csv"
    x = 0.1 + 0.2
    write_csv(path, [{"a": x, "b": 3, "c": True}], ["a", "b", "c"])
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert float(rows[0]["a"]) == x
    assert rows[0]["b"] == "3" and rows[0]["c"] == "1"


def test_jacobian_factor_and_constants():
    # det of v -> v' is (1 + cos angle) / 4, smallest at the edge of the angular support
    assert gain_jacobian_factor() == pytest.approx(4.0, rel=1e-6)
    dom = small_domain(4)
    C = bilinear_constant(maxwell_kernel(), dom)
    assert C == pytest.approx(3.0, rel=1e-6)
    assert bilinear_constant(maxwell_kernel(), dom, part="loss") == pytest.approx(1.0)
    hard = bilinear_constant(KernelSpec(HardPower(1.0)), dom, part="loss")
    assert hard == pytest.approx(dom.R)


def test_bilinear_bound_holds_for_random_pairs(table_small6):
    chk = bilinear_bound_check(table_small6, maxwell_kernel(), default_rule(table_small6.domain), n_pairs=10)
    assert chk.passed and 0.0 < chk.max_ratio < chk.constant


def test_gpc_record_reports_mode_masses(rng):
    dom = small_domain(3)
    q = default_rule(dom)
    F = GpcField(dom, np.stack([constant_field(dom, 1.0).coeffs, constant_field(dom, 0.2).coeffs]))
    rec = record_for(F, 0.0, q)
    assert rec.mass == pytest.approx(dom.volume)
    assert rec.breakdown["mode_mass"][1] == pytest.approx(0.2 * dom.volume)
    # at z = 1 the field is 1 + 0.2 sqrt(3), the largest value on the check grid
    assert rec.l1 == pytest.approx((1 + 0.2 * math.sqrt(3)) * dom.volume, rel=1e-12)


@pytest.mark.slow
def test_negative_part_grows_over_horizon_for_bkw(table24):
    G = restricted(table24, 8)
    p = BkwParams(T=0.65)
    study = negative_part_study(lambda v: bkw(0.0, v, p), maxwell_kernel(), [8], SolverConfig(0.01, 1.0,
                                record_every=50), G)
    rows = {round(r["t"], 6): r["neg_l2"] for r in study.rows}
    assert rows[1.0] > rows[0.5] > 0.0
