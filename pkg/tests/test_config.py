import json
import math

import numpy as np
import pytest

from uqboltz.config import is_maxwell, load_config, parse_config
from uqboltz.errors import DomainError, InputError
from uqboltz.kernel import AffineFactor, HardPower, ModifiedSoft, TabulatedAngular

BASE = {"domain": {"d": 2, "N": 6, "S": 6},
        "solver": {"dt": 0.01, "t_final": 0.1},
        "initial": {"type": "bkw", "T": 0.65, "t0": 20}}


def _cfg(**sections):
    raw = json.loads(json.dumps(BASE))
    for k, v in sections.items():
        if v is None:
            raw.pop(k, None)
        else:
            raw[k] = v
    return raw


def test_minimal_config_defaults():
    cfg = parse_config(_cfg())
    assert cfg.domain.N == 6 and cfg.domain.R == 12.0
    assert is_maxwell(cfg.kernel)
    assert cfg.K == 0 and cfg.uq["mode"] == "galerkin"
    assert cfg.solver.integrator == "rk4"
    assert cfg.initial.kind == "bkw"
    assert cfg.max_N() == 6


def test_explicit_box_and_support_consistency():
    cfg = parse_config(_cfg(domain={"d": 2, "N": 4, "L": 5.0, "R": 4.0}))
    assert cfg.domain.L == 5.0 and cfg.domain.S is None
    with pytest.raises(DomainError):
        parse_config(_cfg(domain={"d": 2, "N": 4, "L": 3.0, "R": 4.0}))
    with pytest.raises(DomainError):
        parse_config(_cfg(domain={"d": 2, "N": 4, "S": 6, "R": 10}))


@pytest.mark.parametrize("raw,err", [
    ({"solver": {"dt": 0.1, "t_final": 1.0}}, InputError),  # no domain
    ({**BASE, "extra": {}}, InputError),
    ({**BASE, "solver": {"dt": "fast", "t_final": 1.0}}, InputError),
    ({**BASE, "solver": {"dt": 0.1, "t_final": 1.0, "steps": 3}}, InputError),
    ({**BASE, "solver": {"dt": -0.1, "t_final": 1.0}}, DomainError),
    ({**BASE, "uq": {"K": -1}}, DomainError),
    ({**BASE, "uq": {"mode": "monte-carlo"}}, InputError),
    ({**BASE, "kernel": {"kinetic": "medium"}}, InputError),
    ({**BASE, "kernel": {"kinetic": "hard", "gamma": 1.5}}, DomainError),
    ({**BASE, "initial": {"type": "sphere"}}, InputError),
    ({**BASE, "convergence": {"N_list": []}}, InputError),
    ({**BASE, "convergence": {"N_list": [4, 8], "reference": "high-N", "N_ref": 6}}, DomainError),
    ({**BASE, "quad": {"n_r": 2.5}}, InputError),
])
def test_invalid_configs_are_rejected(raw, err):
    with pytest.raises(err):
        parse_config(raw)


def test_kernel_variants():
    cfg = parse_config(_cfg(kernel={"kinetic": "soft", "gamma": -1.0,
                                    "angular": {"cos": [-1, 0, 1], "values": [0.1, 0.2, 0.3]},
                                    "cross_section": 2.0, "lambda": {"type": "affine", "eps": 0.3}}))
    assert isinstance(cfg.kernel.kinetic, ModifiedSoft)
    assert isinstance(cfg.kernel.angular, TabulatedAngular)
    assert cfg.kernel.angular(1.0) == pytest.approx(0.6)
    assert isinstance(cfg.kernel.random_factor, AffineFactor)
    assert not is_maxwell(cfg.kernel)
    cfg = parse_config(_cfg(kernel={"kinetic": "hard", "gamma": 1.0}))
    assert isinstance(cfg.kernel.kinetic, HardPower) and cfg.kernel.kinetic.gamma == 1.0


def test_uq_lambda_overrides_kernel_lambda():
    cfg = parse_config(_cfg(uq={"K": 3, "lambda": {"type": "affine", "eps": 0.25}}))
    assert cfg.kernel.random_factor.eps == 0.25
    assert cfg.K == 3 and cfg.uq["n_collocation"] == 4


def test_high_n_reference_enters_max_n():
    cfg = parse_config(_cfg(convergence={"N_list": [8, 4], "reference": "high-N"}))
    assert cfg.convergence["N_list"] == [4, 8]
    assert cfg.convergence["N_ref"] == 16 and cfg.max_N() == 16


def test_initial_profiles():
    cfg = parse_config(_cfg(initial={"type": "gaussian", "T1": 1.0, "T2": 0.5, "T1_z": 0.2}))
    v = np.array([[0.0, 0.0]])
    assert cfg.initial(v, 0.0)[0] == pytest.approx(1.0 / (2 * math.pi * math.sqrt(0.5)))
    assert cfg.initial(v, 1.0)[0] == pytest.approx(1.0 / (2 * math.pi * math.sqrt(1.2 * 0.5)))
    with pytest.raises(DomainError):
        parse_config(_cfg(initial={"type": "gaussian", "T1": 1.0, "T1_z": 1.0}))
    cfg = parse_config(_cfg(initial={"type": "harmonic", "background": 1.0, "amplitude": 0.5,
                                     "modes": [[1, 0]]}))
    assert cfg.initial(np.array([[cfg.domain.L, 0.0]]))[0] == pytest.approx(0.5)


def test_table_initial_data(tmp_path):
    cfg0 = parse_config(_cfg())
    M = 9
    x = -cfg0.domain.L + 2 * cfg0.domain.L * np.arange(M) / M
    vals = 1.0 + 0.25 * np.cos(math.pi * x / cfg0.domain.L)[:, None] * np.ones(M)[None, :]
    np.savetxt(tmp_path / "f0.csv", vals, delimiter=",")
    raw = _cfg(initial={"type": "table", "path": "f0.csv"})
    (tmp_path / "c.json").write_text(json.dumps(raw))
    cfg = load_config(str(tmp_path / "c.json"))
    pts = np.array([[0.3, 1.0], [-2.0, 4.0]])
    expect = 1.0 + 0.25 * np.cos(math.pi * pts[:, 0] / cfg.domain.L)
    assert np.allclose(cfg.initial(pts), expect, atol=1e-13)


def test_unreadable_or_malformed_files(tmp_path):
    with pytest.raises(InputError):
        load_config(str(tmp_path / "missing.json"))
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(InputError):
        load_config(str(tmp_path / "bad.json"))
    (tmp_path / "c.json").write_text(json.dumps(_cfg(initial={"type": "table", "path": "nope.csv"})))
    with pytest.raises(InputError):
        load_config(str(tmp_path / "c.json"))
