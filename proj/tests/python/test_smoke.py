import json
import math

import numpy as np
import pytest

import selfadj as sa


def test_deficiency_table():
    p = sa.DifferentialExpression.momentum()
    r = sa.deficiency_indices(p, 0.0, sa.inf)
    assert (r["m_plus"], r["m_minus"]) == (1, 0)
    h0 = sa.DifferentialExpression.schrodinger(sa.Coefficient.zero())
    r = sa.deficiency_indices(h0, 0.0, 1.0)
    assert (r["m_plus"], r["m_minus"]) == (2, 2)
    assert r["left"]["kind"] == "regular"


def test_dirichlet_spectrum():
    h0 = sa.DifferentialExpression.schrodinger(sa.Coefficient.zero())
    presets = dict(sa.named_presets(1.0))
    sp = sa.eigenvalues(h0, 0.0, 1.0, presets["dirichlet"], -1.0, 100.0)
    want = [(k * math.pi) ** 2 for k in (1, 2, 3)]
    assert np.allclose(sp.eigenvalues, want, atol=1e-6)
    assert sp.method == "determinant"


def test_boundary_conditions():
    u = -np.array([[1j * math.sinh(math.pi), 1], [1, 1j * math.sinh(math.pi)]]) / math.cosh(math.pi)
    abv = sa.AbvUnitary(u, tau=1.0 / math.pi)
    assert sa.validate(abv)["ok"]
    s = sa.convert(abv, "s_matrix")
    assert sa.kind_of(s) == "s_matrix"
    assert sa.residual_equivalent(abv, s)
    bad = sa.SMatrix(np.array([[2.0, 0.0], [0.0, 1.0]], dtype=complex))
    assert not sa.validate(bad)["ok"]
    e = sa.epsilon_matrix(4)
    assert np.allclose(e @ e, -np.eye(4))


def test_harmonic_robin_and_eigenfunction():
    ho = sa.DifferentialExpression.schrodinger(sa.Coefficient.harmonic())
    bc = sa.Robin(left=sa.RobinEnd(dirichlet=False, lambda_=0.0))
    sp = sa.eigenvalues(ho, 0.0, sa.inf, bc, 0.0, 10.5)
    assert np.allclose(sp.eigenvalues, [1, 5, 9], atol=1e-6)
    f = sa.eigenfunction(ho, 0.0, sa.inf, bc, 1.0)
    c = math.sqrt(2.0 / math.sqrt(math.pi))
    assert abs(f.value(0.7) - c * math.exp(-0.245)) < 1e-6


def test_errors_are_exceptions():
    h0 = sa.DifferentialExpression.schrodinger(sa.Coefficient.zero())
    with pytest.raises(sa.InvalidInput):
        sa.eigenvalues(h0, 0.0, 1.0, sa.SingularAsymptotic(), 0.0, 10.0)
    assert issubclass(sa.InvalidInput, sa.Error)


def test_boundary_form_witness():
    q = sa.DifferentialExpression.schrodinger(sa.Coefficient.power(-1.0, 4.0))

    def stack(x):
        e = np.exp(1j * x**3 / 3)
        return [e / x, (-1 / x**2 + 1j * x) * e]

    ok, value = sa.boundary_form_limit(q, stack, sa.inf, anchor=2.0, windows=6)
    assert ok
    assert abs(value + 2j) < 1e-8


def test_run_front_end():
    cfg = json.dumps({"expression": {"kind": "momentum"}, "interval": {"a": 0, "b": "inf"}})
    code, report, csv = sa.run(cfg, "extensions")
    assert code == 4
    assert json.loads(report)["extensions"]["exists"] is False
    canon = sa.canonical_config(cfg)
    assert sa.canonical_config(canon) == canon
