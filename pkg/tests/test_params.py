import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from shearlab.params import (M_LOWER_BOUND, ModelParams, ProfileKind, Regime, ShearProfile,
                             coupled_viscosity, default_eps1)

gammas = st.floats(1e-3, 0.2)
amps = st.floats(0.5, 30.0)


def test_viscous_coupling_exponent():
    p = ModelParams.viscous(5, 0.01, delta0=0.05)
    assert p.nu == pytest.approx(0.01 ** (3 / 0.9), rel=1e-14)
    assert p.regime is Regime.VISCOUS_COUPLED


def test_default_eps1_values():
    assert ModelParams.inviscid(10, 0.1).eps1 == pytest.approx(1 / (90 * math.pi))
    assert ModelParams.viscous(5, 0.01).eps1 == pytest.approx(0.1 / (5 * math.pi))
    with pytest.raises(ValueError):
        default_eps1(0, 0.05, Regime.INVISCID)


def test_m_threshold_value():
    assert M_LOWER_BOUND == pytest.approx(5 / (2 * math.pi * (math.exp(-2) - math.exp(-4.5))), rel=1e-15)
    assert 6.4 < M_LOWER_BOUND < 6.5


@pytest.mark.parametrize("bad", [dict(gamma=0.0), dict(gamma=-1.0), dict(nu=-1e-3), dict(M=-1.0)])
def test_constructor_rejects_nonphysical(bad):
    kw = dict(M=1.0, gamma=0.1, nu=0.0)
    kw.update(bad)
    with pytest.raises(ValueError):
        ModelParams(**kw)


def test_coupling_and_inviscid_guards():
    with pytest.raises(ValueError):
        ModelParams(M=1, gamma=0.1, nu=1e-3, regime=Regime.VISCOUS_COUPLED)
    with pytest.raises(ValueError):
        ModelParams(M=1, gamma=0.1, nu=1e-3, regime=Regime.INVISCID)


def test_from_mapping_rejects_unknown_and_mismatched_nu(tmp_path):
    with pytest.raises(ValueError, match="unknown"):
        ModelParams.from_mapping({"M": 1, "gamma": 0.1, "colour": 1})
    with pytest.raises(ValueError):
        ModelParams.from_mapping({"M": 1, "gamma": 0.1, "regime": "ViscousCoupled", "nu": 0.5})
    with pytest.raises(ValueError):
        ModelParams.from_mapping({"M": 1, "gamma": 0.1, "regime": "Free"})
    p = ModelParams.viscous(3, 0.05)
    path = tmp_path / "p.json"
    path.write_text(json.dumps(p.to_dict()))
    assert ModelParams.from_file(path) == p


@given(gammas, st.floats(0.0, 0.2))
def test_coupled_viscosity_is_power(gamma, delta0):
    nu = coupled_viscosity(gamma, delta0)
    assert math.log(nu) == pytest.approx(3 / (1 - 2 * delta0) * math.log(gamma), rel=1e-12)


@given(amps, gammas)
def test_sup_deviation_closed_form(M, gamma):
    prof = ShearProfile(ModelParams.free(M, gamma, 0.0, eps1=0.1))
    y = np.linspace(-1, 1, 20001) + 30 * gamma * np.sign(np.linspace(-1, 1, 20001))
    assert prof.sup_deviation() == pytest.approx(math.pi * M * gamma ** 2, rel=1e-15)
    assert np.max(np.abs(prof.deviation(y))) == pytest.approx(prof.sup_deviation(), rel=1e-6)


@given(amps, st.floats(5e-3, 0.2), st.floats(0.0, 50.0))
def test_hdot1_against_quadrature(M, gamma, t):
    # independent trapezoid quadrature of int (b' - 1)^2 dy
    p = ModelParams.viscous(M, gamma)
    prof = ShearProfile(p)
    s = prof.width(t)
    y = np.linspace(-12 * s, 12 * s, 200001)
    d = prof.derivative(y, 1, t) - 1.0
    quad = math.sqrt(np.sum((d[1:] ** 2 + d[:-1] ** 2) / 2 * np.diff(y)))
    assert prof.hdot1_deviation(t) == pytest.approx(quad, rel=1e-6)


def test_hdot1_reference_value():
    # (2 pi)^(3/4) * 5 * 0.01^(3/2)
    prof = ShearProfile(ModelParams.viscous(5, 0.01))
    assert prof.hdot1_deviation() == pytest.approx((2 * math.pi) ** 0.75 * 5 * 0.01 ** 1.5, rel=1e-14)
    assert prof.hdot1_deviation() == pytest.approx(1.984289e-2, rel=1e-6)


@given(st.floats(1e-3, 2e-2), st.floats(0.05, 30.0), st.floats(-0.05, 0.05))
def test_width_and_heat_equation(gamma, t, y):
    p = ModelParams.viscous(5, gamma)
    prof = ShearProfile(p)
    assert prof.width(t) ** 2 == pytest.approx(4 * p.nu * t + gamma ** 2, rel=1e-12)
    assert ShearProfile(p, ProfileKind.STATIC).width(t) == pytest.approx(gamma)


def test_heat_residual_second_order():
    p = ModelParams.viscous(5, 0.05)
    prof = ShearProfile(p)
    r = [prof.heat_residual(1.0, 0.01, h) for h in (2e-2, 1e-2, 5e-3)]
    orders = [math.log2(r[i] / r[i + 1]) for i in range(2)]
    assert all(1.8 < o < 2.2 for o in orders)


def test_derivatives_match_finite_differences():
    prof = ShearProfile(ModelParams.free(5, 0.05, 0.0, eps1=0.1))
    y, h = np.linspace(-0.3, 0.3, 61), 1e-4
    for order in (1, 2, 3):
        up = prof.b(y + h) if order == 1 else prof.derivative(y + h, order - 1)
        dn = prof.b(y - h) if order == 1 else prof.derivative(y - h, order - 1)
        fd = (up - dn) / (2 * h)
        assert np.allclose(prof.derivative(y, order), fd, atol=1e-5 * np.max(np.abs(fd)) + 1e-9)


@given(amps, gammas, st.floats(-2.0, 2.0))
def test_critical_layer_inverse(M, gamma, c_r):
    prof = ShearProfile(ModelParams.free(M, gamma, 0.0, eps1=0.1), ProfileKind.STATIC)
    y = prof.y_c(c_r)
    assert float(prof.b(y)) == pytest.approx(c_r, abs=1e-12 * (1 + abs(c_r)))
    assert prof.y_c_array(np.array([c_r]))[0] == pytest.approx(y, abs=1e-10)


@given(amps, gammas)
def test_profile_is_odd_and_monotone(M, gamma):
    prof = ShearProfile(ModelParams.free(M, gamma, 0.0, eps1=0.1))
    y = np.linspace(-3, 3, 2001)
    assert np.allclose(prof.deviation(-y), -prof.deviation(y), atol=1e-15)
    assert np.all(np.diff(prof.b(y)) > 0)


def test_couette_kind_has_no_bump():
    prof = ShearProfile(ModelParams.free(5, 0.05, 0.0, eps1=0.1), ProfileKind.COUETTE)
    assert np.all(prof.deviation(np.linspace(-1, 1, 11)) == 0)
    assert prof.hdot1_deviation() == 0.0
    with pytest.raises(ValueError):
        prof.sup_deviation()


def test_export_csv_round_trip(tmp_path):
    prof = ShearProfile(ModelParams.viscous(5, 0.05))
    y = np.linspace(-0.5, 0.5, 11)
    prof.export_csv(tmp_path / "b.csv", y)
    rows = (tmp_path / "b.csv").read_text().splitlines()
    assert rows[0] == "y,b_minus_y"
    vals = np.array([[float(x) for x in r.split(",")] for r in rows[1:]])
    assert np.array_equal(vals[:, 1], prof.deviation(y))
