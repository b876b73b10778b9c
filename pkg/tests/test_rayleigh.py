import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from shearlab import rayleigh as ry
from shearlab.rayleigh import RayleighConfig

M0 = RayleighConfig(M=0, gamma=0.02)
M20 = RayleighConfig(M=20, gamma=0.02)


# ---------------------------------------------------------------- M = 0 closed forms

@given(st.floats(-0.3, 0.3), st.floats(0.05, 1.0))
@settings(max_examples=10)
def test_couette_D_closed_form(c_r, c_i):
    # phi = sinh x - i c_i cosh x with x = y - c_r fixes phi2(y_c) = 1, phi2'(y_c) = 0
    assert ry.D_value(M0, complex(c_r, c_i)) == pytest.approx(-2 / (1 + c_i ** 2), abs=1e-7)


@pytest.mark.parametrize("c_r", [0.0, 0.05, -0.2])
def test_couette_phi1_is_sinhc(c_r):
    sol = ry.solve_phi1(M0, c_r)
    x = sol.y - c_r
    with np.errstate(invalid="ignore", divide="ignore"):
        exact = np.where(x == 0, 1.0, np.sinh(x) / np.where(x == 0, 1, x))
    assert np.max(np.abs(sol.phi1 / exact - 1)) < 1e-8


def test_couette_J_values():
    J = ry.j_functions(M0, 0.0)
    assert J.J1 == pytest.approx(-2.0, abs=1e-6)
    assert J.J2 == 0.0


def test_couette_has_no_eigenvalues():
    assert ry.count_and_refine(M0, oracle=False).count == 0
    assert ry.matrix_oracle(M0) == []
    assert ry.semigroup_growth(M0, 20.0)["rate"] == 0.0


# ---------------------------------------------------------------- phi1 and the Riccati invariants

@given(st.floats(-0.15, 0.15))
@settings(max_examples=8)
def test_phi1_invariants_and_volterra_cross_check(c_r):
    sol = ry.solve_phi1(M20, c_r)
    assert sol.F_prime_at_yc == pytest.approx(1 / 3, abs=1e-4)
    for s in sol.sides:
        assert np.all(s.phi1 >= 1 - 1e-12)
        assert np.all(np.abs(s.F) <= np.minimum(1.0, s.u) + 1e-9)
    # independent integral-equation form of the same function
    for s, v in zip(sol.sides, ry.phi1_volterra(M20, sol)):
        assert np.max(np.abs(v / s.phi1 - 1)) < 1e-6


def test_quadrature_is_fourth_order():
    errs = []
    for n in (41, 81, 161):
        x = np.sort(np.concatenate([np.linspace(0, 1, n), [0.3141, 0.7777]]))
        q = ry.Quadrature(x)
        errs.append(abs(q.total(np.exp(3 * x)) - (math.exp(3) - 1) / 3))
        cum = q.cumulative(np.cos(x))
        assert np.max(np.abs(cum - np.sin(x))) < 1e-6
    assert math.log2(errs[0] / errs[1]) > 3.5


def test_config_validation():
    with pytest.raises(ValueError):
        RayleighConfig(M=1, gamma=0.02, dy=0.01)
    with pytest.raises(ValueError):
        RayleighConfig(M=1, gamma=0.02, Y_max=5)
    with pytest.raises(ValueError):
        ry.D_value(M20, 0.1)
    with pytest.raises(ry.CiTooLarge):
        ry.D_value(M20, complex(0.0, 100.0))


# ---------------------------------------------------------------- D symmetries and oracles

@given(st.floats(-0.1, 0.1), st.floats(0.03, 0.5))
@settings(max_examples=6)
def test_D_reflection_symmetries(c_r, c_i):
    c = complex(c_r, c_i)
    d = ry.D_value(M20, c)
    assert ry.D_value(M20, c.conjugate()) == pytest.approx(d.conjugate(), rel=1e-10)
    # the bump is odd in y, so c -> -conj(c) conjugates as well
    assert ry.D_value(M20, complex(-c_r, c_i)) == pytest.approx(d.conjugate(), rel=1e-9)


def _shooting_wronskian(cfg, c, L=8.0):
    # oracle: integrate phi'' = phi + b'' phi / (b - c) from both ends with decaying data
    prof = cfg.profile

    def f(y, s):
        p, q = s[0] + 1j * s[1], s[2] + 1j * s[3]
        a = p + prof.b_second(y) * p / (prof.b(y) - c)
        return [q.real, q.imag, a.real, a.imag]

    opts = dict(rtol=1e-11, atol=1e-13, method="DOP853", max_step=0.004)
    e = math.exp(-L)
    lft = solve_ivp(f, (-L, 0), [e, 0, e, 0], **opts).y[:, -1]
    rgt = solve_ivp(f, (L, 0), [e, 0, -e, 0], **opts).y[:, -1]
    pl, ql = lft[0] + 1j * lft[1], lft[2] + 1j * lft[3]
    pr, qr = rgt[0] + 1j * rgt[1], rgt[2] + 1j * rgt[3]
    return pl * qr - ql * pr


def test_root_of_D_matches_shooting_oracle():
    z0, z1 = 0.15j, 0.16j
    f0, f1 = _shooting_wronskian(M20, z0), _shooting_wronskian(M20, z1)
    for _ in range(30):
        z0, f0, z1 = z1, f1, z1 - f1 * (z1 - z0) / (f1 - f0)
        f1 = _shooting_wronskian(M20, z1)
        if abs(z1 - z0) < 1e-12:
            break
    c, val, _ = ry.newton(lambda z: ry.D_value(M20, z), 0.15j)
    assert abs(val) < 1e-8
    assert abs(c - z1) < 1e-5 * abs(z1)
    assert ry.decaying_solution_residual(M20, c) < 1e-3


# ---------------------------------------------------------------- counting tools

def test_winding_counts_polynomial_roots():
    f = lambda z: (z - 0.3j) * (z - (0.1 + 0.2j)) * (z + 2)  # noqa: E731
    n, _, _ = ry.winding(f, [0.05 + 0.1j, 1.0 + 0.1j, 1.0 + 1j, 0.05 + 1j])
    assert n == 1
    n, _, _ = ry.winding(f, [-1 + 0.05j, 1 + 0.05j, 1 + 1j, -1 + 1j])
    assert n == 2


def test_newton_on_polynomial():
    c, val, its = ry.newton(lambda z: z * z + 0.04, 0.25j)
    assert c == pytest.approx(0.2j, abs=1e-10) and abs(val) < 1e-11


@given(st.floats(-1, 1), st.floats(-1, 1))
def test_exclusion_regions_partition(cr, ci):
    reg = ry.ExclusionRegions(20, 0.02)
    tag = reg.classify(complex(cr, ci))
    in_E = reg.in_E(complex(cr, ci), slack=0.0)
    if tag == "E":
        assert in_E
    elif tag in ("E1", "E2"):
        assert not in_E or abs(abs(cr) - reg.cr_edge) < 1e-12 or abs(abs(ci) - reg.ci_top) < 1e-12


def test_region_constants():
    reg = ry.ExclusionRegions(20, 0.02)
    assert reg.ci_top == pytest.approx(8 * math.sqrt(math.pi) * 20 * 0.02)
    assert reg.cr_edge == pytest.approx(4 * 0.02 * math.sqrt(math.log(math.log(50))))


# ---------------------------------------------------------------- J functions and limits

@given(st.floats(0.005, 0.09))
@settings(max_examples=5)
def test_J_parity(c_r):
    a, b = ry.j_functions(M20, c_r), ry.j_functions(M20, -c_r)
    assert b.J1 == pytest.approx(a.J1, rel=1e-8)
    assert b.J2 == pytest.approx(-a.J2, rel=1e-12)


def test_J_is_the_boundary_value_of_D():
    J = ry.j_functions(M20, 0.03)
    tol = 1e-2 * (1 + abs(J.J1) + abs(J.J2))
    up, down = ry.D_value(M20, 0.03 + 1e-4j), ry.D_value(M20, 0.03 - 1e-4j)
    assert abs(up - complex(J.J1, -J.J2)) < tol
    assert abs(down - complex(J.J1, J.J2)) < tol
    assert up.imag * down.imag < 0


def test_embedded_scan_gate():
    low = ry.embedded_scan(RayleighConfig(M=2, gamma=0.02), [0.0])
    assert low["gated"] is False and low["passed"] is None
    high = ry.embedded_scan(M20, [0.0, 0.02])
    assert high["gated"] and high["passed"] and high["min"] > 0


# ---------------------------------------------------------------- forced problem

def _w(y):
    return np.exp(-(y - 0.1) ** 2)


def test_inhomogeneous_solution_two_sided_agreement():
    out = ry.inhomogeneous_phi(M20, _w, complex(0.02, 0.05))
    assert out["consistent"] and out["agreement"] < 1e-8


def test_forced_residual_first_order_under_refinement():
    # nonuniform three-point differences: the check itself is first order in the spacing
    res = []
    for f in (1, 2, 4):
        cfg = RayleighConfig(M=20, gamma=0.02, dy=0.02 / 32 / f, dy_far=0.02 / f, cluster_ratio=0.04 / f)
        out = ry.inhomogeneous_phi(cfg, _w, complex(0.02, 0.05))
        res.append(ry.forced_residual(cfg, out["y"], out["Phi"], _w, complex(0.02, 0.05)))
    assert res[0] > res[1] > res[2]
    assert math.log2(res[0] / res[2]) > 1.5


def test_mu_limits_match_D_formula():
    plus, _ = ry.mu_limits(M20, _w, 0.03)
    near = ry.inhomogeneous_phi(M20, _w, complex(0.03, 1e-4))["mu"]
    assert abs(near - plus) < 1e-2 * abs(plus)


def test_resolvent_singular_at_eigenvalue():
    c, _, _ = ry.newton(lambda z: ry.D_value(M20, z), 0.15j)
    with pytest.raises(ry.ResolventSingular):
        ry.inhomogeneous_phi(M20, _w, c)
