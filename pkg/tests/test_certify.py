import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from shearlab import certify
from shearlab.certify import CellDecomposition, RegionTag, fibonacci, fibonacci_ratio, region
from shearlab.modes import EvolutionConfig, FrequencyGrid, ModeState, Trajectory, Variant, run_band
from shearlab.params import ModelParams


def test_fibonacci_values():
    assert [fibonacci(j) for j in range(5)] == [(1, 1), (2, 2), (4, 3), (7, 5), (12, 8)]
    with pytest.raises(ValueError):
        fibonacci(-1)


@given(st.integers(1, 60))
def test_fibonacci_recursion_and_binet(j):
    a, b = fibonacci(j)
    ap, bp = fibonacci(j - 1)
    assert a == ap + bp and b == ap + 1
    # b_j is the (j + 2)-th Fibonacci number
    phi = (1 + math.sqrt(5)) / 2
    if j < 60:
        assert b == round(phi ** (j + 2) / math.sqrt(5))


def test_fibonacci_ratio_converges():
    assert abs(fibonacci_ratio(40) - certify.GOLDEN) < 1e-6
    assert abs(fibonacci_ratio(10) - certify.GOLDEN) > 1e-6


@pytest.mark.parametrize("gamma,N", [(0.1, 2), (0.01, 4), (0.001, 10), (1 / 27, 3), (1 / 64, 4)])
def test_cell_count(gamma, N):
    cells = CellDecomposition(gamma)
    assert cells.N == N
    assert cells.width == pytest.approx(1 / (gamma * N))


@given(st.floats(1e-3, 0.3), st.floats(1e-6, 500.0))
def test_cell_index_contains_point(gamma, xi):
    cells = CellDecomposition(gamma)
    n = int(cells.index(xi))
    lo, hi = cells.cell(n)
    assert lo - 1e-9 * cells.width <= xi <= hi + 1e-9 * cells.width


@given(st.floats(1e-3, 0.2), st.integers(0, 30), st.integers(0, 200))
def test_regions_partition(gamma, m, n):
    p = ModelParams.inviscid(10, gamma)
    tag = region(m, n, p)
    N = CellDecomposition(gamma).N
    d = n - m
    if abs(d) <= 2:
        assert tag is RegionTag.EXCITATION
    elif 3 <= d <= 2 + 4 * N:
        assert tag is RegionTag.GROWTH
    else:
        assert tag in (RegionTag.WAITING, RegionTag.REMAINDER)


def test_rate_and_bound_formulas():
    p = ModelParams.inviscid(10, 0.01)
    N = 4
    d = 3
    assert certify.growth_rate(p, 0, 5) == pytest.approx(
        4 * 0.01 * 10 * d * math.pi / (9 * N) * math.exp(-d * d / (2 * N * N)))
    assert certify.excitation_bound(p, 2, True) == pytest.approx(6 * 10 * math.pi / 16 * math.exp(10 * math.pi / 4))
    assert certify.excitation_bound(p, 2, False) == pytest.approx(
        6 * 10 * math.pi / 16 * math.exp(10 * math.pi * 3 / 4))


@given(st.floats(1e-3, 0.05), st.floats(1e-3, 0.1))
def test_gronwall_floor_in_unit_interval(gamma, eps1):
    p = ModelParams.viscous(5, gamma)
    f = certify.gronwall_floor(p, eps1)
    assert 0 < f < 1


def test_effective_eps1_inverts_band_width():
    p = ModelParams.viscous(5, 0.01)
    assert certify.effective_eps1(p.band_half_width, p.gamma) == pytest.approx(p.eps1)


def test_block_schedule_hits_block_edges():
    cells = CellDecomposition(0.1)
    s = certify.block_schedule(0.1, 4, interior=3)
    for m in range(5):
        assert any(abs(t - cells.T(m)) < 1e-12 for t in s)
    assert len(s) == 4 * 4 + 1


def _synthetic(values_of_t, gamma=0.1, T=30.0, times=None, hw=60.0):
    p = ModelParams.inviscid(10, gamma)
    g = FrequencyGrid.covering(-hw, hw + T + 5 / gamma, 0.25)
    times = np.arange(0, T + 1e-9, 1.0) if times is None else times
    cfg = EvolutionConfig(0.01, Variant.MODIFIED_INVISCID)
    snaps = [ModeState(1, float(t), values_of_t(float(t), g.xi), g) for t in times]
    return Trajectory(p, cfg, snaps)


@given(st.floats(0.1, 3.0), st.floats(0.5, 2.0))
def test_fit_growth_rate_recovers_exponential(c1, c0):
    tr = _synthetic(lambda t, xi: c0 * np.exp(c1 * 0.1 * t) * np.ones_like(xi))
    a, b, reliable = certify.fit_growth_rate(tr, (20.0, 30.0))
    length = math.sqrt(tr.grid.weights().sum())
    assert a == pytest.approx(c0 * length, rel=1e-8)
    assert b == pytest.approx(c1, rel=1e-8)
    assert not reliable  # only 1/gamma wide


def test_induction_accepts_a_staircase_and_flags_a_dip():
    L = 10.0

    def stair(t, xi):
        j = int(round(t / L))
        out = np.ones_like(xi)
        for i in range(j + 1):
            a, b = fibonacci(i)
            lo = i * L
            out = np.where((xi >= lo) & (xi <= lo + L), np.maximum(out, a), out)
            out = np.where((xi >= lo + L) & (xi <= lo + 2 * L), np.maximum(out, b), out)
        return out.astype(complex)

    sched = certify.block_schedule(0.1, 8)
    tr = _synthetic(stair, T=40.0, times=sched)
    led = certify.check_induction(tr, 60.0)
    assert led.certified_J == led.requested_J == 3 and led.passed

    def dipped(t, xi):
        v = stair(t, xi)
        return np.where((t > 15) & (xi > 21) & (xi < 22), 0.5, v)

    led = certify.check_induction(_synthetic(dipped, T=40.0, times=sched), 60.0)
    assert not led.passed and led.certified_J == 1
    assert led.violations and led.violations[0].t == pytest.approx(20.0)


def test_checks_need_block_snapshots():
    tr = _synthetic(lambda t, xi: np.ones_like(xi, dtype=complex), times=[0.0, 30.0])
    with pytest.raises(certify.InsufficientSnapshots):
        certify.check_excitation_drift(tr, 0)
    with pytest.raises(ValueError):
        certify.check_growth(tr, 0, 0)


def test_constant_data_pass_drift_and_waiting_checks():
    sched = certify.block_schedule(0.1, 4)
    tr = _synthetic(lambda t, xi: np.ones_like(xi, dtype=complex), T=20.0, times=sched)
    rep = certify.check_excitation_drift(tr, 1)
    assert rep.passed and rep.lhs == 0.0
    g = certify.check_growth(tr, 0, 3)
    # no growth happened, so the predicted lower bound fails
    assert not g.passed and g.violations


def test_certify_run_on_small_trajectory():
    p = ModelParams.inviscid(10, 0.1)
    cells = CellDecomposition(0.1)
    sched = certify.block_schedule(0.1, int(round(20 / cells.width)))
    tr = run_band(p, 40, 20.0, snapshot_times=sched)
    cert = certify.certify_run(tr, 40)
    assert cert["N"] == 2 and set(cert["passed"]) == {"excitation", "growth", "waiting", "induction"}
    assert all("margin" in r for r in cert["excitation"] + cert["growth"])
    assert cert["gronwall_floor"] == pytest.approx(certify.gronwall_floor(p, cert["eps1_effective"]))
    assert cert["ledger"]["a"][:2] == [1, 2]
