"""Rayleigh problem for the static profile b0 at horizontal wavenumber one.

Homogeneous solutions are built as phi = (b0 - c) phi1 phi2 around the
critical layer y_c = b0^{-1}(c_r):

* phi1 solves ((b0 - c_r)^2 phi1')' = (b0 - c_r)^2 phi1 with phi1(y_c) = 1; it
  is integrated through the Riccati variable F = phi1'/phi1 from a Taylor seed.
* phi2 is the fixed point of the Volterra map

      phi2 = 1 - 2i c_i int_{y_c}^y [ 1 / (s^2 phi1^2) ]
                      int_{y_c}^{y'} b0' phi1 phi1' phi2 s / (b0 - c_r) dz dy',

  with s = b0 - c.

Zeros of D(c) = int 1/phi^2 dy are eigenvalues.  Grids are symmetric about y_c so
principal values reduce to paired sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import linalg

from .params import M0_PROXY, ModelParams, ProfileKind, ShearProfile

SQRT_PI = math.sqrt(math.pi)


class InvariantViolation(AssertionError):
    pass


class CiTooLarge(ValueError):
    pass


class PhaseJumpUnresolved(RuntimeError):
    pass


class ResolventSingular(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class RayleighConfig:
    M: float
    gamma: float
    Y_max: float = 10.0
    dy: float | None = None
    dy_far: float = 0.02
    cluster_ratio: float = 0.02
    pv_tol: float = 1e-12
    eps3: float | None = None
    m0_proxy: float = M0_PROXY
    tail_rtol: float = 1e-9
    picard_tol: float = 1e-12
    picard_max: int = 400

    def __post_init__(self) -> None:
        if self.dy is None:
            object.__setattr__(self, "dy", min(self.gamma / 32, 0.02))
        if self.dy > min(self.gamma / 8, 0.05) + 1e-15:
            raise ValueError(f"dy={self.dy} does not resolve the bump (need <= min(gamma/8, 0.05))")
        if self.Y_max < 10:
            raise ValueError("Y_max must be at least 10")
        if self.eps3 is None:
            object.__setattr__(self, "eps3", 2 * 8 * SQRT_PI * self.M * self.gamma + 1.0)

    @property
    def params(self) -> ModelParams:
        return ModelParams.free(self.M, self.gamma, 0.0, eps1=1.0)

    @property
    def profile(self) -> ShearProfile:
        return ShearProfile(self.params, ProfileKind.STATIC)

    @property
    def bump_reach(self) -> float:
        return 8.0 * self.gamma


# ---------------------------------------------------------------- quadrature

def _cubic_interval_weights(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-interval weights integrating the cubic through four neighbouring nodes."""
    n = len(x)
    if n < 4:
        raise ValueError("need at least four nodes")
    j = np.arange(n - 1)
    start = np.clip(j - 1, 0, n - 4)
    idx = start[:, None] + np.arange(4)[None, :]
    xs = x[idx]
    a, b = x[j], x[j + 1]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    nodes = [mid - half / math.sqrt(3), mid + half / math.sqrt(3)]
    w = np.zeros((n - 1, 4))
    for t in nodes:
        for k in range(4):
            lk = np.ones(n - 1)
            for m in range(4):
                if m != k:
                    lk = lk * (t - xs[:, m]) / (xs[:, k] - xs[:, m])
            w[:, k] += half * lk
    return idx, w


class Quadrature:
    """Cumulative fourth-order quadrature on a fixed nonuniform grid."""

    def __init__(self, x: np.ndarray) -> None:
        self.x = x
        self.idx, self.w = _cubic_interval_weights(x)

    def cumulative(self, f: np.ndarray) -> np.ndarray:
        seg = np.sum(self.w * f[self.idx], axis=1)
        out = np.zeros(len(self.x), dtype=seg.dtype)
        out[1:] = np.cumsum(seg)
        return out

    def total(self, f: np.ndarray):
        return np.sum(self.w * f[self.idx])


# ---------------------------------------------------------------- grids

def u_grid(cfg: RayleighConfig, y_c: float, c_i: float, U: float) -> np.ndarray:
    """Distances from y_c: geometric cluster of size ~|c_i|/8, fine over the bump, coarse outside."""
    h_b, h_far = cfg.dy, cfg.dy_far
    h_min = h_b if c_i == 0 else min(h_b, max(abs(c_i) / 8.0, 1e-9))
    reach = cfg.bump_reach + h_far
    out = [0.0]
    u = 0.0
    while u < U:
        near = abs(y_c + u) < reach or abs(y_c - u) < reach
        base = h_b if near else h_far
        h = min(base, max(h_min, cfg.cluster_ratio * u))
        u = u + h
        out.append(u)
    return np.array(out)


# ---------------------------------------------------------------- phi1

@dataclass
class Phi1Side:
    sign: int
    u: np.ndarray
    y: np.ndarray
    F: np.ndarray
    logphi: np.ndarray
    G: np.ndarray  # F / (b0 - c_r), regular at y_c
    beta: np.ndarray
    bp: np.ndarray
    quad: Quadrature

    @property
    def phi1(self) -> np.ndarray:
        return np.exp(self.logphi)


@dataclass
class Phi1Solution:
    c_r: float
    y_c: float
    sides: tuple[Phi1Side, Phi1Side]
    F_prime_at_yc: float
    C4: float
    taylor: np.ndarray

    @property
    def y(self) -> np.ndarray:
        m, p = self.sides[1], self.sides[0]
        return np.concatenate([m.y[:0:-1], p.y])

    def _join(self, name: str) -> np.ndarray:
        p, m = self.sides
        a, b = getattr(m, name), getattr(p, name)
        return np.concatenate([a[:0:-1], b])

    @property
    def phi1(self) -> np.ndarray:
        return np.exp(self._join("logphi"))

    @property
    def F(self) -> np.ndarray:
        return self._join("F")


def _taylor_coefficients(profile: ShearProfile, y_c: float, order: int = 4) -> np.ndarray:
    """F_1..F_order of the Riccati series F = sum F_n x^n about y_c."""
    beta = [0.0] + [float(profile.derivative(y_c, n)) / math.factorial(n) for n in range(1, order + 1)]
    F = [0.0] * (order + 1)
    for n in range(1, order + 1):
        rhs = beta[n]
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                l = n - i - j
                if l >= 1:
                    rhs -= beta[i] * F[j] * F[l]
        for i in range(2, n + 1):
            j = n + 1 - i
            if j >= 1:
                rhs -= (j + 2 * i) * beta[i] * F[j]
        F[n] = rhs / ((n + 2) * beta[1])
    return np.array(F)


def _riccati_rhs(profile: ShearProfile, c_r: float, y: float, F: float) -> float:
    beta = float(profile.deviation(y)) + y - c_r
    return 1.0 - F * F - 2.0 * float(profile.b_prime(y)) * F / beta


def _solve_side(cfg: RayleighConfig, c_r: float, y_c: float, u: np.ndarray, sign: int,
                coeffs: np.ndarray) -> Phi1Side:
    prof = cfg.profile
    y = y_c + sign * u
    n = len(u)
    F = np.zeros(n)
    L = np.zeros(n)
    seed_r = cfg.dy
    powers = np.arange(len(coeffs))
    for j in range(1, n):
        if u[j] <= seed_r * (1 + 1e-12):
            x = sign * u[j]
            F[j] = float(np.sum(coeffs * x ** powers))
            L[j] = float(np.sum(coeffs[1:] * x ** (powers[1:] + 1) / (powers[1:] + 1)))
            continue
        # RK4 in y for (F, ln phi1)
        h = y[j] - y[j - 1]
        y0, f0 = y[j - 1], F[j - 1]
        k1 = _riccati_rhs(prof, c_r, y0, f0)
        k2 = _riccati_rhs(prof, c_r, y0 + h / 2, f0 + h / 2 * k1)
        k3 = _riccati_rhs(prof, c_r, y0 + h / 2, f0 + h / 2 * k2)
        k4 = _riccati_rhs(prof, c_r, y0 + h, f0 + h * k3)
        F[j] = f0 + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        L[j] = L[j - 1] + h / 6 * (f0 + 2 * (f0 + h / 2 * k1) + 2 * (f0 + h / 2 * k2) + (f0 + h * k3))
    beta = prof.deviation(y) + y - c_r
    bp = prof.b_prime(y)
    G = np.empty(n)
    G[0] = 1.0 / (3.0 * bp[0])
    G[1:] = F[1:] / beta[1:]
    return Phi1Side(sign, u, y, F, L, G, beta, bp, Quadrature(u))


def _check_phi1(sol: Phi1Solution) -> None:
    for s in sol.sides:
        if np.any(s.logphi < -1e-12):
            j = int(np.argmin(s.logphi))
            raise InvariantViolation(f"phi1 < 1 at y={s.y[j]:.6g}")
        bound = np.minimum(1.0, s.u) * (1 + 1e-9) + 1e-12
        bad = np.abs(s.F) > bound
        if np.any(bad):
            j = int(np.argmax(bad))
            raise InvariantViolation(f"|F| > min(1, |y-y_c|) at y={s.y[j]:.6g}: {s.F[j]:.6g}")
    if abs(sol.F_prime_at_yc - 1.0 / 3.0) > 1e-4:
        raise InvariantViolation(f"F'(y_c)={sol.F_prime_at_yc:.8f} differs from 1/3")


def solve_phi1(cfg: RayleighConfig, c_r: float, c_i: float = 0.0, U: float | None = None,
               u: np.ndarray | None = None) -> Phi1Solution:
    prof = cfg.profile
    y_c = prof.y_c(c_r)
    U = U or (cfg.Y_max + abs(y_c) + 1.0)
    if u is None:
        u = u_grid(cfg, y_c, c_i, U)
    coeffs = _taylor_coefficients(prof, y_c)
    plus = _solve_side(cfg, c_r, y_c, u, +1, coeffs)
    minus = _solve_side(cfg, c_r, y_c, u, -1, coeffs)
    h = u[1]
    fprime = (plus.F[1] - minus.F[1]) / (2 * h)
    far = np.concatenate([np.abs(plus.F[u >= 1]), np.abs(minus.F[u >= 1])])
    C4 = float(far.min()) if far.size else float("nan")
    sol = Phi1Solution(c_r, y_c, (plus, minus), float(fprime), C4, coeffs)
    _check_phi1(sol)
    return sol


def phi1_volterra(cfg: RayleighConfig, sol: Phi1Solution, tol: float = 1e-13, max_iter: int = 500):
    """Cross-check: Picard iteration of phi1 = 1 + int 1/beta^2 int beta^2 phi1 on each side."""
    out = []
    for s in sol.sides:
        b2 = s.beta ** 2
        phi = np.ones_like(s.u)
        inner_scale = np.where(s.u > 0, 1.0, 0.0)
        for _ in range(max_iter):
            inner = s.quad.cumulative(b2 * phi)
            ratio = np.empty_like(inner)
            ratio[1:] = inner[1:] / b2[1:]
            ratio[0] = 0.0
            new = 1.0 + s.quad.cumulative(ratio * inner_scale)
            if np.max(np.abs(new - phi) / np.abs(new)) < tol:
                phi = new
                break
            phi = new
        out.append(phi)
    return out


# ---------------------------------------------------------------- phi2 and D

@dataclass
class Phi2Side:
    phi2: np.ndarray
    dphi2: np.ndarray  # d phi2 / dy


@dataclass
class Phi2Solution:
    c: complex
    sides: tuple[Phi2Side, Phi2Side]
    iterations: int
    C: float  # ||phi2 - 1||_inf / |c_i|

    @property
    def phi2(self) -> np.ndarray:
        p, m = self.sides
        return np.concatenate([m.phi2[:0:-1], p.phi2])


def solve_phi2(cfg: RayleighConfig, phi1: Phi1Solution, c: complex) -> Phi2Solution:
    c = complex(c)
    ci = c.imag
    if ci == 0:
        raise ValueError("phi2 needs c_i != 0")
    if abs(ci) > cfg.eps3:
        raise CiTooLarge(f"|c_i|={abs(ci)} exceeds the admitted range {cfg.eps3}")
    if abs(c.real - phi1.c_r) > 1e-15 * (1 + abs(c.real)):
        raise ValueError("phi1 was solved for a different c_r")
    sides = []
    iters = 0
    for s in phi1.sides:
        phi1sq = np.exp(2 * s.logphi)
        K = s.bp * phi1sq * (s.F - 1j * ci * s.G)
        S2 = (s.beta - 1j * ci) ** 2
        p2 = np.ones(len(s.u), dtype=complex)
        prev = math.inf
        for it in range(1, cfg.picard_max + 1):
            # integrals are taken in u; the two sign factors from dy = sign du cancel
            inner = s.quad.cumulative(K * p2)
            O = inner / (S2 * phi1sq)
            new = 1.0 - 2j * ci * s.quad.cumulative(O)
            diff = float(np.max(np.abs(new - p2)))
            p2 = new
            if diff < cfg.picard_tol * max(1.0, float(np.max(np.abs(p2)))):
                break
            if it > 60 and diff > prev * 1.5:
                raise CiTooLarge(f"Picard iteration is not contracting at c={c}")
            prev = diff
        else:
            raise CiTooLarge(f"Picard iteration did not converge at c={c}")
        iters = max(iters, it)
        dp2 = -2j * ci * O * s.sign
        sides.append(Phi2Side(p2, dp2))
    C = max(float(np.max(np.abs(sd.phi2 - 1))) for sd in sides) / abs(ci)
    return Phi2Solution(c, (sides[0], sides[1]), iters, C)


@dataclass
class WronskianD:
    c: complex
    value: complex
    tail: float
    U: float
    n_points: int


def _phi_side(phi1s: Phi1Side, p2: Phi2Side, c: complex):
    s = phi1s.beta - 1j * c.imag
    ph1 = np.exp(phi1s.logphi)
    phi = s * ph1 * p2.phi2
    dphi = phi1s.bp * ph1 * p2.phi2 + s * phi1s.F * ph1 * p2.phi2 + s * ph1 * p2.dphi2
    return phi, dphi


def homogeneous(cfg: RayleighConfig, c: complex, U: float | None = None):
    """phi and phi' on the symmetric grid, plus the pieces used to build them."""
    c = complex(c)
    p1 = solve_phi1(cfg, c.real, c.imag, U)
    p2 = solve_phi2(cfg, p1, c)
    return p1, p2


def _inv_phi_sq_cumulative(side: Phi1Side, phi: np.ndarray, c: complex) -> np.ndarray:
    """u-cumulative integral of 1/phi^2 away from y_c on one side.

    The leading singular part 1/(b0'(y_c) x - i c_i)^2 is integrated exactly; only
    the milder remainder goes through the quadrature.
    """
    b1, eps, sg, u = side.bp[0], c.imag, side.sign, side.u
    model = 1.0 / (b1 * sg * u - 1j * eps) ** 2
    exact = u / (-1j * eps * (sg * b1 * u - 1j * eps))
    return side.quad.cumulative(1.0 / phi ** 2 - model) + exact


def _D_from(cfg: RayleighConfig, c: complex, p1: Phi1Solution, p2: Phi2Solution) -> tuple[complex, float]:
    total = 0.0 + 0.0j
    tails = []
    for s1, s2 in zip(p1.sides, p2.sides):
        phi, dphi = _phi_side(s1, s2, c)
        total += _inv_phi_sq_cumulative(s1, phi, c)[-1]
        # beyond the bump phi'' = phi exactly, so the tail integral is closed form
        tail = 1.0 / (phi[-1] * (phi[-1] + s1.sign * dphi[-1]))
        total += tail
        tails.append(abs(tail))
    return complex(total), max(tails)


def wronskian_D(cfg: RayleighConfig, c: complex) -> WronskianD:
    c = complex(c)
    if c.imag == 0:
        raise ValueError("D needs c_i != 0; use j_functions on the real axis")
    U = cfg.Y_max + abs(cfg.profile.y_c(c.real)) + 1.0
    for _ in range(8):
        p1, p2 = homogeneous(cfg, c, U)
        val, tail = _D_from(cfg, c, p1, p2)
        if tail < cfg.tail_rtol * abs(val):
            break
        U += 2.0
    return WronskianD(c, val, tail, U, 2 * len(p1.sides[0].u) - 1)


def D_value(cfg: RayleighConfig, c: complex) -> complex:
    return wronskian_D(cfg, c).value


def decaying_solution_residual(cfg: RayleighConfig, c: complex) -> float:
    """|phi_-(+U)| / max|phi_-| for phi_- = phi int_{-inf}^y 1/phi^2: small exactly at eigenvalues."""
    c = complex(c)
    p1, p2 = homogeneous(cfg, c)
    plus, minus = p1.sides
    phi_p, dphi_p = _phi_side(plus, p2.sides[0], c)
    phi_m, dphi_m = _phi_side(minus, p2.sides[1], c)
    left_tail = 1.0 / (phi_m[-1] * (phi_m[-1] - dphi_m[-1]))
    # int from -inf to y_c - u, then continue across y_c to the right
    cm = _inv_phi_sq_cumulative(minus, phi_m, c)
    to_yc = left_tail + cm[-1]
    run_left = left_tail + (cm[-1] - cm)
    cp = _inv_phi_sq_cumulative(plus, phi_p, c)
    run_right = to_yc + cp
    pm = np.concatenate([(phi_m * run_left)[:0:-1], phi_p * run_right])
    return float(abs(pm[-1]) / np.max(np.abs(pm)))


# ---------------------------------------------------------------- J functions

def _pv_pi1(cfg: RayleighConfig, c_r: float, y_c: float) -> float:
    """Pi1 / b0'(y_c) = PV int g'(v) / (v - c_r) dv, g = 1 / b0'(b0^{-1}(v)), by paired points."""
    prof = cfg.profile
    if cfg.M == 0:
        return 0.0
    reach = float(prof.b(cfg.bump_reach))
    V = abs(c_r) + reach + 10 * cfg.gamma
    panels = max(16, int(math.ceil(V / (cfg.gamma / 8))))
    xg, wg = np.polynomial.legendre.leggauss(8)
    edges = np.linspace(0.0, V, panels + 1)
    a, b = edges[:-1, None], edges[1:, None]
    u = (0.5 * (b - a) * xg[None, :] + 0.5 * (a + b)).ravel()
    w = (0.5 * (b - a) * wg[None, :]).ravel()

    def gprime(v):
        y = prof.y_c_array(v)
        return -prof.b_second(y) / prof.b_prime(y) ** 3

    return float(np.sum(w * (gprime(c_r + u) - gprime(c_r - u)) / u))


@dataclass
class JValues:
    c_r: float
    y_c: float
    J1: float
    J2: float
    Pi1: float
    Pi2: float
    J3: float | None = None
    J4: float | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _pair_sum_at_zero(u: np.ndarray, vals: np.ndarray) -> float:
    """Cubic extrapolation of the paired integrand to u = 0."""
    coef = np.polyfit(u[1:5], vals[1:5], 3)
    return float(np.polyval(coef, 0.0))


def j_functions(cfg: RayleighConfig, c_r: float, f: Callable | None = None) -> JValues:
    prof = cfg.profile
    y_c = prof.y_c(c_r)
    bp_c = float(prof.b_prime(y_c))
    J2 = math.pi * float(prof.b_second(y_c)) / bp_c ** 3
    U = max(cfg.Y_max, 14.0) + abs(y_c) + 1.0
    p1 = solve_phi1(cfg, c_r, 0.0, U)
    Pi2 = 0.0
    shift = math.pi * cfg.M * cfg.gamma ** 2
    for s in p1.sides:
        g = np.empty(len(s.u))
        g[1:] = np.expm1(-2 * s.logphi[1:]) / s.beta[1:] ** 2
        g[0] = -1.0 / (3.0 * s.bp[0] ** 2)
        Pi2 += float(s.quad.total(g))
        end = s.y[-1]
        Pi2 += -1.0 / abs(end + s.sign * shift - c_r)
    ratio = _pv_pi1(cfg, c_r, y_c)
    out = JValues(c_r, y_c, ratio + Pi2, J2, ratio * bp_c, Pi2)
    if f is not None:
        out.J3, out.J4 = _j3_j4(cfg, p1, f)
    return out


def _j3_j4(cfg: RayleighConfig, p1: Phi1Solution, f: Callable) -> tuple[float, float]:
    """J3 = PV int W / phi^2 with W = int_{y_c} f phi1, and J4 = pi f(y_c) / b0'(y_c)^2."""
    plus, minus = p1.sides
    vals = []
    for s in (plus, minus):
        ph1 = np.exp(s.logphi)
        W = s.sign * s.quad.cumulative(f(s.y) * ph1)
        with np.errstate(divide="ignore", invalid="ignore"):
            integrand = W / (s.beta * ph1) ** 2
        phi = s.beta * ph1
        dphi = s.bp * ph1 + s.beta * s.F * ph1
        tail = W[-1] / (phi[-1] * (phi[-1] + s.sign * dphi[-1]))
        vals.append((integrand, tail))
    pair = vals[0][0] + vals[1][0]
    pair[0] = _pair_sum_at_zero(plus.u, pair)
    J3 = float(plus.quad.total(pair)) + vals[0][1] + vals[1][1]
    y_c = p1.y_c
    J4 = math.pi * float(f(np.array([y_c]))[0]) / float(cfg.profile.b_prime(y_c)) ** 2
    return J3, J4


# ---------------------------------------------------------------- regions

@dataclass(frozen=True)
class ExclusionRegions:
    M: float
    gamma: float

    @property
    def cr_edge(self) -> float:
        return 4 * self.gamma * math.sqrt(math.log(math.log(1 / self.gamma)))

    @property
    def ci_top(self) -> float:
        return 8 * SQRT_PI * self.M * self.gamma

    @property
    def ci_bottom(self) -> float:
        return self.gamma

    def classify(self, c: complex, slack: float = 0.0) -> str:
        cr, ci = abs(c.real), abs(c.imag)
        if ci == 0:
            return "real"
        if ci >= self.ci_top - slack:
            return "E2"
        if cr >= self.cr_edge - slack:
            return "E1"
        if ci <= self.ci_bottom + slack:
            return "E3"
        return "E"

    def in_E(self, c: complex, slack: float = 1e-6) -> bool:
        cr, ci = abs(c.real), abs(c.imag)
        return cr <= self.cr_edge + slack and self.ci_bottom - slack <= ci <= self.ci_top + slack


def embedded_scan(cfg: RayleighConfig, c_r_grid: Sequence[float]) -> dict:
    rows = [j_functions(cfg, float(c)) for c in c_r_grid]
    mags = np.array([r.J1 ** 2 + r.J2 ** 2 for r in rows])
    i = int(np.argmin(mags))
    gated = cfg.M >= cfg.m0_proxy
    return {"min": float(mags[i]), "argmin": float(rows[i].c_r), "rows": [r.to_dict() for r in rows],
            "gated": gated, "passed": bool(mags[i] > 0) if gated else None}


# ---------------------------------------------------------------- counting

def _phase_walk(func: Callable[[complex], complex], a: complex, b: complex, n: int, budget: int):
    ts = list(np.linspace(0.0, 1.0, n + 1))
    vals = [func(a + (b - a) * t) for t in ts]
    i = 0
    while i < len(ts) - 1:
        d = abs(np.angle(vals[i + 1] / vals[i]))
        if d >= math.pi / 2:
            if len(ts) >= budget:
                raise PhaseJumpUnresolved(f"phase jump {d:.3f} unresolved between {a} and {b}")
            tm = 0.5 * (ts[i] + ts[i + 1])
            ts.insert(i + 1, tm)
            vals.insert(i + 1, func(a + (b - a) * tm))
            continue
        i += 1
    pts = [a + (b - a) * t for t in ts]
    return pts, vals


def winding(func: Callable[[complex], complex], corners: Sequence[complex], n_edge: int = 16,
            budget: int = 4096) -> tuple[int, list[complex], list[complex]]:
    """Winding number of func around the closed polygon through ``corners``."""
    all_pts, all_vals = [], []
    total = 0.0
    for k in range(len(corners)):
        a, b = corners[k], corners[(k + 1) % len(corners)]
        pts, vals = _phase_walk(func, a, b, n_edge, budget)
        v = np.array(vals)
        total += float(np.sum(np.angle(v[1:] / v[:-1])))
        all_pts += pts[:-1]
        all_vals += vals[:-1]
    return int(round(total / (2 * math.pi))), all_pts, all_vals


def _box(lo: complex, hi: complex) -> list[complex]:
    return [complex(lo.real, lo.imag), complex(hi.real, lo.imag), complex(hi.real, hi.imag),
            complex(lo.real, hi.imag)]


def newton(func: Callable[[complex], complex], c0: complex, h: float = 1e-6, tol: float = 1e-11,
           max_iter: int = 40) -> tuple[complex, complex, int]:
    c = complex(c0)
    val = func(c)
    for it in range(max_iter):
        d = (func(c + h) - func(c - h)) / (2 * h)
        step = val / d
        c = c - step
        val = func(c)
        if abs(step) < tol * max(1.0, abs(c)):
            return c, val, it + 1
    return c, val, max_iter


@dataclass
class EigenResult:
    count: int
    roots: list[dict] = field(default_factory=list)
    contour: list[tuple[complex, complex]] = field(default_factory=list)
    lower_count: int | None = None
    oracle: list[complex] = field(default_factory=list)
    basin_collision: bool = False

    def to_dict(self) -> dict:
        def cx(z):
            return [float(z.real), float(z.imag)]
        return {
            "count": self.count, "lower_count": self.lower_count,
            "roots": [{k: (cx(v) if isinstance(v, complex) else v) for k, v in r.items()} for r in self.roots],
            "contour": [[cx(c), cx(d)] for c, d in self.contour],
            "oracle": [cx(z) for z in self.oracle], "basin_collision": self.basin_collision,
        }


def count_and_refine(cfg: RayleighConfig, n_edge: int = 16, min_box: float | None = None,
                     lower_half: bool = False, oracle: bool = True, split: float = 0.4142) -> EigenResult:
    reg = ExclusionRegions(cfg.M, cfg.gamma)
    func = lambda c: D_value(cfg, c)  # noqa: E731
    # E is empty when M = 0; count over a nominal box of the same shape instead
    top = max(reg.ci_top, 10 * reg.ci_bottom)
    lo = complex(-reg.cr_edge, reg.ci_bottom)
    hi = complex(reg.cr_edge, top)
    n, pts, vals = winding(func, _box(lo, hi), n_edge)
    res = EigenResult(n, contour=list(zip(pts, vals)))
    if lower_half:
        conj = lambda c: D_value(cfg, c)  # noqa: E731
        m, _, _ = winding(conj, _box(complex(-reg.cr_edge, -top), complex(reg.cr_edge, -reg.ci_bottom)),
                          n_edge)
        res.lower_count = m
    if n <= 0:
        return res
    min_box = min_box or reg.cr_edge / 2
    boxes = [(lo, hi, n)]
    seeds = []
    while boxes:
        a, b, w = boxes.pop()
        if max(b.real - a.real, b.imag - a.imag) <= min_box:
            seeds.append((0.5 * (a + b), w))
            continue
        # split the longer side off-centre so symmetric roots never land on an edge
        if b.imag - a.imag >= b.real - a.real:
            m = a.imag + split * (b.imag - a.imag)
            parts = [(a, complex(b.real, m)), (complex(a.real, m), b)]
        else:
            m = a.real + split * (b.real - a.real)
            parts = [(a, complex(m, b.imag)), (complex(m, a.imag), b)]
        for pa, pb in parts:
            k, _, _ = winding(func, _box(pa, pb), 8)
            if k > 0:
                boxes.append((pa, pb, k))
    roots = []
    for s, w in seeds:
        c, val, its = newton(func, s)
        if any(abs(c - r["c"]) < 1e-8 * max(1, abs(c)) for r in roots):
            res.basin_collision = True
            continue
        roots.append({"c": c, "residual": abs(val), "iterations": its, "seed_winding": w,
                      "region": reg.classify(c, 1e-6),
                      "eigenfunction_residual": decaying_solution_residual(cfg, c)})
    if oracle:
        ev = matrix_oracle(cfg)
        res.oracle = list(ev)
        for r in roots:
            if ev:
                best = min(ev, key=lambda z: abs(z - r["c"]))
                r["oracle"] = best
                r["oracle_rel_err"] = abs(best - r["c"]) / abs(r["c"])
    res.roots = roots
    return res


# ---------------------------------------------------------------- matrix oracle

def _green_block(n: int, dy: float, idx: np.ndarray) -> np.ndarray:
    """Rows/cols ``idx`` (1-based interior indices) of the inverse of the FD operator d^2 - 1."""
    theta = math.acosh(1.0 + dy * dy / 2.0)
    i = idx[:, None].astype(float)
    j = idx[None, :].astype(float)
    lo, hi = np.minimum(i, j), np.maximum(i, j)
    a, b, c = theta * lo, theta * (n + 1 - hi), theta * (n + 1)
    # sinh(a) sinh(b) / sinh(c) without overflow
    val = 0.5 * np.exp(a + b - c) * (-np.expm1(-2 * a)) * (-np.expm1(-2 * b)) / (-np.expm1(-2 * c))
    return -dy * dy * val / math.sinh(theta)


def rayleigh_matrix(cfg: RayleighConfig, dy: float, L: float = 10.0):
    """Active block of b0 - b0'' (d^2 - 1)^{-1} on [-L, L] with Dirichlet ends.

    Rows where b0'' vanishes carry only the diagonal b0(y), so the spectrum is the
    active block's spectrum plus those real values.
    """
    prof = cfg.profile
    n = int(round(2 * L / dy)) - 1
    y = -L + dy * np.arange(1, n + 1)
    bpp = prof.b_second(y)
    scale = float(np.max(np.abs(bpp))) if cfg.M > 0 else 0.0
    act = np.nonzero(np.abs(bpp) > 1e-15 * scale)[0] if scale > 0 else np.array([], dtype=int)
    if act.size == 0:
        return y, act, np.zeros((0, 0))
    G = _green_block(n, dy, act + 1)
    R = np.diag(prof.b(y[act])) - bpp[act][:, None] * G
    return y, act, R


def _unstable(ev: np.ndarray, gamma: float) -> list[complex]:
    return sorted((complex(z) for z in ev if abs(z.imag) > gamma / 2), key=lambda z: (-z.imag, z.real))


def matrix_oracle(cfg: RayleighConfig, refine: tuple[int, int] = (32, 64), L: float = 10.0,
                  details: bool = False):
    """Unstable eigenvalues from two FD resolutions with Richardson extrapolation."""
    runs = []
    for r in refine:
        _, act, R = rayleigh_matrix(cfg, cfg.gamma / r, L)
        ev = linalg.eigvals(R) if R.size else np.array([])
        runs.append(_unstable(ev, cfg.gamma))
    coarse, fine = runs
    out, table = [], []
    ratio = (refine[1] / refine[0]) ** 2
    for z in fine:
        if not coarse:
            break
        zc = min(coarse, key=lambda w: abs(w - z))
        ext = (ratio * z - zc) / (ratio - 1)
        out.append(ext)
        table.append({"coarse": zc, "fine": z, "extrapolated": ext, "shift": abs(ext - z) / abs(ext)})
    return (out, table) if details else out


def semigroup_growth(cfg: RayleighConfig, T: float, dt: float = 0.5, refine: int = 64,
                     half_width: float = 1.0, window: tuple[float, float] | None = None) -> dict:
    """Propagate w' = -i R w on the active block and fit the exponential rate of ||w||."""
    y, act, R = rayleigh_matrix(cfg, cfg.gamma / refine)
    if act.size == 0:
        # pure multiplication operator: |w| is conserved pointwise
        times = np.arange(0.0, T + 1e-12, dt)
        return {"rate": 0.0, "times": times.tolist(), "norms": [1.0] * len(times), "bounded": True}
    ya = y[act]
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(ya == 0, 2 * half_width, 2 * np.sin(half_width * ya) / np.where(ya == 0, 1, ya))
    w = w.astype(complex)
    P = linalg.expm(-1j * R * dt)
    steps = int(round(T / dt))
    times, norms = [0.0], [float(np.linalg.norm(w))]
    n0 = norms[0]
    for k in range(1, steps + 1):
        w = P @ w
        times.append(k * dt)
        norms.append(float(np.linalg.norm(w)))
    times_a, logs = np.array(times), np.log(np.array(norms) / n0)
    lo, hi = window or (T / 2, T)
    sel = (times_a >= lo) & (times_a <= hi)
    rate = float(np.polyfit(times_a[sel], logs[sel], 1)[0])
    return {"rate": rate, "times": times, "norms": [x / n0 for x in norms],
            "bounded": bool(max(norms) <= 2 * n0)}


# ---------------------------------------------------------------- inhomogeneous problem

def inhomogeneous_phi(cfg: RayleighConfig, w_in: Callable, c: complex, check_tol: float = 1e-8) -> dict:
    """Decaying solution Phi of the forced Rayleigh equation and the coefficient mu(w_in, c)."""
    c = complex(c)
    p1, p2 = homogeneous(cfg, c)
    parts = []
    for s1, s2 in zip(p1.sides, p2.sides):
        phi, dphi = _phi_side(s1, s2, c)
        ph1c = np.exp(s1.logphi) * s2.phi2
        W = s1.sign * s1.quad.cumulative(w_in(s1.y) * ph1c)
        parts.append((s1, phi, dphi, W))
    (sp, phip, dphip, Wp), (sm, phim, dphim, Wm) = parts
    tail_p = 1.0 / (phip[-1] * (phip[-1] + dphip[-1]))
    tail_m = 1.0 / (phim[-1] * (phim[-1] - dphim[-1]))
    # running integrals from -inf (through the minus side) and from +inf
    Am = _inv_phi_sq_cumulative(sm, phim, c)
    Ap = _inv_phi_sq_cumulative(sp, phip, c)
    Bm = sm.quad.cumulative(Wm / phim ** 2)
    Bp = sp.quad.cumulative(Wp / phip ** 2)
    D = tail_m + Am[-1] + Ap[-1] + tail_p
    N = Wm[-1] * tail_m + Bm[-1] + Bp[-1] + Wp[-1] * tail_p
    if abs(D) < 1e-10:
        raise ResolventSingular(f"D(c) vanishes at c={c}: c is an eigenvalue")
    mu = N / D
    # from -inf: minus side uses the remaining part left of y, plus side adds across y_c
    L1 = np.concatenate([(tail_m + Am[-1] - Am)[:0:-1], tail_m + Am[-1] + Ap])
    L2 = np.concatenate([(Wm[-1] * tail_m + Bm[-1] - Bm)[:0:-1], Wm[-1] * tail_m + Bm[-1] + Bp])
    R1 = np.concatenate([-(tail_p + Ap[-1] + Am)[:0:-1], -(tail_p + Ap[-1] - Ap)])
    R2 = np.concatenate([-(Wp[-1] * tail_p + Bp[-1] + Bm)[:0:-1], -(Wp[-1] * tail_p + Bp[-1] - Bp)])
    phi = np.concatenate([phim[:0:-1], phip])
    y = np.concatenate([sm.y[:0:-1], sp.y])
    from_left = 1j * phi * (L2 - mu * L1)
    from_right = 1j * phi * (R2 - mu * R1)
    scale = float(np.max(np.abs(from_left))) or 1.0
    agree = float(np.max(np.abs(from_left - from_right))) / scale
    return {"y": y, "Phi": from_left, "Phi_right": from_right, "mu": complex(mu), "D": complex(D),
            "agreement": agree, "consistent": agree < check_tol}


def mu_limits(cfg: RayleighConfig, w_in: Callable, c_r: float) -> tuple[complex, complex]:
    """(mu_+, mu_-) = (J3 +- i J4) / (J1 -+ i J2)."""
    J = j_functions(cfg, c_r, w_in)
    plus = (J.J3 + 1j * J.J4) / (J.J1 - 1j * J.J2)
    minus = (J.J3 - 1j * J.J4) / (J.J1 + 1j * J.J2)
    return complex(plus), complex(minus)


def forced_residual(cfg: RayleighConfig, y: np.ndarray, Phi: np.ndarray, w_in: Callable, c: complex,
                    exclude: float = 0.1) -> float:
    """Max |Phi'' - Phi - b0'' Phi/(b0 - c) - i w/(b0 - c)| by finite differences, away from y_c."""
    prof = cfg.profile
    y_c = prof.y_c(c.real)
    yy, P = y[1:-1], Phi[1:-1]
    hl, hr = yy - y[:-2], y[2:] - yy
    d2 = 2 * (hl * Phi[2:] - (hl + hr) * P + hr * Phi[:-2]) / (hl * hr * (hl + hr))
    s = prof.b(yy) - c
    res = d2 - P - prof.b_second(yy) * P / s - 1j * w_in(yy) / s
    mask = (np.abs(yy - y_c) > exclude) & (np.abs(yy) < cfg.Y_max - 1)
    return float(np.max(np.abs(res[mask]))) if mask.any() else 0.0
