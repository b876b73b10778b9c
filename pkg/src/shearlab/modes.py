"""Single-wavenumber evolution of the modified linearized problem in Fourier space.

In the shearing frame the k-th horizontal mode obeys

    d_t h(xi) = int K(t, xi - eta) k h(eta) / ((eta - k t)^2 + k^2) d eta
                - nu (k^2 + (xi - k t)^2) h(xi),

with K(t, z) = M gamma^2 z exp(-(nu t + gamma^2/4) z^2).  The dissipative
diagonal is integrated exactly (integrating factor) and the nonlocal term by
classical RK4 on the transformed variable.  Frequency transforms follow
h_hat(xi) = (1/2pi) int e^{-i y xi} h(y) dy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
from scipy import fft as sfft
from scipy.signal import fftconvolve
from scipy.special import erfc as _erfc

from .params import ModelParams, ProfileKind, ShearProfile


class Variant(str, Enum):
    MODIFIED_VISCOUS = "ModifiedViscous"
    MODIFIED_INVISCID = "ModifiedInviscid"
    TRANSPORT_VISCOUS = "TransportViscous"
    COUETTE_EXACT = "CouetteExact"


class GridTooSmall(ValueError):
    pass


class IntegrationDiverged(RuntimeError):
    def __init__(self, t: float, msg: str = "non-finite state") -> None:
        super().__init__(f"{msg} at t={t:.6g}")
        self.t = t


class CeilingViolation(AssertionError):
    def __init__(self, t: float, value: float, bound: float) -> None:
        super().__init__(f"sup-norm ceiling broken at t={t:.6g}: {value:.6e} > {bound:.6e}")
        self.t, self.value, self.bound = t, value, bound


MAX_DXI = 0.25


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform grid xi_min, xi_min + dxi, ..., xi_max (n points)."""

    xi_min: float
    xi_max: float
    n: int

    def __post_init__(self) -> None:
        if self.n < 2 or not self.xi_max > self.xi_min:
            raise ValueError("need n >= 2 and xi_max > xi_min")
        if self.dxi > MAX_DXI + 1e-12:
            raise ValueError(f"dxi={self.dxi:.4g} exceeds {MAX_DXI}; the Lorentzian is unresolved")

    @classmethod
    def covering(cls, xi_min: float, xi_max: float, dxi: float) -> "FrequencyGrid":
        n = int(math.ceil((xi_max - xi_min) / dxi - 1e-9)) + 1
        return cls(xi_min, xi_min + (n - 1) * dxi, n)

    @classmethod
    def for_run(cls, half_width: float, T_final: float, gamma: float, dxi: float = 0.25,
                k: int = 1) -> "FrequencyGrid":
        """Smallest grid holding the band plus T + 5/gamma of forward drift."""
        reach = abs(k) * T_final + 5.0 / gamma
        lo, hi = -half_width - 5.0, max(half_width, 0.0) + reach
        if k < 0:
            lo, hi = -hi, -lo
        return cls.covering(lo, hi, dxi)

    @property
    def dxi(self) -> float:
        return (self.xi_max - self.xi_min) / (self.n - 1)

    @property
    def xi(self) -> np.ndarray:
        return self.xi_min + self.dxi * np.arange(self.n)

    def weights(self) -> np.ndarray:
        w = np.full(self.n, self.dxi)
        w[0] = w[-1] = 0.5 * self.dxi
        return w

    def refined(self) -> "FrequencyGrid":
        return FrequencyGrid(self.xi_min, self.xi_max, 2 * self.n - 1)


@dataclass(frozen=True)
class ModeState:
    k: int
    t: float
    values: np.ndarray
    grid: FrequencyGrid

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.n,):
            raise ValueError("values do not match the grid")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def l2_norm(self) -> float:
        return float(math.sqrt(np.sum(self.grid.weights() * np.abs(self.values) ** 2)))

    def l1_norm(self) -> float:
        return float(np.sum(self.grid.weights() * np.abs(self.values)))

    def with_values(self, t: float, values: np.ndarray) -> "ModeState":
        return ModeState(self.k, t, values, self.grid)


@dataclass(frozen=True)
class EvolutionConfig:
    dt: float
    variant: Variant = Variant.MODIFIED_VISCOUS
    snapshot_times: tuple[float, ...] = ()
    check_ceiling: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "snapshot_times", tuple(sorted(float(t) for t in self.snapshot_times)))
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    def validate(self, params: ModelParams) -> None:
        limit = max_dt(params)
        if self.dt > limit * (1 + 1e-12):
            raise ValueError(f"dt={self.dt} exceeds the stability cap {limit:.4g}")
        if self.variant is Variant.MODIFIED_INVISCID and params.nu != 0:
            raise ValueError("inviscid variant needs nu = 0")
        if self.variant is Variant.COUETTE_EXACT and params.M != 0:
            raise ValueError("CouetteExact needs M = 0")


def max_dt(params: ModelParams) -> float:
    return min(0.2, 0.1 / (params.M * math.pi * params.gamma + 1e-30))


@dataclass
class Trajectory:
    params: ModelParams
    config: EvolutionConfig
    snapshots: list[ModeState] = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    @property
    def grid(self) -> FrequencyGrid:
        return self.snapshots[0].grid

    @property
    def k(self) -> int:
        return self.snapshots[0].k

    def at(self, t: float, tol: float = 1e-9) -> ModeState:
        for s in self.snapshots:
            if abs(s.t - t) <= tol * max(1.0, abs(t)):
                return s
        raise KeyError(f"no snapshot at t={t}")

    def between(self, t0: float, t1: float, tol: float = 1e-9) -> list[ModeState]:
        return [s for s in self.snapshots if t0 - tol <= s.t <= t1 + tol]

    def values(self) -> np.ndarray:
        return np.stack([s.values for s in self.snapshots])


def kernel_value(params: ModelParams, t: float, xi, eta, k: int):
    """Coefficient of h(eta) in the nonlocal integrand."""
    if k == 0:
        raise ValueError("k must be nonzero")
    z = np.asarray(xi, dtype=float) - np.asarray(eta, dtype=float)
    a = params.nu * t + params.gamma ** 2 / 4
    eta = np.asarray(eta, dtype=float)
    return params.M * params.gamma ** 2 * z * np.exp(-a * z * z) * k / ((eta - k * t) ** 2 + k * k)


def gaussian_factor_sup(params: ModelParams, t: float = 0.0) -> float:
    """sup_z gamma^2 z exp(-a z^2) = gamma^2 / sqrt(2 e a), a = nu t + gamma^2/4."""
    a = params.nu * t + params.gamma ** 2 / 4
    return params.gamma ** 2 / math.sqrt(2 * math.e * a)


def init_band(grid: FrequencyGrid, half_width: float, k: int = 1) -> ModeState:
    """Indicator data h(0, xi) = 1 on |xi| <= half_width."""
    if half_width > grid.xi_max or -half_width < grid.xi_min:
        raise GridTooSmall(f"band half width {half_width} does not fit in [{grid.xi_min}, {grid.xi_max}]")
    xi = grid.xi
    vals = (np.abs(xi) <= half_width + 1e-12 * max(1.0, half_width)).astype(complex)
    if half_width <= 0:
        vals[:] = 0
    return ModeState(k, 0.0, vals, grid)


def band_l2_y(half_width: float) -> float:
    """||h_in||_{L^2_y} for the band in the stated normalization 2 pi sqrt(2 hw)."""
    return 2 * math.pi * math.sqrt(2 * half_width)


def dissipation_factor(nu: float, k: int, xi: np.ndarray, a: float, b: float) -> np.ndarray:
    """exp(-nu int_a^b (k^2 + (xi - k s)^2) ds) in cancellation-free form."""
    if nu == 0 or b == a:
        return np.ones_like(xi)
    A, B = xi - k * a, xi - k * b
    return np.exp(-nu * (b - a) * (k * k + (A * A + A * B + B * B) / 3.0))


def couette_exact(params: ModelParams, k: int, xi, t: float, initial=1.0):
    """Pure-Couette mode from time 0: initial * exp(-nu (k^2 t + xi^2 t - k xi t^2 + k^2 t^3 / 3))."""
    if params.M != 0:
        raise ValueError("couette_exact needs M = 0")
    xi = np.asarray(xi, dtype=float)
    nu = params.nu
    phase = nu * (k * k * t + xi * xi * t - k * xi * t * t + k * k * t ** 3 / 3.0)
    return np.asarray(initial, dtype=complex) * np.exp(-phase)


def ceiling(params: ModelParams, k: int, t: float) -> float:
    """Sup-norm growth ceiling exp(-nu k^2 (t + t^3/12)) exp(M pi gamma t)."""
    return math.exp(-params.nu * k * k * (t + t ** 3 / 12.0) + params.M * math.pi * params.gamma * t)


TAPER_WIDTH = 0.5


def periodic_deviation(profile: ShearProfile, y: np.ndarray, half_period: float, t: float = 0.0,
                       width: float = TAPER_WIDTH) -> np.ndarray:
    """b - y rolled off smoothly to ~1e-15 at |y| = half_period.

    The raw deviation tends to +-pi M gamma^2, which would jump at the periodic seam
    and leak a slowly decaying sawtooth spectrum into every frequency window.
    """
    edge = half_period - 5.5 * width
    if edge < 8 * profile.width(t):
        raise ValueError("periodic y-domain too short for the bump and its taper")
    taper = 0.5 * _erfc((np.abs(y) - edge) / width)
    return profile.deviation(y, t) * taper


def transport_fft_size(gamma: float, dxi: float, n: int) -> int:
    """Padded length for y-multiplications: y-spacing gamma/40, independent of n once n is small."""
    return sfft.next_fast_len(max(n, int(math.ceil(80.0 * math.pi / (gamma * dxi)))))


class _RHS:
    """Nonlocal right-hand side for one (k, grid, variant)."""

    def __init__(self, params: ModelParams, grid: FrequencyGrid, k: int, variant: Variant) -> None:
        self.p, self.grid, self.k, self.variant = params, grid, k, variant
        self.xi = grid.xi
        self.w = grid.weights()
        g = params.gamma
        self.static = variant is Variant.TRANSPORT_VISCOUS
        # kernel support where the Gaussian exceeds ~1e-18
        a0 = g * g / 4
        reach = math.sqrt(42.0 / a0)
        self.m = min(grid.n - 1, int(math.ceil(reach / grid.dxi)))
        self.offsets = grid.dxi * np.arange(-self.m, self.m + 1)
        if self.static:
            self._static_kernel = self._kernel(0.0)
            self._setup_transport()

    def _kernel(self, t: float) -> np.ndarray:
        p = self.p
        a = p.gamma ** 2 / 4 + (0.0 if self.static else p.nu * t)
        z = self.offsets
        return p.M * p.gamma ** 2 * z * np.exp(-a * z * z)

    def _setup_transport(self) -> None:
        # (b0 - y) multiplies h in y; sample it on the y-grid dual to a padded xi-grid
        n, h = self.grid.n, self.grid.dxi
        self.P = transport_fft_size(self.p.gamma, h, n)
        y = 2 * math.pi * np.fft.fftfreq(self.P, d=h)
        prof = ShearProfile(self.p, ProfileKind.STATIC)
        self.symbol = periodic_deviation(prof, y, math.pi / h)

    def transport(self, v: np.ndarray) -> np.ndarray:
        """F((b0 - y) h) via the band-limited multiplication operator."""
        n = self.grid.n
        hy = sfft.ifft(v, n=self.P)
        return sfft.fft(self.symbol * hy)[:n]

    def __call__(self, t: float, v: np.ndarray) -> np.ndarray:
        k, p = self.k, self.p
        if p.M == 0:
            return np.zeros_like(v)
        ker = self._static_kernel if self.static else self._kernel(t)
        g = self.w * k * v / ((self.xi - k * t) ** 2 + k * k)
        out = fftconvolve(g, ker, mode="same")
        if self.static:
            out = out - 1j * k * self.transport(v)
        return out


def _rk4_step(rhs: _RHS, nu: float, k: int, xi: np.ndarray, t: float, v: np.ndarray,
              dt: float) -> np.ndarray:
    half = t + dt / 2
    Ea = dissipation_factor(nu, k, xi, t, half)
    Eb = dissipation_factor(nu, k, xi, half, t + dt)
    Ef = Ea * Eb
    k1 = rhs(t, v)
    k2 = rhs(half, Ea * (v + 0.5 * dt * k1))
    k3 = rhs(half, Ea * v + 0.5 * dt * k2)
    k4 = rhs(t + dt, Ef * v + dt * Eb * k3)
    return Ef * v + dt / 6.0 * (Ef * k1 + 2.0 * Eb * (k2 + k3) + k4)


def step(state: ModeState, cfg: EvolutionConfig, params: ModelParams, dt: float | None = None,
         _rhs: _RHS | None = None) -> ModeState:
    """Advance one integrating-factor RK4 step (length ``dt`` or ``cfg.dt``)."""
    dt = cfg.dt if dt is None else dt
    xi = state.grid.xi
    if cfg.variant is Variant.COUETTE_EXACT:
        new = state.values * dissipation_factor(params.nu, state.k, xi, state.t, state.t + dt)
    else:
        rhs = _rhs or _RHS(params, state.grid, state.k, cfg.variant)
        new = _rk4_step(rhs, params.nu, state.k, xi, state.t, state.values, dt)
    if not np.all(np.isfinite(new)):
        raise IntegrationDiverged(state.t + dt)
    return state.with_values(state.t + dt, new)


def _check_ceiling(s: ModeState, sup0: float, params: ModelParams) -> None:
    bound = ceiling(params, s.k, s.t) * sup0 * (1 + 10 * s.grid.dxi)
    val = s.sup_norm()
    if val > bound:
        raise CeilingViolation(s.t, val, bound)


def evolve(state: ModeState, cfg: EvolutionConfig, params: ModelParams, T_final: float) -> Trajectory:
    """Integrate to ``T_final`` recording snapshots at 0, each requested time and the end."""
    cfg.validate(params)
    if T_final < 0:
        raise ValueError("T_final must be non-negative")
    if cfg.variant is not Variant.COUETTE_EXACT and params.M > 0:
        need = state.t + abs(state.k) * (T_final - state.t) + 5.0 / params.gamma
        edge = state.grid.xi_max if state.k > 0 else -state.grid.xi_min
        if need > edge + 1e-9:
            raise GridTooSmall(f"grid edge {edge} is short of the drift reach {need:.4g}")
    marks = sorted({t for t in cfg.snapshot_times if state.t < t < T_final} | {T_final})
    traj = Trajectory(params, cfg, [state])
    if T_final <= state.t:
        return traj
    check = cfg.check_ceiling and cfg.variant is not Variant.TRANSPORT_VISCOUS
    sup0 = state.sup_norm()
    rhs = None if cfg.variant is Variant.COUETTE_EXACT else _RHS(params, state.grid, state.k, cfg.variant)
    cur = state
    for mark in marks:
        while cur.t < mark - 1e-12 * max(1.0, mark):
            h = min(cfg.dt, mark - cur.t)
            # avoid a sliver step: split the remainder evenly instead
            if mark - cur.t - h < 1e-3 * cfg.dt and mark - cur.t > h:
                h = mark - cur.t
            cur = step(cur, cfg, params, h, rhs)
        cur = cur.with_values(mark, cur.values)
        if check:
            _check_ceiling(cur, sup0, params)
        traj.snapshots.append(cur)
    return traj


@dataclass(frozen=True)
class DecayFit:
    a: float
    b: float
    intercept: float
    window: tuple[float, float]
    growth_constant: float
    k: int

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "intercept": self.intercept, "window": list(self.window),
                "growth_constant": self.growth_constant, "k": self.k}


def transport_decay_check(traj: Trajectory, window: tuple[float, float] | None = None) -> DecayFit:
    """Least-squares fit of log||h(t)||_2 = -a t^3 + b t + c over the late window."""
    p = traj.params
    if traj.config.variant is not Variant.TRANSPORT_VISCOUS or p.nu <= 0:
        raise ValueError("transport_decay_check needs a viscous TransportViscous trajectory")
    T = float(traj.times[-1])
    if T < 2 * p.nu ** (-1.0 / 3.0):
        raise ValueError(f"window too short: T={T:.4g} < 2 nu^(-1/3)={2 * p.nu ** (-1 / 3):.4g}")
    lo, hi = window or (T / 2, T)
    pts = [(s.t, s.l2_norm()) for s in traj.snapshots if lo - 1e-9 <= s.t <= hi + 1e-9]
    if len(pts) < 4:
        raise ValueError("need at least four snapshots in the fit window")
    t = np.array([q[0] for q in pts])
    y = np.log(np.array([q[1] for q in pts]))
    A = np.column_stack([-t ** 3, t, np.ones_like(t)])
    (a, b, c), *_ = np.linalg.lstsq(A, y, rcond=None)
    k = traj.k
    scale = p.M * (math.sqrt(p.gamma) + abs(k) * p.gamma ** 2)
    C = b / scale if scale > 0 else float("nan")
    return DecayFit(float(a), float(b), float(c), (float(lo), float(hi)), float(C), k)


def uniform_times(T: float, n: int) -> list[float]:
    return [T * i / n for i in range(1, n + 1)]


def run_band(params: ModelParams, half_width: float, T_final: float, *, k: int = 1,
             dxi: float = 0.25, dt: float | None = None, variant: Variant | str | None = None,
             snapshot_times: Iterable[float] = (), grid: FrequencyGrid | None = None,
             check_ceiling: bool = True) -> Trajectory:
    """Convenience: band data on a fitting grid, evolved to T_final."""
    if variant is None:
        variant = Variant.MODIFIED_INVISCID if params.nu == 0 else Variant.MODIFIED_VISCOUS
    grid = grid or FrequencyGrid.for_run(half_width, T_final, params.gamma, dxi, k)
    cfg = EvolutionConfig(dt or max_dt(params), Variant(variant), tuple(snapshot_times), check_ceiling)
    return evolve(init_band(grid, half_width, k), cfg, params, T_final)


def snapshot_rows(s: ModeState) -> list[tuple[float, float, float]]:
    return [(float(x), float(v.real), float(v.imag)) for x, v in zip(s.grid.xi, s.values)]


def reflect(state: ModeState) -> ModeState:
    """Map h_k(xi) to the (-k, -xi) mode on the mirrored grid."""
    g = state.grid
    mg = FrequencyGrid(-g.xi_max, -g.xi_min, g.n)
    return ModeState(-state.k, state.t, state.values[::-1].copy(), mg)


__all__: Sequence[str] = [
    "Variant", "FrequencyGrid", "ModeState", "EvolutionConfig", "Trajectory", "kernel_value",
    "init_band", "step", "evolve", "couette_exact", "transport_decay_check", "ceiling",
    "GridTooSmall", "IntegrationDiverged", "CeilingViolation", "run_band", "max_dt",
]
