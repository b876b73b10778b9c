"""Ghost-weight energy and mixed time-space norms of linear trajectories.

Fields are stored mode by mode: ``f_k(t, y) = (1/2pi) int_T e^{-ikx} f dx``, so
``2 cos(x) g(y)`` has coefficients g at k = +-1.  The norm

    ||f||_{L^p_t FL^1_k L^q_y} = sum_k ( int ( int |f_k|^q dy )^{p/q} dt )^{1/p}

is evaluated with trapezoid weights in t and y (``inf`` means a maximum).
For trajectories kept in frequency, L^2_y follows from Plancherel,
``||f_k||_{L^2_y} = sqrt(2 pi) ||h_k||_{L^2_xi}``, and L^inf_y is bounded by
``int |h_k| d xi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping

import numpy as np

from .modes import ModeState, Trajectory, reflect
from .params import ModelParams

SQRT_2PI = math.sqrt(2 * math.pi)
INF = math.inf


def ghost_weight(t: float, xi, k: int):
    """exp(2 arctan(xi/k - t)), bounded between e^-pi and e^pi."""
    return np.exp(2.0 * np.arctan(np.asarray(xi, dtype=float) / k - t))


def ghost_energy(state: ModeState) -> float:
    """Trapezoid value of int w(t, xi, k) |h_k|^2 d xi (no exponential time factor)."""
    w = ghost_weight(state.t, state.grid.xi, state.k)
    return float(np.sum(state.grid.weights() * w * np.abs(state.values) ** 2))


def energy_series(traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    return traj.times, np.array([ghost_energy(s) for s in traj.snapshots])


def _monotone(times, energies, C0: float, rate: float, slack: float) -> bool:
    e = energies * np.exp(-C0 * rate * times)
    return bool(np.all(e[1:] <= e[:-1] * (1 + slack)))


def closed_form_C0(traj: Trajectory) -> float:
    """max over consecutive snapshots of ln(E_{i+1}/E_i) / (M^2 gamma dt), floored at 0."""
    p = traj.params
    t, e = energy_series(traj)
    rate = p.M ** 2 * p.gamma
    if rate == 0:
        return 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.log(e[1:] / e[:-1]) / (rate * np.diff(t))
    r = r[np.isfinite(r)]
    return float(max(0.0, r.max())) if r.size else 0.0


def calibrate_C0(traj: Trajectory, tol: float = 1e-3, slack: float = 1e-10) -> float:
    """Smallest C0 (bisection to ``tol``) making exp(-C0 M^2 gamma t) E(t) non-increasing."""
    p = traj.params
    t, e = energy_series(traj)
    rate = p.M ** 2 * p.gamma
    if _monotone(t, e, 0.0, rate, slack):
        return 0.0
    if rate == 0:
        raise ValueError("energy grows with M = 0; no C0 can compensate")
    hi = 1.0
    while not _monotone(t, e, hi, rate, slack):
        hi *= 2.0
        if hi > 1e12:
            raise ValueError("C0 bisection failed to bracket")
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _monotone(t, e, mid, rate, slack):
            hi = mid
        else:
            lo = mid
    return hi


def weighted_energies(traj: Trajectory, C0: float) -> np.ndarray:
    p = traj.params
    t, e = energy_series(traj)
    return e * np.exp(-C0 * p.M ** 2 * p.gamma * t)


# ---------------------------------------------------------------- mixed norms

@dataclass(frozen=True)
class ModeField:
    """Mode coefficients f_k(t, y) on uniform y (and optionally t) grids."""

    y: np.ndarray
    modes: Mapping[int, np.ndarray]
    t: np.ndarray | None = None

    def __post_init__(self) -> None:
        nt = 1 if self.t is None else len(self.t)
        fixed = {}
        for k, v in self.modes.items():
            a = np.asarray(v, dtype=complex)
            if a.ndim == 1:
                a = a[None, :]
            if a.shape != (nt, len(self.y)):
                raise ValueError(f"mode {k} has shape {a.shape}, expected {(nt, len(self.y))}")
            fixed[int(k)] = a
        object.__setattr__(self, "modes", fixed)

    @classmethod
    def from_physical(cls, x: np.ndarray, y: np.ndarray, values: np.ndarray,
                      t: np.ndarray | None = None, tol: float = 0.0) -> "ModeField":
        """Decompose samples f(t, x, y) on a uniform periodic x-grid of [0, 2pi)."""
        v = np.asarray(values)
        if t is None and v.ndim == 2:
            v = v[None]
        nx = len(x)
        c = np.fft.fft(v, axis=1) / nx
        ks = np.fft.fftfreq(nx, d=1.0 / nx).astype(int)
        modes = {int(k): c[:, i, :] for i, k in enumerate(ks) if np.max(np.abs(c[:, i, :])) > tol}
        return cls(np.asarray(y, float), modes, None if t is None else np.asarray(t, float))

    def product(self, other: "ModeField") -> "ModeField":
        """Mode coefficients of the pointwise product (exact discrete convolution in k)."""
        if len(self.y) != len(other.y) or not np.allclose(self.y, other.y):
            raise ValueError("fields live on different y-grids")
        out: dict[int, np.ndarray] = {}
        for k1, a in self.modes.items():
            for k2, b in other.modes.items():
                out[k1 + k2] = out.get(k1 + k2, 0) + a * b
        return ModeField(self.y, out, self.t)


def _trap_weights(x: np.ndarray) -> np.ndarray:
    if len(x) == 1:
        return np.ones(1)
    d = np.diff(x)
    w = np.zeros(len(x))
    w[:-1] += d / 2
    w[1:] += d / 2
    return w


def _lp(values: np.ndarray, weights: np.ndarray, p: float, axis: int = -1) -> np.ndarray:
    a = np.abs(values)
    if p == INF:
        return a.max(axis=axis)
    return (np.sum(weights * a ** p, axis=axis)) ** (1.0 / p)


def _check_exponent(p) -> float:
    p = float(p)
    if p not in (1.0, 2.0, INF):
        raise ValueError(f"exponent must be 1, 2 or inf, got {p}")
    return p


def cl_norm(f, p: float, q: float, weight: Callable[[np.ndarray], np.ndarray] | np.ndarray | None = None):
    """Chemin-Lerner norm of a :class:`ModeField` or of a frequency-space trajectory."""
    p, q = _check_exponent(p), _check_exponent(q)
    if isinstance(f, (Trajectory, list, tuple)):
        return _traj_norm(f, p, q, weight)
    wy = _trap_weights(f.y)
    total = 0.0
    for k in sorted(f.modes):
        inner = _lp(f.modes[k], wy, q)  # over y, shape (nt,)
        if f.t is None:
            total += float(inner[0])
            continue
        wt = _weight_values(weight, f.t)
        total += float(_lp(wt * inner, _trap_weights(f.t), p))
    return total


def _weight_values(weight, t: np.ndarray) -> np.ndarray:
    if weight is None:
        return np.ones_like(t)
    if callable(weight):
        return np.asarray(weight(t), dtype=float)
    return np.asarray(weight, dtype=float)


def _as_trajs(trajs) -> list[Trajectory]:
    return [trajs] if isinstance(trajs, Trajectory) else list(trajs)


def _traj_norm(trajs, p: float, q: float, weight) -> float:
    total = 0.0
    for tr in _as_trajs(trajs):
        w = tr.grid.weights()
        if q == 2.0:
            inner = np.array([SQRT_2PI * math.sqrt(np.sum(w * np.abs(s.values) ** 2)) for s in tr.snapshots])
        elif q == INF:
            inner = np.array([np.sum(w * np.abs(s.values)) for s in tr.snapshots])
        else:
            raise ValueError("frequency trajectories support q = 2 or the q = inf bound only")
        t = tr.times
        total += float(_lp(_weight_values(weight, t) * inner, _trap_weights(t), p))
    return total


def holder_compatible(p: float, p1: float, p2: float) -> bool:
    def inv(x):
        return Fraction(0) if x == INF else Fraction(1) / Fraction(int(x))
    return inv(p) == inv(p1) + inv(p2)


def bilinear_check(f: ModeField, g: ModeField, p_split: tuple[float, float, float],
                   q_split: tuple[float, float, float], rtol: float = 1e-8) -> bool:
    """||fg||_{(p,q)} <= ||f||_{(p1,q1)} ||g||_{(p2,q2)} with 1/p = 1/p1 + 1/p2 and likewise q."""
    p, p1, p2 = (_check_exponent(x) for x in p_split)
    q, q1, q2 = (_check_exponent(x) for x in q_split)
    if not (holder_compatible(p, p1, p2) and holder_compatible(q, q1, q2)):
        raise ValueError(f"incompatible exponent split p={p_split}, q={q_split}")
    lhs = cl_norm(f.product(g), p, q)
    rhs = cl_norm(f, p1, q1) * cl_norm(g, p2, q2)
    return bool(lhs <= rhs * (1 + rtol))


def bilinear_sides(f: ModeField, g: ModeField, p_split, q_split) -> tuple[float, float]:
    p, p1, p2 = p_split
    q, q1, q2 = q_split
    return cl_norm(f.product(g), p, q), cl_norm(f, p1, q1) * cl_norm(g, p2, q2)


# ---------------------------------------------------------------- the five estimates

@dataclass
class NormReport:
    C0: float
    data_norm: float
    lhs: dict[str, float]
    rhs: dict[str, float]
    constants: dict[str, float]
    grid: dict = field(default_factory=dict)

    @property
    def max_constant(self) -> float:
        return max(self.constants.values()) if self.constants else 0.0

    def to_dict(self) -> dict:
        return {"C0": self.C0, "data_norm": self.data_norm, "lhs": self.lhs, "rhs": self.rhs,
                "constants": self.constants, "max_constant": self.max_constant, "grid": self.grid}


ESTIMATES = ("solution", "gradient", "dx", "velocity", "dx_velocity")


def with_mirror(traj: Trajectory) -> list[Trajectory]:
    """The k trajectory together with its mirror image at -k."""
    mirrored = Trajectory(traj.params, traj.config, [reflect(s) for s in traj.snapshots])
    return [traj, mirrored]


def prop41_suite(trajs, C0: float | None = None) -> NormReport:
    """Weighted norms of the solution, its gradient, d_x, and the two velocity quantities."""
    trajs = _as_trajs(trajs)
    p = trajs[0].params
    if C0 is None:
        C0 = max(calibrate_C0(tr) for tr in trajs)
    lam = C0 * p.M ** 2 * p.gamma
    f_norm = 0.0
    sums = dict.fromkeys(ESTIMATES, 0.0)
    for tr in trajs:
        k = tr.k
        xi, w = tr.grid.xi, tr.grid.weights()
        t = tr.times
        wt = np.exp(-0.5 * lam * t)
        f_norm += SQRT_2PI * math.sqrt(np.sum(w * np.abs(tr.snapshots[0].values) ** 2))
        sol, grad, dx, vel, dxv = [], [], [], [], []
        for s in tr.snapshots:
            a = np.abs(s.values)
            lap = k * k + (xi - k * s.t) ** 2
            sol.append(SQRT_2PI * math.sqrt(np.sum(w * a * a)))
            grad.append(SQRT_2PI * math.sqrt(np.sum(w * lap * a * a)))
            dx.append(abs(k) * sol[-1])
            vel.append(np.sum(w * a / np.sqrt(lap)))
            dxv.append(np.sum(w * a * abs(k) / lap))
        tw = _trap_weights(t)
        sums["solution"] += float(np.max(wt * np.array(sol)))
        sums["gradient"] += float(math.sqrt(np.sum(tw * (wt * np.array(grad)) ** 2)))
        sums["dx"] += float(np.sum(tw * wt * np.array(dx)))
        sums["velocity"] += float(np.max(wt * np.array(vel)))
        sums["dx_velocity"] += float(math.sqrt(np.sum(tw * (wt * np.array(dxv)) ** 2)))
    scale = {"solution": 1.0, "gradient": p.nu ** -0.5 if p.nu > 0 else INF,
             "dx": p.nu ** -0.5 if p.nu > 0 else INF, "velocity": 1.0, "dx_velocity": 1.0}
    rhs = {k: scale[k] * f_norm for k in ESTIMATES}
    consts = {k: (sums[k] / rhs[k] if rhs[k] > 0 and math.isfinite(rhs[k]) else 0.0) for k in ESTIMATES}
    g = trajs[0].grid
    return NormReport(C0, f_norm, sums, rhs, consts,
                      {"xi_min": g.xi_min, "xi_max": g.xi_max, "n": g.n, "snapshots": len(trajs[0].snapshots),
                       "T": float(trajs[0].times[-1])})


# ---------------------------------------------------------------- canonical data

def omega_in_amplitude(params: ModelParams, variant: str = "gamma") -> float:
    """eps0 nu^(2/3 + delta1 - delta0/3) / (sqrt(eps1) sqrt(L)), L = -ln gamma or -ln nu."""
    p = params
    L = -math.log(p.gamma) if variant == "gamma" else -math.log(p.nu)
    return p.eps0 * p.nu ** (2 / 3 + p.delta1 - p.delta0 / 3) / (math.sqrt(p.eps1) * math.sqrt(L))


def band_profile_l2(half_width: float) -> float:
    """True L^2_y norm of the band data under h_hat = (1/2pi) int e^{-iy xi} h dy."""
    return math.sqrt(2 * math.pi * 2 * half_width)


def omega_in_cl_norm(params: ModelParams, half_width: float | None = None) -> float:
    """||omega_in||_{FL^1 L^2} for data amplitude * 2 cos(x) h_in(y)."""
    hw = params.band_half_width if half_width is None else half_width
    return 2.0 * omega_in_amplitude(params) * band_profile_l2(hw)


def band_field(half_width: float, y: np.ndarray, amplitude: float = 1.0) -> ModeField:
    """2 cos(x) h_in(y) with h_in(y) = 2 sin(hw y) / y, the inverse transform of the band."""
    y = np.asarray(y, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = np.where(y == 0, 2 * half_width, 2 * np.sin(half_width * y) / np.where(y == 0, 1, y))
    return ModeField(y, {1: amplitude * h, -1: amplitude * h})
