"""Model parameters and the closed-form Gaussian-bump shear profiles.

The background flow is Couette flow plus an error-function bump,

    b(t, y) = y + pi M gamma^2 erf(y / s(t)),   s(t)^2 = 4 nu t + gamma^2,

which solves the heat equation exactly.  ``Static`` freezes ``t = 0`` and
``Couette`` drops the bump.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Mapping

import numpy as np
from scipy.special import erf

SQRT_PI = math.sqrt(math.pi)

# Lower bound for M from the growth-region arithmetic 5 / (2 pi (e^-2 - e^-4.5)).
M_LOWER_BOUND = 5.0 / (2.0 * math.pi * (math.exp(-2.0) - math.exp(-4.5)))
M0_PROXY = 7.0


class Regime(str, Enum):
    VISCOUS_COUPLED = "ViscousCoupled"
    INVISCID = "Inviscid"
    FREE = "Free"


class ProfileKind(str, Enum):
    TIME_EVOLVED = "TimeEvolved"
    STATIC = "Static"
    COUETTE = "Couette"


def coupled_viscosity(gamma: float, delta0: float) -> float:
    """Viscosity tied to the bump width, nu = gamma^(3 / (1 - 2 delta0))."""
    return gamma ** (3.0 / (1.0 - 2.0 * delta0))


def default_eps1(M: float, delta0: float, regime: Regime) -> float:
    if M <= 0:
        raise ValueError("eps1 has no default when M = 0; pass it explicitly")
    if regime is Regime.INVISCID:
        return 1.0 / (9.0 * M * math.pi)
    return 2.0 * delta0 / (M * math.pi)


PARAM_KEYS = ("M", "gamma", "nu", "delta0", "delta1", "eps0", "eps1", "regime")


@dataclass(frozen=True)
class ModelParams:
    """Physical and asymptotic parameters (M, gamma, nu, delta0, delta1, eps0, eps1).

    Build through :meth:`viscous`, :meth:`inviscid` or :meth:`free` so the
    couplings are applied; the constructor only validates.
    """

    M: float
    gamma: float
    nu: float
    delta0: float = 0.05
    delta1: float = 0.01
    eps0: float = 1e-3
    eps1: float = field(default=float("nan"))
    regime: Regime = Regime.FREE

    def __post_init__(self) -> None:
        object.__setattr__(self, "regime", Regime(self.regime))
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.nu < 0:
            raise ValueError(f"nu must be non-negative, got {self.nu}")
        if self.M < 0:
            raise ValueError(f"M must be non-negative, got {self.M}")
        if self.regime is Regime.VISCOUS_COUPLED:
            target = coupled_viscosity(self.gamma, self.delta0)
            if abs(self.nu - target) > 1e-12 * target:
                raise ValueError(f"nu={self.nu} breaks the coupling nu=gamma^(3/(1-2 delta0))={target}")
        if self.regime is Regime.INVISCID and self.nu != 0:
            raise ValueError("inviscid regime requires nu = 0")

    @classmethod
    def viscous(cls, M: float, gamma: float, delta0: float = 0.05, **kw: Any) -> "ModelParams":
        kw.setdefault("eps1", default_eps1(M, delta0, Regime.VISCOUS_COUPLED) if M > 0 else float("nan"))
        return cls(M=M, gamma=gamma, nu=coupled_viscosity(gamma, delta0), delta0=delta0,
                   regime=Regime.VISCOUS_COUPLED, **kw)

    @classmethod
    def inviscid(cls, M: float, gamma: float, **kw: Any) -> "ModelParams":
        delta0 = kw.pop("delta0", 0.05)
        kw.setdefault("eps1", default_eps1(M, delta0, Regime.INVISCID) if M > 0 else float("nan"))
        return cls(M=M, gamma=gamma, nu=0.0, delta0=delta0, regime=Regime.INVISCID, **kw)

    @classmethod
    def free(cls, M: float, gamma: float, nu: float, **kw: Any) -> "ModelParams":
        delta0 = kw.pop("delta0", 0.05)
        kw.setdefault("eps1", default_eps1(M, delta0, Regime.VISCOUS_COUPLED) if M > 0 else float("nan"))
        return cls(M=M, gamma=gamma, nu=nu, delta0=delta0, regime=Regime.FREE, **kw)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "ModelParams":
        """Parse config keys; unknown keys are rejected, couplings filled in."""
        unknown = set(data) - set(PARAM_KEYS)
        if unknown:
            raise ValueError(f"unknown parameter keys: {sorted(unknown)}")
        if "M" not in data or "gamma" not in data:
            raise ValueError("config must define M and gamma")
        regime = Regime(data.get("regime", Regime.FREE.value))
        kw = {k: float(data[k]) for k in ("delta0", "delta1", "eps0", "eps1") if k in data}
        M, gamma = float(data["M"]), float(data["gamma"])
        if regime is Regime.VISCOUS_COUPLED:
            p = cls.viscous(M, gamma, **kw)
            if "nu" in data and abs(float(data["nu"]) - p.nu) > 1e-12 * p.nu:
                raise ValueError(f"nu={data['nu']} breaks the viscous coupling (expected {p.nu})")
            return p
        if regime is Regime.INVISCID:
            if float(data.get("nu", 0.0)) != 0.0:
                raise ValueError("inviscid regime requires nu = 0")
            return cls.inviscid(M, gamma, **kw)
        if "nu" not in data:
            raise ValueError("Free regime needs an explicit nu")
        return cls.free(M, gamma, float(data["nu"]), **kw)

    @classmethod
    def from_file(cls, path: str | Path) -> "ModelParams":
        return cls.from_mapping(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["regime"] = self.regime.value
        return d

    def with_(self, **changes: Any) -> "ModelParams":
        return replace(self, **changes)

    @property
    def band_half_width(self) -> float:
        """Default initial-band half width 2 eps1 gamma^-1 ln(gamma^-1)."""
        return 2.0 * self.eps1 / self.gamma * math.log(1.0 / self.gamma)

    @property
    def growth_ceiling_rate(self) -> float:
        """Exponential rate M pi gamma of the sup-norm ceiling."""
        return self.M * math.pi * self.gamma


def _hermite(n: int, u: np.ndarray) -> np.ndarray:
    # physicists' Hermite polynomials, enough orders for the Taylor seeds
    if n == 0:
        return np.ones_like(u)
    if n == 1:
        return 2 * u
    h0, h1 = np.ones_like(u), 2 * u
    for k in range(1, n):
        h0, h1 = h1, 2 * u * h1 - 2 * k * h0
    return h1


@dataclass(frozen=True)
class ShearProfile:
    """Closed-form background b(t, y) with analytic derivatives in y."""

    params: ModelParams
    kind: ProfileKind = ProfileKind.TIME_EVOLVED

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ProfileKind(self.kind))

    def width(self, t: float = 0.0) -> float:
        """Current bump width s = sqrt(4 nu t + gamma^2)."""
        if self.kind is ProfileKind.TIME_EVOLVED:
            return math.sqrt(4.0 * self.params.nu * t + self.params.gamma ** 2)
        return self.params.gamma

    def _amp(self) -> float:
        if self.kind is ProfileKind.COUETTE:
            return 0.0
        return math.pi * self.params.M * self.params.gamma ** 2

    def b(self, y, t: float = 0.0):
        y = np.asarray(y, dtype=float)
        return y + self._amp() * erf(y / self.width(t))

    def deviation(self, y, t: float = 0.0):
        """b - y, computed without cancellation."""
        y = np.asarray(y, dtype=float)
        return self._amp() * erf(y / self.width(t))

    def derivative(self, y, order: int, t: float = 0.0):
        """d^order b / dy^order for order >= 1."""
        if order < 1:
            raise ValueError("order must be >= 1")
        y = np.asarray(y, dtype=float)
        s = self.width(t)
        u = y / s
        # d/dy erf(y/s) = 2/(sqrt(pi) s) e^{-u^2}; further derivatives bring Hermite factors
        coeff = self._amp() * 2.0 / (SQRT_PI * s)
        n = order - 1
        val = coeff * (-1) ** n * _hermite(n, u) * np.exp(-u * u) / s ** n
        return val + 1.0 if order == 1 else val

    def b_prime(self, y, t: float = 0.0):
        return self.derivative(y, 1, t)

    def b_second(self, y, t: float = 0.0):
        return self.derivative(y, 2, t)

    def b_third(self, y, t: float = 0.0):
        return self.derivative(y, 3, t)

    def sup_deviation(self) -> float:
        """sup_y |b - y| = pi M gamma^2, the same for every t."""
        if self.kind is ProfileKind.COUETTE:
            raise ValueError("sup_deviation is defined for the bump profiles only")
        return self._amp()

    def hdot1_deviation(self, t: float = 0.0) -> float:
        """||b(t) - y||_{Hdot^1} = (2 pi)^{3/4} M gamma^2 / (4 nu t + gamma^2)^{1/4}."""
        if self.kind is ProfileKind.COUETTE:
            return 0.0
        p = self.params
        return (2 * math.pi) ** 0.75 * p.M * p.gamma ** 2 / math.sqrt(self.width(t))

    def heat_residual(self, t: float, y: float, h: float) -> float:
        """|d_t b - nu d_yy b| by central differences with step h (expected O(h^2))."""
        if self.kind is not ProfileKind.TIME_EVOLVED:
            raise ValueError("heat_residual needs the time-evolved profile")
        if not h > 0:
            raise ValueError("h must be positive")
        nu = self.params.nu
        bt = (self.deviation(y, t + h) - self.deviation(y, max(t - h, 0.0))) / (t + h - max(t - h, 0.0))
        byy = (self.deviation(y + h, t) - 2 * self.deviation(y, t) + self.deviation(y - h, t)) / h ** 2
        return float(abs(bt - nu * byy))

    def y_c(self, c_r: float) -> float:
        """Unique y with b0(y) = c_r (bisection then Newton polish)."""
        if self.kind is ProfileKind.COUETTE or self.params.M == 0:
            return float(c_r)
        # b0 is odd, so solve for |c_r| and mirror; y_c(0) = 0 exactly
        if c_r <= 0:
            return -self.y_c(-c_r) if c_r < 0 else 0.0
        amp = self._amp()
        lo, hi = c_r - amp - 1.0, c_r + amp + 1.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if float(self.b(mid)) < c_r:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-6 * self.params.gamma:
                break
        y = 0.5 * (lo + hi)
        tol = 1e-13 * (1.0 + abs(c_r))
        for _ in range(50):
            r = float(self.b(y)) - c_r
            if abs(r) < tol:
                break
            y -= r / float(self.b_prime(y))
        return y

    def y_c_array(self, c_r) -> np.ndarray:
        """Vectorised inverse b0^{-1}, Newton from the Couette guess with a safeguard."""
        v = np.asarray(c_r, dtype=float)
        if self.kind is ProfileKind.COUETTE or self.params.M == 0:
            return v.copy()
        amp = self._amp()
        lo, hi = v - amp, v + amp
        y = v.copy()
        for _ in range(200):
            r = self.b(y) - v
            lo = np.where(r < 0, y, lo)
            hi = np.where(r > 0, y, hi)
            step = y - r / self.b_prime(y)
            bad = (step <= lo) | (step >= hi)
            y = np.where(bad, 0.5 * (lo + hi), step)
            if np.all(np.abs(r) < 1e-14 * (1.0 + np.abs(v))):
                break
        return y

    def export_csv(self, path: str | Path, y, t: float = 0.0) -> None:
        """Two-column CSV (y, b - y)."""
        y = np.asarray(y, dtype=float)
        dev = self.deviation(y, t)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["y", "b_minus_y"])
            for a, b in zip(y, dev):
                w.writerow([repr(float(a)), repr(float(b))])


def default_y_half_width(gamma: float) -> float:
    return max(10.0, 10.0 * gamma)
