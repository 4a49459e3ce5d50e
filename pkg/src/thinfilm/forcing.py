"""Source terms S in three regimes and the admissibility test.

* constant:  S(t, x) = S0
* spatial:   S(x) = sum_k c_k phi_k(x), time independent
* spacetime: S(t, x) = g(t) h(x), with g(t) = A1 / (2 (1+t)^sigma) or a
  piecewise-linear table, and h given by cosine coefficients

A source is admissible at time t if [S(t)]_s <= int S(t) dx / (|Omega| C),
where C is the sup-embedding constant.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .spectral import Field, Grid, seminorm

KINDS = ("constant", "spatial", "spacetime")


@dataclass(frozen=True)
class ForcingSpec:
    kind: str
    S0: float = 0.0
    coeffs: tuple = ()
    A1: float = 0.0
    sigma: float = 0.0
    table: tuple = ()  # ((t0, g0), (t1, g1), ...) strictly increasing t

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown forcing kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "spacetime":
            if not self.coeffs:
                raise ValueError("spacetime forcing needs a spatial profile")
            if self.table:
                ts = [t for t, _ in self.table]
                if len(ts) < 2 or any(b <= a for a, b in zip(ts, ts[1:])):
                    raise ValueError("amplitude table needs >= 2 strictly increasing times")
                if ts[0] > 0:
                    raise ValueError("amplitude table must start at t <= 0")
            elif not self.A1 > 0:
                raise ValueError("decay-law amplitude A1 must be positive")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        object.__setattr__(self, "table", tuple((float(t), float(g)) for t, g in self.table))

    @classmethod
    def constant(cls, S0: float) -> "ForcingSpec":
        return cls("constant", S0=float(S0))

    @classmethod
    def zero(cls) -> "ForcingSpec":
        return cls("constant", S0=0.0)

    @classmethod
    def spatial(cls, coeffs) -> "ForcingSpec":
        return cls("spatial", coeffs=tuple(coeffs))

    @classmethod
    def decay_law(cls, profile, A1: float, sigma: float) -> "ForcingSpec":
        return cls("spacetime", coeffs=tuple(profile), A1=float(A1), sigma=float(sigma))

    @classmethod
    def tabulated(cls, profile, table) -> "ForcingSpec":
        return cls("spacetime", coeffs=tuple(profile), table=tuple(table))

    @property
    def time_independent(self) -> bool:
        return self.kind != "spacetime"

    @property
    def has_decay_law(self) -> bool:
        return self.kind == "spacetime" and not self.table

    def amplitude(self, t: float) -> float:
        """g(t); 1 for the time independent kinds."""
        if self.kind != "spacetime":
            return 1.0
        if self.table:
            ts, gs = zip(*self.table)
            return float(np.interp(t, ts, gs))
        return self.A1 / (2.0 * (1.0 + t) ** self.sigma)

    def amplitude_integral(self, t0: float, t1: float) -> float:
        """int_{t0}^{t1} g(t) dt, exact for both amplitude laws."""
        if self.kind != "spacetime":
            return t1 - t0
        if self.table:
            ts = np.array([t for t, _ in self.table])
            inner = ts[(ts > t0) & (ts < t1)]
            knots = np.concatenate(([t0], inner, [t1]))
            g = np.array([self.amplitude(t) for t in knots])
            return float(np.sum(0.5 * (g[1:] + g[:-1]) * np.diff(knots)))
        a, sig = self.A1 / 2.0, self.sigma
        if sig == 1:
            return a * (np.log1p(t1) - np.log1p(t0))
        return a * ((1 + t1) ** (1 - sig) - (1 + t0) ** (1 - sig)) / (1 - sig)

    def profile(self, grid: Grid) -> Field:
        """Spatial factor (time-independent part) of S."""
        if self.kind == "constant":
            return Field.constant(grid, self.S0)
        if len(self.coeffs) > grid.N:
            raise ValueError(f"forcing has {len(self.coeffs)} modes but the grid only {grid.N}")
        return Field.from_coeffs(grid, self.coeffs)

    def mass_integral(self, grid: Grid, t0: float, t1: float) -> float:
        """int_{t0}^{t1} int S dx dt (exact in time)."""
        return self.profile(grid).integral() * self.amplitude_integral(t0, t1)


def evaluate(spec: ForcingSpec, t: float, grid: Grid) -> Field:
    if t < 0:
        raise ValueError("forcing evaluated at negative time")
    prof = spec.profile(grid)
    if spec.kind != "spacetime":
        return prof
    return prof * spec.amplitude(t)


@dataclass(frozen=True)
class AdmissibilityReport:
    mean_rate: float      # mean of S at the worst sample
    seminorm: float       # [S]_s at the worst sample
    C_omega: float
    passes: bool
    worst_time: float = 0.0
    margins: tuple = field(default=(), repr=False)  # mean_rate/C - seminorm per sample


def default_time_samples(tau: float, T: float) -> list:
    """0, then tau * 2^k up to T, then T."""
    ts = [0.0]
    t = tau
    while t < T:
        ts.append(t)
        t *= 2.0
    if T > 0:
        ts.append(float(T))
    return ts


def check_admissibility(spec: ForcingSpec, grid: Grid, s: float, C_omega: float,
                        t_samples=(0.0,), tol: float = 1e-14) -> AdmissibilityReport:
    if not C_omega > 0:
        raise ValueError("embedding constant must be positive")
    margins = []
    for t in t_samples:
        S = evaluate(spec, t, grid)
        mean = S.mean()
        semi = seminorm(S, s)
        margins.append((mean / C_omega - semi, t, mean, semi))
    worst = min(margins, key=lambda m: m[0])
    scale = max(1.0, abs(worst[2]))
    return AdmissibilityReport(mean_rate=worst[2], seminorm=worst[3], C_omega=C_omega,
                               passes=bool(worst[0] >= -tol * scale), worst_time=worst[1],
                               margins=tuple(m[0] for m in margins))


def satisfies_decay_law(spec: ForcingSpec, grid: Grid, s: float, t_samples) -> bool:
    """[S(t)]_s <= A1 / (2 (1+t)^sigma) at every sample (decay-law sources only)."""
    if not spec.has_decay_law:
        return False
    h = seminorm(spec.profile(grid), s)
    return all(h * spec.amplitude(t) <= spec.A1 / (2 * (1 + t) ** spec.sigma) * (1 + 1e-14)
               for t in t_samples)


def admissible_perturbation_limit(grid: Grid, s: float, C_omega: float, base: float, k: int) -> float:
    """Largest delta with S = base + delta phi_k admissible, found by root bracketing."""
    if base <= 0:
        return 0.0

    def gap(delta):
        c = np.zeros(k + 1)
        c[0] = base * np.sqrt(grid.L)
        c[k] = delta
        S = Field.from_coeffs(grid, c)
        return S.mean() / C_omega - seminorm(S, s)

    hi = 1.0
    while gap(hi) > 0:
        hi *= 2.0
    return float(brentq(gap, 0.0, hi, xtol=1e-15, rtol=1e-15))
