"""Comparison envelopes for the differential inequality X' <= alpha(t) X^lam + beta X^p.

Two cases, with 0 <= lam < 1 < p and beta < 0:

1. decaying forcing alpha(t) = A1 / (1+t)^sigma with sigma >= (p-lam)/(p-1):
   X(t) <= (B1 (1-lam))^{1/(1-lam)} / (1+t)^{1/(p-1)}, where B1 is the root of
   F(B) = -beta (1-lam)^q B^q - B (1-lam)/(p-1) - A1, q = (p-lam)/(1-lam).
   The envelope dominates X only if it does so at t = 0, i.e.
   X0 <= (B1 (1-lam))^{1/(1-lam)}; ``initial_ok`` reports this.
2. constant alpha > 0: X relaxes to the threshold (alpha/-beta)^{1/(p-lam)}
   no slower than an explicit algebraic rate.

``verify_comparison`` integrates the equality ODE (the extremal
sub-solution) with fixed-step RK4 and compares it with the envelope.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq


@dataclass(frozen=True)
class InequalityParams:
    lam: float
    p: float
    beta: float
    X0: float
    A1: float | None = None      # decay-law amplitude (case 1)
    sigma: float | None = None
    alpha: float | None = None   # constant forcing (case 2)

    def __post_init__(self):
        if not 0 <= self.lam < 1:
            raise ValueError(f"lam must lie in [0, 1), got {self.lam}")
        if not self.p > 1:
            raise ValueError(f"p must exceed 1, got {self.p}")
        if not self.beta < 0:
            raise ValueError(f"beta must be negative, got {self.beta}")
        if not self.X0 >= 0:
            raise ValueError("X0 must be nonnegative")
        decay = self.A1 is not None
        if decay == (self.alpha is not None):
            raise ValueError("give either (A1, sigma) or alpha")
        if decay:
            if self.A1 < 0 or self.sigma is None:
                raise ValueError("decay law needs A1 >= 0 and sigma")
            if self.sigma < self.sigma_min - 1e-15:
                raise ValueError(f"need sigma >= (p-lam)/(p-1) = {self.sigma_min}, got {self.sigma}")
        elif not self.alpha > 0:
            raise ValueError("constant alpha must be positive")

    @property
    def case(self) -> int:
        return 1 if self.A1 is not None else 2

    @property
    def sigma_min(self) -> float:
        return (self.p - self.lam) / (self.p - 1)

    def alpha_at(self, t):
        if self.case == 1:
            return self.A1 / (1.0 + t) ** self.sigma
        return self.alpha + 0.0 * t


def _q(p: InequalityParams) -> float:
    return (p.p - p.lam) / (1 - p.lam)


def F(B, params: InequalityParams):
    lam, p, beta = params.lam, params.p, params.beta
    q = _q(params)
    return -beta * (1 - lam) ** q * B**q - B * (1 - lam) / (p - 1) - params.A1


def F_prime(B, params: InequalityParams):
    lam, p, beta = params.lam, params.p, params.beta
    q = _q(params)
    return -beta * (1 - lam) ** q * q * B ** (q - 1) - (1 - lam) / (p - 1)


def B0(params: InequalityParams) -> float:
    lam, p, beta = params.lam, params.p, params.beta
    return (1 / (1 - lam)) * (1 / (-beta * (p - 1))) ** ((1 - lam) / (p - 1))


def solve_B1(params: InequalityParams) -> float:
    """Unique root of F on [B0, inf): bracket by doubling, then Brent and a Newton polish."""
    if params.case != 1:
        raise ValueError("B1 is defined for the decay-law case only")
    lo = B0(params)
    if params.A1 == 0:
        return lo
    hi = 2.0 * lo
    while F(hi, params) <= 0:
        hi *= 2.0
        if not math.isfinite(hi):
            raise ArithmeticError("could not bracket the root")
    B = brentq(F, lo, hi, args=(params,), xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    for _ in range(3):
        step = F(B, params) / F_prime(B, params)
        Bn = B - step
        if abs(F(Bn, params)) < abs(F(B, params)):
            B = Bn
        else:
            break
    return float(B)


def bound_case1(params: InequalityParams, t, B1: float | None = None):
    if B1 is None:
        B1 = solve_B1(params)
    lam, p = params.lam, params.p
    return (B1 * (1 - lam)) ** (1 / (1 - lam)) / (1.0 + np.asarray(t, dtype=float)) ** (1 / (p - 1))


def threshold(params: InequalityParams) -> float:
    return (params.alpha / -params.beta) ** (1 / (params.p - params.lam))


def bound_case2(params: InequalityParams, t):
    lam, p, beta, X0 = params.lam, params.p, params.beta, params.X0
    t = np.asarray(t, dtype=float)
    thr = threshold(params)
    if X0 <= thr:
        return np.full(t.shape, thr) if t.ndim else thr
    base = (params.alpha / -beta) ** ((1 - lam) / (p - lam))
    Z0 = X0 ** (1 - lam) - base
    inner = (Z0 ** ((p - 1) / (lam - 1)) - beta * (p - 1) * t) ** ((lam - 1) / (p - 1))
    return (base + inner) ** (1 / (1 - lam))


def envelope(params: InequalityParams, t, B1: float | None = None):
    if params.case == 1:
        return bound_case1(params, t, B1)
    return bound_case2(params, t)


def initial_ok(params: InequalityParams, B1: float | None = None) -> bool:
    """Whether the starting value lies under the envelope (always true in case 2)."""
    if params.case == 2:
        return True
    return params.X0 <= float(bound_case1(params, 0.0, B1)) * (1 + 1e-15)


# ---------------------------------------------------------------------------


def rk4_equality(params_list, t_end: float, h: float = 1e-3, stride: int = 100):
    """Integrate X' = alpha(t) X^lam + beta X^p for a batch of parameter sets.

    Returns (t, X) with X of shape (len(t), len(params_list)); X is clamped
    at 0 and stays there once it reaches it.
    """
    lam = np.array([p.lam for p in params_list])
    pp = np.array([p.p for p in params_list])
    beta = np.array([p.beta for p in params_list])
    case1 = np.array([p.case == 1 for p in params_list])
    A = np.array([p.A1 if p.case == 1 else p.alpha for p in params_list], dtype=float)
    sig = np.array([p.sigma if p.case == 1 else 0.0 for p in params_list], dtype=float)

    def rhs(t, X):
        a = np.where(case1, A / (1.0 + t) ** sig, A)
        Xp = np.maximum(X, 0.0)
        return a * Xp**lam + beta * Xp**pp

    steps = int(round(t_end / h))
    X = np.array([p.X0 for p in params_list], dtype=float)
    dead = X <= 0
    ts, out = [0.0], [X.copy()]
    for i in range(steps):
        t = i * h
        k1 = rhs(t, X)
        k2 = rhs(t + 0.5 * h, X + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, X + 0.5 * h * k2)
        k4 = rhs(t + h, X + h * k3)
        X = X + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(X)):
            raise FloatingPointError("RK4 blow-up")
        dead |= X <= 0
        X = np.where(dead, 0.0, X)
        if (i + 1) % stride == 0 or i + 1 == steps:
            ts.append((i + 1) * h)
            out.append(X.copy())
    return np.array(ts), np.array(out)


@dataclass(frozen=True)
class ComparisonResult:
    t: np.ndarray
    X: np.ndarray
    envelope: np.ndarray
    max_rel_excess: float      # max of (X - env)/env, <= 0 when the envelope holds
    holds: bool


def verify_comparison(params, t_end: float = 100.0, h: float = 1e-3, stride: int = 10,
                      rel_tol: float = 1e-6):
    """RK4 equality trajectory against the envelope.  Accepts one parameter set or a list."""
    single = isinstance(params, InequalityParams)
    plist = [params] if single else list(params)
    t, X = rk4_equality(plist, t_end, h, stride)
    results = []
    for j, p in enumerate(plist):
        env = np.asarray(envelope(p, t), dtype=float)
        excess = float(np.max((X[:, j] - env) / env))
        results.append(ComparisonResult(t, X[:, j], env, excess, bool(excess <= rel_tol)))
    return results[0] if single else results


# ---------------------------------------------------------------------------
# random admissible draws


def random_params(rng, case: int) -> InequalityParams:
    lam = float(rng.uniform(0.0, 0.8))
    p = float(rng.uniform(1.2, 3.5))
    beta = -float(rng.uniform(0.2, 2.0))
    if case == 1:
        A1 = float(rng.uniform(0.1, 3.0))
        sigma = (p - lam) / (p - 1) + float(rng.uniform(0.0, 1.0))
        probe = InequalityParams(lam, p, beta, 1.0, A1=A1, sigma=sigma)
        top = float(bound_case1(probe, 0.0))
        X0 = float(rng.uniform(0.05, 1.0)) * top
        return InequalityParams(lam, p, beta, X0, A1=A1, sigma=sigma)
    alpha = float(rng.uniform(0.1, 3.0))
    probe = InequalityParams(lam, p, beta, 1.0, alpha=alpha)
    X0 = float(rng.uniform(0.2, 3.0)) * threshold(probe)
    return InequalityParams(lam, p, beta, X0, alpha=alpha)


def richardson_check(params: InequalityParams, t_end: float = 10.0, h: float = 1e-3) -> float:
    """|X_h(t_end) - X_{h/2}(t_end)| for one parameter set."""
    _, Xh = rk4_equality([params], t_end, h, stride=int(round(t_end / h)))
    _, Xh2 = rk4_equality([params], t_end, h / 2, stride=int(round(t_end / (h / 2))))
    return float(abs(Xh[-1, 0] - Xh2[-1, 0]))


def monte_carlo(draws: int, seed: int, t_end: float = 100.0, h: float = 1e-3) -> dict:
    """Envelope dominance and B1 residuals over random draws in both cases."""
    rng = np.random.default_rng(seed)
    report = {"draws": draws, "seed": seed, "cases": {}}
    for case in (1, 2):
        plist = [random_params(rng, case) for _ in range(draws)]
        res = verify_comparison(plist, t_end=t_end, h=h)
        worst = max(r.max_rel_excess for r in res)
        entry = {"worst_rel_excess": worst,
                 "failures": [{"index": i, "params": vars(p), "excess": r.max_rel_excess}
                              for i, (p, r) in enumerate(zip(plist, res)) if not r.holds]}
        if case == 1:
            entry["worst_F_residual"] = max(abs(F(solve_B1(p), p)) for p in plist)
        entry["richardson_diff"] = richardson_check(plist[0], h=h)
        report["cases"][str(case)] = entry
    return report
