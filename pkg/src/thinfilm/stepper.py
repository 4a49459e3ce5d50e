"""Implicit Euler time stepping for the regularized nonlocal thin-film equation.

Each step solves

    R(u) = u + tau * div(f_eps(u) d/dx I(u)) - tau * S - u_prev = 0

by Newton's method with a dense analytic Jacobian and a backtracking line
search.  If Newton fails the step is split into two half steps, recursively,
down to ``tau_min``.

The residual of a stiff operator like this has a roundoff floor that grows
with tau * f_eps * lambda_max^{s+1}.  Convergence is therefore judged on the
residual scaled mode-wise by 1 + tau * mean(f_eps) * lambda_k^{s+1}, which is
the natural size of the linear part of the step; the raw norm is reported too.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .entropy import mobility, mobility_prime
from .forcing import ForcingSpec, evaluate
from .spectral import Field, Grid, basis, operators


class SolverAbort(RuntimeError):
    """Newton failed even at the smallest allowed step."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


@dataclass(frozen=True)
class StepperConfig:
    tau: float
    eps: float = 1e-6
    newton_tol: float = 1e-12
    newton_max_iter: int = 30
    max_halvings: int = 30          # line-search halvings per Newton iteration
    armijo: float = 1e-4
    tau_min: float | None = None    # default tau / 1024
    sampling: str = "left"          # forcing at the start ("left") or end ("right") of a step

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"time step must be positive, got {self.tau}")
        if not self.eps > 0:
            raise ValueError("the stepper needs eps > 0 (the unregularized step is undefined)")
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if self.newton_max_iter < 1 or self.max_halvings < 0:
            raise ValueError("bad Newton iteration limits")
        if self.sampling not in ("left", "right"):
            raise ValueError(f"sampling must be 'left' or 'right', got {self.sampling!r}")
        if self.tau_min is None:
            object.__setattr__(self, "tau_min", self.tau / 1024.0)
        if not 0 < self.tau_min < self.tau:
            raise ValueError("need 0 < tau_min < tau")


@dataclass(frozen=True)
class SimState:
    t: float
    u: Field
    step_index: int
    last_newton_iters: int = 0


@dataclass(frozen=True)
class Substep:
    """One implicit solve: from t0 over tau with source S (nodal), ending at u (nodal)."""

    t0: float
    tau: float
    S: np.ndarray
    u: np.ndarray
    newton_iters: int
    residual: float      # scaled residual norm at acceptance
    raw_residual: float


@dataclass(frozen=True)
class StepReport:
    substeps: tuple

    @property
    def newton_iters(self) -> int:
        return sum(sb.newton_iters for sb in self.substeps)

    @property
    def residual(self) -> float:
        return max(sb.residual for sb in self.substeps)


@dataclass(frozen=True)
class Scenario:
    grid: Grid
    u0: Field
    forcing: ForcingSpec
    T: float
    cfg: StepperConfig
    s: float
    n: float

    def __post_init__(self):
        if not 0 < self.s < 1:
            raise ValueError(f"fractional order must lie in (0, 1), got {self.s}")
        if not self.n > 0:
            raise ValueError(f"mobility exponent must be positive, got {self.n}")
        if self.T < 0:
            raise ValueError("final time must be nonnegative")
        if np.any(self.u0.nodal < 0):
            raise ValueError("initial datum must be nonnegative")

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.T / self.cfg.tau + 1e-9))


# ---------------------------------------------------------------------------


def _flux_divergence(u, Pmat, Dmat, n, eps):
    # P annihilates constants; removing the mean first avoids cancellation
    # error of order eps * mean(u) * |P|, which would pollute the low modes
    return Dmat @ (mobility(u, n, eps) * (Pmat @ (u - np.mean(u))))


def residual(u_next: Field, u_prev: Field, S: Field, cfg: StepperConfig, s: float, n: float) -> Field:
    """R(u) as a Field (nodal)."""
    ops = operators(u_next.grid, s)
    u = u_next.nodal
    R = u + cfg.tau * _flux_divergence(u, ops.dxI_matrix, ops.div_matrix, n, cfg.eps) \
        - cfg.tau * S.nodal - u_prev.nodal
    return Field.from_nodal(u_next.grid, R)


def jacobian(u, tau, ops, n, eps) -> np.ndarray:
    """dR/du = I + tau D [diag(f'(u) P u) + diag(f(u)) P]."""
    P, D = ops.dxI_matrix, ops.div_matrix
    g = P @ (u - np.mean(u))
    J = (D * (mobility_prime(u, n) * g)[None, :]) + (D * mobility(u, n, eps)[None, :]) @ P
    J *= tau
    J[np.diag_indices_from(J)] += 1.0
    return J


def _solve(u_prev, S, tau, grid, ops, fwd, lam_s1, cfg, n):
    """Newton for one implicit step; returns (u, iters, scaled_res, raw_res) or None."""
    P, D, eps = ops.dxI_matrix, ops.div_matrix, cfg.eps
    scale_vec = 1.0 + tau * float(np.mean(mobility(u_prev, n, eps))) * lam_s1
    tol = cfg.newton_tol * max(1.0, float(np.sqrt(np.dot(u_prev, u_prev) * grid.h)))

    def res(u):
        return u + tau * _flux_divergence(u, P, D, n, eps) - tau * S - u_prev

    def scaled(R):
        c = (fwd @ R) / scale_vec
        return float(np.sqrt(np.dot(c, c)))

    # the exact step conserves mean(u_prev) + tau mean(S), and mean(R) does not
    # depend on the flux; each iterate is projected back onto that constraint,
    # which an ill-conditioned dense solve would otherwise drift away from
    target = float(np.mean(u_prev) + tau * np.mean(S))

    def project(u):
        return u + (target - np.mean(u))

    u = project(u_prev + tau * S)
    R = res(u)
    r = scaled(R)
    it = 0
    # at least one Newton correction: the initial guess alone can meet the
    # tolerance while still lagging the slow small-amplitude dynamics
    while it < cfg.newton_max_iter:
        if r <= tol and it >= 1:
            return u, it, r, float(np.sqrt(np.dot(R, R) * grid.h))
        it += 1
        try:
            delta = np.linalg.solve(jacobian(u, tau, ops, n, eps), -R)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(delta)):
            return None
        alpha = 1.0
        for _ in range(cfg.max_halvings + 1):
            u_try = project(u + alpha * delta)
            R_try = res(u_try)
            r_try = scaled(R_try)
            if np.isfinite(r_try) and (r_try <= (1.0 - cfg.armijo * alpha) * r or r_try <= max(tol, r)):
                break
            alpha *= 0.5
        else:
            return None
        u, R, r = u_try, R_try, r_try
    if r <= tol:
        return u, it, r, float(np.sqrt(np.dot(R, R) * grid.h))
    return None


def _source(spec, t0, tau, grid, cfg):
    t = t0 if cfg.sampling == "left" else t0 + tau
    return np.array(evaluate(spec, t, grid).nodal)


def _advance(u, t0, tau, spec, grid, ops, fwd, lam_s1, cfg, n, out):
    S = _source(spec, t0, tau, grid, cfg)
    sol = _solve(u, S, tau, grid, ops, fwd, lam_s1, cfg, n)
    if sol is not None:
        u_new, iters, r, raw = sol
        out.append(Substep(t0, tau, S, u_new, iters, r, raw))
        return u_new
    half = 0.5 * tau
    if half < cfg.tau_min:
        raise SolverAbort(f"Newton failed at t={t0:.6g} with tau={tau:.3g} (tau_min={cfg.tau_min:.3g})")
    u_mid = _advance(u, t0, half, spec, grid, ops, fwd, lam_s1, cfg, n, out)
    return _advance(u_mid, t0 + half, half, spec, grid, ops, fwd, lam_s1, cfg, n, out)


def implicit_step(state: SimState, spec: ForcingSpec, cfg: StepperConfig, s: float, n: float):
    """Advance one step of size cfg.tau.  Returns (new_state, StepReport)."""
    grid = state.u.grid
    ops = operators(grid, s)
    fwd = basis(grid).forward
    lam_s1 = grid.eigenvalue_power(s + 1.0)
    subs = []
    try:
        u_new = _advance(np.array(state.u.nodal), state.t, cfg.tau, spec, grid, ops, fwd,
                         lam_s1, cfg, n, subs)
    except SolverAbort as exc:
        exc.state = state
        raise
    report = StepReport(tuple(subs))
    new_state = SimState(t=(state.step_index + 1) * cfg.tau, u=Field.from_nodal(grid, u_new),
                         step_index=state.step_index + 1, last_newton_iters=report.newton_iters)
    return new_state, report


def initial_state(scenario: Scenario) -> SimState:
    return SimState(t=0.0, u=scenario.u0, step_index=0)


def iterate(scenario: Scenario, start: SimState | None = None):
    """Yield (state, report) for every step after ``start`` up to the final time."""
    state = initial_state(scenario) if start is None else start
    for _ in range(state.step_index, scenario.n_steps):
        state, report = implicit_step(state, scenario.forcing, scenario.cfg, scenario.s, scenario.n)
        yield state, report


def run(scenario: Scenario) -> list:
    """All states, initial one included."""
    states = [initial_state(scenario)]
    for st, _ in iterate(scenario):
        states.append(st)
    return states


def tau_refinement(scenario: Scenario, levels: int = 3) -> list:
    """Terminal nodal states for tau, tau/2, ..."""
    out = []
    for i in range(levels):
        cfg = replace(scenario.cfg, tau=scenario.cfg.tau / 2**i, tau_min=None)
        out.append(run(replace(scenario, cfg=cfg))[-1].u)
    return out


def epsilon_continuation(scenario: Scenario, eps_values=(1e-4, 1e-5, 1e-6)) -> list:
    """Terminal states for each eps (same grid and tau)."""
    return [run(replace(scenario, cfg=replace(scenario.cfg, eps=e)))[-1].u for e in eps_values]


# ---------------------------------------------------------------------------
# checkpoints: plain JSON; float repr round-trips exactly


def state_to_dict(state: SimState) -> dict:
    g = state.u.grid
    return {"t": state.t, "step_index": state.step_index,
            "last_newton_iters": state.last_newton_iters,
            "grid": {"a": g.a, "b": g.b, "N": g.N},
            "u": [float(v) for v in state.u.nodal]}


def state_from_dict(d: dict) -> SimState:
    g = Grid(float(d["grid"]["a"]), float(d["grid"]["b"]), int(d["grid"]["N"]))
    return SimState(t=float(d["t"]), u=Field.from_nodal(g, d["u"]),
                    step_index=int(d["step_index"]),
                    last_newton_iters=int(d.get("last_newton_iters", 0)))


def save_checkpoint(path, state: SimState, extra: dict | None = None) -> None:
    payload = {"format": "thinfilm-checkpoint-1", "state": state_to_dict(state)}
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)


def load_checkpoint(path) -> tuple:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format") != "thinfilm-checkpoint-1":
        raise ValueError(f"{path} is not a checkpoint file")
    return state_from_dict(payload["state"]), payload
