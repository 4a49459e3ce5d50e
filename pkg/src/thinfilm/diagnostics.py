"""Trajectory diagnostics: conservation, dissipation inequalities, envelopes and rates.

A run produces one ``DiagnosticsRecord`` per step.  Records carry running
sums of every time integral that enters an inequality, accumulated over the
implicit sub-solves with the forcing the scheme actually applied (left
endpoint by default), so step-level inequalities telescope exactly into the
trajectory-level ones.  All theorem checks are functions of the record table
(a dict of column arrays) plus the scenario context; reading a saved CSV
back gives the same verdicts.

Verdict statuses are "pass", "fail" and "hypothesis-violated"; the last one
is used whenever a scenario does not meet the assumptions of a bound.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, fields

import numpy as np

from .entropy import (EntropyParams, G_eps_nodal, G_eps_prime_nodal, dissipation)
from .forcing import ForcingSpec, evaluate
from .ode_lemma import InequalityParams, bound_case1, solve_B1
from .spectral import Field, Grid, apply_I, basis, operators, seminorm, seminorm_sq
from .stepper import Scenario, SimState, StepReport, iterate

# ---------------------------------------------------------------------------
# context and records


@dataclass(frozen=True)
class ScenarioContext:
    grid: Grid
    s: float
    n: float
    eps: float
    A: float
    C_omega: float
    forcing: ForcingSpec
    tau: float
    mass0: float
    mean0: float
    semi0: float      # [u0]_s
    J0: float
    entropy0: float   # int G_eps(u0)

    @property
    def L(self) -> float:
        return self.grid.L

    @property
    def V0(self) -> float:
        """Lower envelope at t = 0: mean(u0) - C [u0]_s."""
        return self.mean0 - self.C_omega * self.semi0

    @property
    def entropy_params(self) -> EntropyParams:
        return EntropyParams(self.n, self.A, self.eps)

    @classmethod
    def build(cls, scenario: Scenario, C_omega: float, A: float | None = None) -> "ScenarioContext":
        u0 = scenario.u0
        mean0 = u0.mean()
        A = mean0 if A is None else A
        p = EntropyParams(scenario.n, A, scenario.cfg.eps)
        J0 = seminorm_sq(u0, scenario.s)
        return cls(grid=u0.grid, s=scenario.s, n=scenario.n, eps=scenario.cfg.eps, A=A,
                   C_omega=C_omega, forcing=scenario.forcing, tau=scenario.cfg.tau,
                   mass0=u0.integral(), mean0=mean0, semi0=math.sqrt(J0), J0=J0,
                   entropy0=float(np.sum(G_eps_nodal(u0.nodal, p)) * u0.grid.h))


@dataclass(frozen=True)
class DiagnosticsRecord:
    """State of the diagnostics after ``step`` steps.

    ``cum_*`` fields are left-endpoint sums over the sub-solves; step margins
    are >= 0 when the corresponding discrete inequality holds.
    ``envelope_ratio`` is (1+t)^{1/2} * deviation_Hs, the deviation measured
    against the t^{-1/2} decay envelope.
    """

    step: int
    t: float
    mass: float
    mass_predicted: float       # int u0 + left-endpoint sum of int S
    mass_exact: float           # int u0 + exact time integral of int S
    mass_step_error: float
    J: float
    dissipation: float
    energy_forcing: float       # -<S, I(u)> with the last applied S
    energy_step_margin: float
    cum_dissipation: float
    cum_energy_forcing: float
    entropy: float
    seminorm_s_plus_1_sq: float
    entropy_forcing: float      # int S G'_eps(u)
    entropy_step_margin: float
    cum_seminorm_s_plus_1_sq: float
    cum_entropy_forcing: float
    cum_entropy_bound: float    # sum tau ||S||_1 V^{1-n} / (n-1)
    entropy_window: int         # 1 while V(r) <= A for all r <= t
    S_mean: float
    S_seminorm: float
    cum_S_mass: float
    cum_S_seminorm: float
    J_ineq_margin: float
    min_u: float
    max_u: float
    V_t: float
    Lambda_t: float
    deviation_Hs: float
    envelope_ratio: float
    newton_iters: int
    residual: float
    substeps: int


FIELDS = tuple(f.name for f in fields(DiagnosticsRecord))
_INT_FIELDS = {"step", "entropy_window", "newton_iters", "substeps"}


def _deviation(ctx: ScenarioContext, u: Field, cum_S_mass: float) -> float:
    """||u - mean0 - (1/|Omega|) int_0^t int S||_{H^s}, with ||w||^2 = ||w||_2^2 + [w]_s^2."""
    w = u - (ctx.mean0 + cum_S_mass / ctx.L)
    sq = float(np.dot(w.coeffs, w.coeffs)) + seminorm_sq(w, ctx.s)
    return math.sqrt(max(sq, 0.0))


def initial_record(ctx: ScenarioContext, u0: Field) -> DiagnosticsRecord:
    p = ctx.entropy_params
    nan = math.nan
    dev = _deviation(ctx, u0, 0.0)
    S = evaluate(ctx.forcing, 0.0, ctx.grid)
    return DiagnosticsRecord(
        step=0, t=0.0, mass=ctx.mass0, mass_predicted=ctx.mass0, mass_exact=ctx.mass0,
        mass_step_error=0.0, J=ctx.J0, dissipation=dissipation(u0, ctx.s, ctx.n, ctx.eps),
        energy_forcing=-float(np.dot(S.coeffs, apply_I(u0, ctx.s).coeffs)),
        energy_step_margin=nan, cum_dissipation=0.0, cum_energy_forcing=0.0,
        entropy=ctx.entropy0, seminorm_s_plus_1_sq=seminorm_sq(u0, ctx.s + 1.0),
        entropy_forcing=float(np.sum(S.nodal * G_eps_prime_nodal(u0.nodal, p)) * ctx.grid.h),
        entropy_step_margin=nan, cum_seminorm_s_plus_1_sq=0.0, cum_entropy_forcing=0.0,
        cum_entropy_bound=0.0, entropy_window=int(ctx.V0 <= ctx.A),
        S_mean=S.mean(), S_seminorm=seminorm(S, ctx.s), cum_S_mass=0.0, cum_S_seminorm=0.0,
        J_ineq_margin=nan, min_u=float(u0.nodal.min()), max_u=float(u0.nodal.max()),
        V_t=ctx.V0, Lambda_t=ctx.mean0 + ctx.C_omega * ctx.semi0,
        deviation_Hs=dev, envelope_ratio=dev, newton_iters=0, residual=0.0, substeps=0)


def make_record(ctx: ScenarioContext, prev: DiagnosticsRecord, state: SimState,
                report: StepReport) -> DiagnosticsRecord:
    """Advance the diagnostics over one step, one sub-solve at a time."""
    g, s, n, eps, C = ctx.grid, ctx.s, ctx.n, ctx.eps, ctx.C_omega
    p = ctx.entropy_params
    h = g.h
    H0 = j_inequality_H0(ctx)
    J_prev, E_prev = prev.J, prev.entropy
    mass_prev = prev.mass
    cum = dict(D=prev.cum_dissipation, EF=prev.cum_energy_forcing, S1=prev.cum_seminorm_s_plus_1_sq,
               GF=prev.cum_entropy_forcing, GB=prev.cum_entropy_bound, M=prev.cum_S_mass,
               SS=prev.cum_S_seminorm)
    window = prev.entropy_window
    e_margin = 0.0
    g_margin = 0.0
    j_margin = math.inf
    mass_err = 0.0
    for sb in report.substeps:
        S = Field.from_nodal(g, sb.S)
        u = Field.from_nodal(g, sb.u)
        tau = sb.tau
        V_left = ctx.V0 + cum["M"] / ctx.L - C * cum["SS"]
        S_mass = float(np.sum(sb.S)) * h
        S_semi = seminorm(S, s)
        J = seminorm_sq(u, s)
        D = dissipation(u, s, n, eps)
        EF = -float(np.dot(S.coeffs, apply_I(u, s).coeffs))
        E = float(np.sum(G_eps_nodal(sb.u, p))) * h
        S1 = seminorm_sq(u, s + 1.0)
        GF = float(np.sum(sb.S * G_eps_prime_nodal(sb.u, p))) * h
        e_margin += J_prev + 2 * tau * EF - J - 2 * tau * D
        g_margin += E_prev + tau * GF - E - tau * S1
        if H0 is not None:
            jm = 2 * S_semi * math.sqrt(J) - (J - J_prev) / tau - J * J / (2 * ctx.L**2 * H0)
            j_margin = min(j_margin, jm)
        mass = u.integral()
        mass_err = max(mass_err, abs(mass - mass_prev - tau * S_mass))
        if V_left > 0:
            cum["GB"] += tau * float(np.sum(np.abs(sb.S))) * h * V_left ** (1 - n) / (n - 1)
        else:
            cum["GB"] = math.inf
        cum["D"] += tau * D
        cum["EF"] += tau * EF
        cum["S1"] += tau * S1
        cum["GF"] += tau * GF
        cum["M"] += tau * S_mass
        cum["SS"] += tau * S_semi
        J_prev, E_prev, mass_prev = J, E, mass
        V_right = ctx.V0 + cum["M"] / ctx.L - C * cum["SS"]
        if V_right > ctx.A:
            window = 0
    u = state.u
    V_t = ctx.V0 + cum["M"] / ctx.L - C * cum["SS"]
    Lam = ctx.mean0 + C * ctx.semi0 + cum["M"] / ctx.L + C * cum["SS"]
    dev = _deviation(ctx, u, cum["M"])
    return DiagnosticsRecord(
        step=state.step_index, t=state.t, mass=u.integral(),
        mass_predicted=ctx.mass0 + cum["M"],
        mass_exact=ctx.mass0 + ctx.forcing.mass_integral(g, 0.0, state.t),
        mass_step_error=mass_err, J=J_prev, dissipation=D, energy_forcing=EF,
        energy_step_margin=e_margin, cum_dissipation=cum["D"], cum_energy_forcing=cum["EF"],
        entropy=E_prev, seminorm_s_plus_1_sq=S1, entropy_forcing=GF, entropy_step_margin=g_margin,
        cum_seminorm_s_plus_1_sq=cum["S1"], cum_entropy_forcing=cum["GF"],
        cum_entropy_bound=cum["GB"], entropy_window=window, S_mean=S_mass / ctx.L,
        S_seminorm=S_semi, cum_S_mass=cum["M"], cum_S_seminorm=cum["SS"],
        J_ineq_margin=j_margin if H0 is not None else math.nan,
        min_u=float(u.nodal.min()), max_u=float(u.nodal.max()), V_t=V_t, Lambda_t=Lam,
        deviation_Hs=dev, envelope_ratio=math.sqrt(1.0 + state.t) * dev,
        newton_iters=report.newton_iters, residual=report.residual, substeps=len(report.substeps))


def j_inequality_H0(ctx: ScenarioContext) -> float | None:
    """(mean u0 - C [u0]_s)^{2-n} |Omega|, or None when it is undefined (V0 <= 0 or n < 2)."""
    if ctx.n < 2 or ctx.V0 <= 0:
        return None
    return ctx.V0 ** (2 - ctx.n) * ctx.L


# ---------------------------------------------------------------------------
# running


@dataclass
class Trajectory:
    """Records plus (optionally) the nodal history needed by the weak-form residual.

    ``times`` are all sub-solve end points (with 0), ``U[i]`` the state at
    ``times[i]``, ``S[i]`` the source applied on (times[i], times[i+1]).
    """

    ctx: ScenarioContext
    records: list
    times: list = field(default_factory=list)
    U: list = field(default_factory=list)
    S: list = field(default_factory=list)
    final_state: SimState | None = None
    complete_history: bool = True

    def table(self) -> dict:
        return records_to_table(self.records)


def run_trajectory(scenario: Scenario, ctx: ScenarioContext, keep_history: bool = False,
                   start: tuple | None = None, on_step=None) -> Trajectory:
    """Run a scenario and record diagnostics at every step.

    ``start`` = (state, record) resumes from a checkpoint.  ``on_step(state,
    record)`` is called after every step (checkpointing hook).
    """
    if start is None:
        state = SimState(0.0, scenario.u0, 0)
        rec = initial_record(ctx, scenario.u0)
    else:
        state, rec = start
    traj = Trajectory(ctx, [rec], final_state=state, complete_history=start is None)
    if keep_history:
        traj.times.append(state.t)
        traj.U.append(np.array(state.u.nodal))
    for state, report in iterate(scenario, state):
        rec = make_record(ctx, rec, state, report)
        traj.records.append(rec)
        traj.final_state = state
        if keep_history:
            for sb in report.substeps:
                traj.times.append(sb.t0 + sb.tau)
                traj.U.append(sb.u)
                traj.S.append(sb.S)
        if on_step is not None:
            on_step(state, rec)
    if keep_history and traj.times:
        traj.times[-1] = traj.final_state.t
    return traj


def records_to_table(records) -> dict:
    return {name: np.array([getattr(r, name) for r in records],
                           dtype=int if name in _INT_FIELDS else float) for name in FIELDS}


def record_from_row(row: dict) -> DiagnosticsRecord:
    return DiagnosticsRecord(**{k: (int(row[k]) if k in _INT_FIELDS else float(row[k])) for k in FIELDS})


def write_csv(path, records, stride: int = 1) -> None:
    """Header row plus one row per kept step; floats written with repr (round-trip exact)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIELDS)
        last = len(records) - 1
        for i, r in enumerate(records):
            if i % stride == 0 or i == last:
                w.writerow([repr(getattr(r, k)) for k in FIELDS])


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        return [record_from_row(row) for row in csv.DictReader(fh)]


# ---------------------------------------------------------------------------
# checks and verdicts

PASS, FAIL, HYP = "pass", "fail", "hypothesis-violated"


@dataclass
class Check:
    name: str
    margin: float
    status: str
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_dict(self) -> dict:
        return {"name": self.name, "margin": _json_float(self.margin), "status": self.status,
                "pass": self.passed, "detail": {k: _json_float(v) for k, v in self.detail.items()}}


def _json_float(v):
    if isinstance(v, (bool, int, str)) or v is None:
        return v
    if isinstance(v, (list, tuple)):
        return [_json_float(x) for x in v]
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _status(ok: bool) -> str:
    return PASS if ok else FAIL


@dataclass
class TheoremVerdict:
    theorem_id: str
    checks: list
    fitted_rate: float | None = None
    C_omega: float | None = None

    @property
    def status(self) -> str:
        st = [c.status for c in self.checks]
        if FAIL in st:
            return FAIL
        if st and all(x == HYP for x in st):
            return HYP
        return PASS

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"theorem_id": self.theorem_id, "status": self.status,
                "C_omega": _json_float(self.C_omega), "fitted_rate": _json_float(self.fitted_rate),
                "checks": [c.to_dict() for c in self.checks]}


def check_mass(tab: dict, step_tol: float = 1e-10, rel_tol: float = 1e-9) -> Check:
    """Mass against the left-endpoint prediction: per-step and cumulative errors."""
    err = np.abs(tab["mass"] - tab["mass_predicted"])
    bound = rel_tol * (1.0 + np.abs(tab["mass"]))
    worst_step = float(np.max(tab["mass_step_error"]))
    margin = float(np.min(bound - err))
    ok = margin >= 0 and worst_step <= step_tol
    return Check("mass", margin, _status(ok),
                 {"max_cumulative_error": float(err.max()), "max_step_error": worst_step,
                  "max_error_vs_exact_time_integral": float(np.max(np.abs(tab["mass"] - tab["mass_exact"])))})


def check_energy_inequality(tab: dict, slack: float = 1e-6) -> Check:
    """Per-step and cumulative energy inequality; margins scaled by max(1, J_k)."""
    J = tab["J"]
    step = tab["energy_step_margin"][1:] / np.maximum(1.0, J[:-1])
    cum = J[0] + 2 * tab["cum_energy_forcing"] - J - 2 * tab["cum_dissipation"]
    cum_scaled = cum[1:] / max(1.0, float(J[0]))
    m = float(min(step.min(), cum_scaled.min())) if step.size else 0.0
    return Check("energy_inequality", m, _status(m >= -slack),
                 {"worst_step_margin": float(step.min()) if step.size else 0.0,
                  "final_cumulative_margin": float(cum[-1])})


def check_energy_monotone(tab: dict) -> Check:
    """Unforced runs: J nonincreasing step to step."""
    dJ = np.diff(tab["J"])
    m = float(-dJ.max()) if dJ.size else 0.0
    return Check("energy_nonincreasing", m, _status(m >= 0), {"max_increase": -m})


def check_entropy_inequality(tab: dict, ctx: ScenarioContext, slack: float = 1e-6) -> list:
    """Trajectory form with int int S G'_eps(u) (per step and cumulative), and the
    V-form with (1/(n-1)) int ||S||_1 V^{1-n}.

    The V-form follows from |G'_eps(u)| <= V^{1-n}/(n-1), which needs
    V(t) <= min(u, A); it is therefore checked only on the initial stretch
    where V(r) <= A, and reported as hypothesis-violated if V is not positive.
    """
    E = tab["entropy"]
    scale = np.maximum(1.0, np.abs(E[:-1]))
    step = tab["entropy_step_margin"][1:] / scale
    lhs = E + tab["cum_seminorm_s_plus_1_sq"]
    cum = E[0] + tab["cum_entropy_forcing"] - lhs
    m = float(min(step.min(), (cum[1:] / max(1.0, abs(E[0]))).min())) if step.size else 0.0
    out = [Check("entropy_inequality", m, _status(m >= -slack),
                 {"worst_step_margin": float(step.min()) if step.size else 0.0,
                  "final_cumulative_margin": float(cum[-1])})]
    if ctx.V0 <= 0 or not np.all(tab["V_t"] > 0):
        out.append(Check("entropy_V_bound", math.nan, HYP, {"reason_V_min": float(tab["V_t"].min())}))
        return out
    win = tab["entropy_window"] == 1
    win[0] = False
    vmargin = E[0] + tab["cum_entropy_bound"] - lhs
    t_end = float(tab["t"][win][-1]) if win.any() else 0.0
    mw = float(vmargin[win].min() / max(1.0, abs(E[0]))) if win.any() else math.nan
    detail = {"window_end": t_end, "margin_over_full_run": float(vmargin[1:].min()) if vmargin.size > 1 else 0.0}
    if not win.any():
        out.append(Check("entropy_V_bound", math.nan, HYP, detail))
    else:
        out.append(Check("entropy_V_bound", mw, _status(mw >= -slack), detail))
    return out


def compute_envelopes(tab: dict, ctx: ScenarioContext) -> dict:
    """V, Lambda (recorded), W (time-independent S) and v, T0 (constant S)."""
    t = tab["t"]
    out = {"t": t, "V": tab["V_t"], "Lambda": tab["Lambda_t"], "W": None, "v": None, "T0": None}
    spec = ctx.forcing
    if spec.time_independent:
        prof = spec.profile(ctx.grid)
        kappa = prof.mean() - ctx.C_omega * seminorm(prof, ctx.s)
        out["W"] = ctx.V0 + t * kappa
        out["kappa"] = kappa
    if spec.kind == "constant":
        S0 = spec.S0
        out["v"] = ctx.mean0 + t * S0 - ctx.C_omega * ctx.semi0
        gap = max(ctx.C_omega * ctx.semi0 - ctx.mean0, 0.0)
        if gap == 0:
            out["T0"] = 0.0
        elif S0 > 0:
            out["T0"] = gap / S0
        else:
            out["T0"] = math.inf
    return out


def check_sandwich(tab: dict, ctx: ScenarioContext, tol: float = 1e-12) -> list:
    scale = np.maximum(1.0, np.abs(tab["max_u"]))
    lower = (tab["min_u"] - tab["V_t"]) / scale
    upper = (tab["Lambda_t"] - tab["max_u"]) / scale
    m = float(min(lower.min(), upper.min()))
    hyp = ctx.V0 > 0 and admissible_along(tab, ctx)
    out = [Check("sandwich", m, _status(m >= -tol) if hyp else HYP,
                 {"lower_margin": float(lower.min()), "upper_margin": float(upper.min())})]
    vmin = float(tab["V_t"].min())
    out.append(Check("positivity", vmin, _status(vmin > 0) if hyp else HYP, {}))
    return out


def admissible_along(tab: dict, ctx: ScenarioContext, tol: float = 1e-14) -> bool:
    """Admissibility of the applied forcing at every step: [S]_s <= mean(S)/C."""
    rate = tab["S_mean"] / ctx.C_omega - tab["S_seminorm"]
    return bool(np.all(rate >= -tol * np.maximum(1.0, np.abs(tab["S_mean"]))))


def check_J_inequality(tab: dict, ctx: ScenarioContext, slack: float = 1e-6,
                       fraction: float = 0.99) -> Check:
    """dJ/dt + J^2/(2|Omega|^2 H0) <= 2 [S]_s J^{1/2}, per step."""
    H0 = j_inequality_H0(ctx)
    if H0 is None:
        return Check("J_inequality", math.nan, HYP, {"reason": "needs n >= 2 and V0 > 0"})
    m = tab["J_ineq_margin"][1:]
    if m.size == 0:
        return Check("J_inequality", 0.0, PASS, {"H0": H0})
    scale = np.maximum(1.0, tab["J"][:-1] / ctx.tau)
    ok = (m / scale) >= -slack
    frac = float(ok.mean())
    status = _status(frac >= fraction) if ctx.V0 > 0 and admissible_along(tab, ctx) else HYP
    return Check("J_inequality", float((m / scale).min()), status,
                 {"H0": H0, "fraction_ok": frac})


def decay_lemma_params(ctx: ScenarioContext, J0: float) -> InequalityParams | None:
    """Comparison-lemma parameters for X = J: lam = 1/2, p = 2, beta = -1/(2|Omega|^2 H0)."""
    H0 = j_inequality_H0(ctx)
    spec = ctx.forcing
    if H0 is None or not spec.has_decay_law or spec.sigma < 1.5:
        return None
    return InequalityParams(lam=0.5, p=2.0, beta=-1.0 / (2 * ctx.L**2 * H0), X0=J0,
                            A1=spec.A1, sigma=spec.sigma)


def fit_power_law(t, y, t_min: float):
    """OLS slope of log y against log(1+t) over t >= t_min (positive y only)."""
    m = (t >= t_min) & (y > 0)
    if m.sum() < 3:
        return math.nan
    x = np.log1p(t[m])
    return float(np.polyfit(x, np.log(y[m]), 1)[0])


def check_decay_T11(tab: dict, ctx: ScenarioContext, tol: float = 0.05) -> tuple:
    """Decay of the deviation over the final decade of t, and the J envelope.

    Returns (checks, fitted exponent).
    """
    t = tab["t"]
    T = float(t[-1])
    spec = ctx.forcing
    hyp = ctx.n >= 2 and spec.has_decay_law and spec.sigma >= 1.5 and spec.A1 > 0
    dev = tab["deviation_Hs"]
    checks = []
    if np.all(dev <= 1e-14 * max(1.0, ctx.mean0)):
        checks.append(Check("decay_exponent", math.inf, PASS if hyp else HYP, {"reason": "deviation vanishes"}))
        return checks, math.nan
    rate = fit_power_law(t, dev, T / 10.0)
    checks.append(Check("decay_exponent", -0.4 - rate, (_status(rate <= -0.4) if hyp else HYP),
                        {"fitted_exponent": rate, "window_start": T / 10.0}))
    win = t >= T / 10.0
    q = tab["envelope_ratio"][win]
    run_min = np.minimum.accumulate(q)
    excess = float(np.max(q / run_min - 1.0)) if q.size else 0.0
    checks.append(Check("envelope_ratio_nonincreasing", tol - excess,
                        (_status(excess <= tol) if hyp else HYP), {"max_relative_rise": excess}))
    p = decay_lemma_params(ctx, float(tab["J"][0]))
    if p is not None:
        B1 = solve_B1(p)
        env = bound_case1(p, t, B1)
        start_ok = tab["J"][0] <= env[0]
        m = float(np.min((env - tab["J"]) / env))
        checks.append(Check("J_envelope", m, (_status(m >= -1e-9) if start_ok and hyp else HYP),
                            {"B1": B1, "J0_over_envelope0": float(tab["J"][0] / env[0])}))
    return checks, rate


def entropy_rhs_limit(ctx: ScenarioContext) -> dict | None:
    """For n > 2 and time-independent S, the W-form right-hand side and its limit.

    int_0^t W^{1-n} = (W0^{2-n} - W(t)^{2-n}) / ((n-2) kappa), bounded as t -> inf.
    """
    spec = ctx.forcing
    if not spec.time_independent or ctx.n <= 2:
        return None
    prof = spec.profile(ctx.grid)
    kappa = prof.mean() - ctx.C_omega * seminorm(prof, ctx.s)
    W0 = ctx.V0
    if W0 <= 0 or kappa <= 0:
        return None
    norm1 = float(np.sum(np.abs(prof.nodal)) * ctx.grid.h)
    n = ctx.n

    def rhs(t):
        integral = (W0 ** (2 - n) - (W0 + kappa * t) ** (2 - n)) / ((n - 2) * kappa)
        return ctx.entropy0 + norm1 / (n - 1) * integral

    limit = ctx.entropy0 + norm1 * W0 ** (2 - n) / ((n - 1) * (n - 2) * kappa)
    return {"rhs": rhs, "limit": limit, "kappa": kappa, "W0": W0}


def check_bound_T12(tab: dict, ctx: ScenarioContext, T_half: float | None = None) -> list:
    """Empirical K (running max of the deviation), its saturation between T/2 and T,
    and the terminal energy against (4|Omega|^2 H0 [S]_s)^{2/3}."""
    t = tab["t"]
    T = float(t[-1])
    T_half = T / 2.0 if T_half is None else T_half
    spec = ctx.forcing
    hyp = ctx.n >= 2 and spec.time_independent and ctx.V0 > 0
    dev = tab["deviation_Hs"]
    K_full = float(dev.max())
    K_half = float(dev[t <= T_half + 1e-9].max())
    change = abs(K_full - K_half) / K_full if K_full > 0 else 0.0
    checks = [Check("K_finite", -change if np.isfinite(K_full) else -math.inf,
                    _status(bool(np.isfinite(K_full))) if hyp else HYP,
                    {"K": K_full, "K_half_horizon": K_half}),
              Check("K_saturation", 0.05 - change, _status(change < 0.05) if hyp else HYP,
                    {"relative_change": change})]
    H0 = j_inequality_H0(ctx)
    if H0 is not None:
        level = (4 * ctx.L**2 * H0 * seminorm(spec.profile(ctx.grid), ctx.s)) ** (2.0 / 3.0)
        J_end = float(tab["J"][-1])
        checks.append(Check("terminal_energy_level", 3 * level - J_end,
                            _status(J_end <= 3 * level) if hyp else HYP,
                            {"level": level, "J_terminal": J_end}))
    lim = entropy_rhs_limit(ctx)
    if lim is not None:
        a, b = lim["rhs"](T_half), lim["rhs"](T)
        rel = abs(b - a) / abs(b)
        checks.append(Check("entropy_rhs_convergence", 0.01 - rel, _status(rel < 0.01),
                            {"rhs_half": a, "rhs_full": b, "limit": lim["limit"], "relative_change": rel}))
    return checks


def integral_v_power(ctx: ScenarioContext, t, T0: float):
    """int_{T0}^t v_+(r)^n dr in closed form for v(r) = mean0 + r S0 - C [u0]_s."""
    S0 = ctx.forcing.S0
    n = ctx.n
    t = np.asarray(t, dtype=float)
    v = lambda r: np.maximum(ctx.mean0 + r * S0 - ctx.C_omega * ctx.semi0, 0.0)
    if S0 == 0:
        return v(t) ** n * np.maximum(t - T0, 0.0)
    return np.where(t > T0, (v(t) ** (n + 1) - v(T0) ** (n + 1)) / ((n + 1) * S0), 0.0)


def check_exponential_T13(tab: dict, ctx: ScenarioContext, transient: float = 0.1,
                          floor: float = 1e-22, r2_min: float = 0.95) -> tuple:
    """Fit log deviation^2 = a + b int_{T0}^t v_+^n after T0 plus a transient.

    The transient is the first ``transient`` fraction of the usable window.
    The window ends at the first sample where the deviation has reached the
    round-off floor: deviation^2 below ``floor`` times its initial value, or
    deviation below 1e4 machine epsilons times max |u| (the mean of u carries
    accumulated rounding of that size).  Pass: b < 0 and R^2 >= r2_min.
    Returns (checks, fitted rate -b).
    """
    spec = ctx.forcing
    if spec.kind != "constant" or spec.S0 < 0:
        return [Check("exponential_rate", math.nan, HYP, {"reason": "needs constant S0 >= 0"})], math.nan
    env = compute_envelopes(tab, ctx)
    T0 = env["T0"]
    t = tab["t"]
    d2 = tab["deviation_Hs"] ** 2
    if d2[0] <= 1e-28 * max(1.0, ctx.mean0**2):
        return [Check("exponential_rate", math.inf, PASS, {"reason": "deviation vanishes"})], math.nan
    if not np.isfinite(T0):
        return [Check("exponential_rate", math.nan, HYP, {"reason": "v never becomes positive"})], math.nan
    noise = 1e4 * np.finfo(float).eps * np.maximum(1.0, np.abs(tab["max_u"]))
    at_floor = (d2 <= floor * d2[0]) | (np.sqrt(d2) <= noise)
    t_floor = float(t[at_floor][0]) if np.any(at_floor) else math.inf
    usable = (t >= T0) & (t < t_floor)
    if usable.sum() < 5:
        return [Check("exponential_rate", math.nan, FAIL, {"reason": "too few usable samples"})], math.nan
    t_lo, t_hi = float(t[usable][0]), float(t[usable][-1])
    m = usable & (t >= t_lo + transient * (t_hi - t_lo))
    x = integral_v_power(ctx, t[m], T0)
    y = np.log(d2[m])
    b, a = np.polyfit(x, y, 1)
    resid = y - (a + b * x)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    ok = b < 0 and r2 >= r2_min
    vmono = env["v"] is None or bool(np.all(np.diff(env["v"]) >= 0))
    checks = [Check("exponential_rate", min(-b, r2 - r2_min), _status(ok),
                    {"slope": float(b), "r2": r2, "T0": T0, "fit_start": float(t[m][0]),
                     "fit_end": float(t[m][-1])}),
              Check("v_nondecreasing", 0.0, _status(vmono), {})]
    return checks, float(-b)


# ---------------------------------------------------------------------------
# weak form


def _chi(t, T):
    return (1.0 - t / T) ** 3


def _chi_prime(t, T):
    return -3.0 * (1.0 - t / T) ** 2 / T


def weak_form_residual(traj: Trajectory, psi: Field, eps_in_mobility: bool = False) -> float:
    """Residual of the weak formulation for phi(t, x) = chi(t) psi(x), chi = (1 - t/T)^3.

    Residual = int int u phi_t - int int n u_+^{n-1} u_x I(u) phi_x - int int u_+^n I(u) phi_xx
               + int u0 phi(0) + int int S phi.

    u is piecewise linear in time between states (integrated exactly with
    two-point Gauss), S piecewise constant as applied by the scheme, and the
    nonlinear terms use the trapezoid rule in time.  Space: midpoint rule
    with spectral derivatives.
    """
    if not traj.complete_history or len(traj.U) < 2:
        raise ValueError("weak-form residual needs the full nodal history from t = 0")
    ctx = traj.ctx
    g, s, n = ctx.grid, ctx.s, ctx.n
    h = g.h
    T = float(traj.times[-1])
    ops = operators(g, s)
    B = basis(g)
    psi_n = np.array(psi.nodal)
    psi_x = B.dx_matrix @ psi_n
    psi_xx = _second_derivative(psi)

    def flux_terms(u):
        up = np.maximum(u, 0.0)
        Iu = ops.I_matrix @ u
        ux = B.dx_matrix @ u
        with np.errstate(divide="ignore", invalid="ignore"):
            prime = np.where(up > 0, n * up ** (n - 1), 0.0)
        return float(np.sum(prime * ux * Iu * psi_x + up**n * Iu * psi_xx) * h)

    gx, gw = np.polynomial.legendre.leggauss(2)
    times = np.asarray(traj.times, dtype=float)
    pair_u = [float(np.dot(u, psi_n) * h) for u in traj.U]
    F = [flux_terms(u) for u in traj.U]
    total = pair_u[0] * _chi(0.0, T)
    for i in range(len(times) - 1):
        t0, t1 = times[i], times[i + 1]
        dt = t1 - t0
        tq = 0.5 * (t0 + t1) + 0.5 * dt * gx
        wq = 0.5 * dt * gw
        lin = (tq - t0) / dt
        # u phi_t, u linear in time
        total += float(np.sum(wq * ((1 - lin) * pair_u[i] + lin * pair_u[i + 1]) * _chi_prime(tq, T)))
        # S phi, S constant on the interval
        pS = float(np.dot(traj.S[i], psi_n) * h)
        total += pS * float(np.sum(wq * _chi(tq, T)))
        # nonlinear terms, trapezoid
        total -= 0.5 * dt * (F[i] * _chi(t0, T) + F[i + 1] * _chi(t1, T))
    return float(total)


def _second_derivative(psi: Field) -> np.ndarray:
    """Nodal values of psi'' for a cosine series: coefficients -lambda_k c_k."""
    g = psi.grid
    return np.array(Field.from_coeffs(g, -g.eigenvalues * psi.coeffs).nodal)


# ---------------------------------------------------------------------------
# theorem bundles


def verdict_T11(tab: dict, ctx: ScenarioContext) -> TheoremVerdict:
    checks = [check_mass(tab), check_energy_inequality(tab)]
    checks += check_entropy_inequality(tab, ctx)
    checks += check_sandwich(tab, ctx)
    rate = None
    if ctx.forcing.has_decay_law and ctx.n >= 2:
        checks.append(check_J_inequality(tab, ctx))
        dchecks, rate = check_decay_T11(tab, ctx)
        checks += dchecks
    return TheoremVerdict("T1.1", checks, fitted_rate=rate, C_omega=ctx.C_omega)


def verdict_T12(tab: dict, ctx: ScenarioContext, T_half: float | None = None) -> TheoremVerdict:
    checks = [check_mass(tab), check_energy_inequality(tab)]
    checks += check_entropy_inequality(tab, ctx)
    checks += check_sandwich(tab, ctx)
    if ctx.forcing.time_independent:
        checks += check_bound_T12(tab, ctx, T_half)
    else:
        checks.append(Check("K_finite", math.nan, HYP, {"reason": "forcing depends on time"}))
    return TheoremVerdict("T1.2", checks, C_omega=ctx.C_omega)


def verdict_T13(tab: dict, ctx: ScenarioContext) -> TheoremVerdict:
    checks = [check_mass(tab), check_energy_inequality(tab)]
    checks += check_sandwich(tab, ctx)
    if ctx.forcing.kind == "constant" and ctx.forcing.S0 == 0:
        checks.append(check_energy_monotone(tab))
    echecks, rate = check_exponential_T13(tab, ctx)
    checks += echecks
    return TheoremVerdict("T1.3", checks, fitted_rate=rate, C_omega=ctx.C_omega)


VERDICTS = {"T1.1": verdict_T11, "T1.2": verdict_T12, "T1.3": verdict_T13}


def evaluate_theorems(tab: dict, ctx: ScenarioContext, theorems) -> list:
    return [VERDICTS[name](tab, ctx) for name in theorems]
