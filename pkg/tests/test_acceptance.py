"""Acceptance suite: the fifteen desk-scale criteria at their stated tolerances.

Long runs are shared through module-scoped fixtures.  Every criterion is one
test; sub-checks are collected first so a failure message lists every
violated part with the measured values.
"""
import hashlib
import math
from dataclasses import replace

import numpy as np
import pytest

from thinfilm import cli
from thinfilm import diagnostics as dg
from thinfilm.config import load_config
from thinfilm.inequalities import weighted_interpolation_monte_carlo
from thinfilm.ode_lemma import InequalityParams, monte_carlo, solve_B1
from thinfilm.spectral import (Field, Grid, apply_I, basis, fractional_laplacian, inverse_transform,
                               kernel_apply, operators, seminorm_sq)
from thinfilm.stepper import epsilon_continuation, tau_refinement

pytestmark = pytest.mark.slow

CONFIGS = cli.CONFIG_DIR


def criterion(number, title):
    return pytest.mark.criterion(number, title)


def expect(failures, ok, message):
    if not ok:
        failures.append(message)


def settle(failures):
    assert not failures, "; ".join(failures)


class Run:
    """A bundled scenario simulated in process, with its table and verdicts."""

    def __init__(self, name, keep_history=False, **overrides):
        cfg = load_config(CONFIGS / f"{name}.cfg")
        if overrides:
            cfg = replace(cfg, **overrides)
        self.cfg = cfg
        C, _ = cli.embedding_constant(cfg)
        self.scenario = cfg.scenario()
        self.ctx = dg.ScenarioContext.build(self.scenario, C, cfg.A)
        self.traj = dg.run_trajectory(self.scenario, self.ctx, keep_history=keep_history)
        self.tab = self.traj.table()
        self.verdicts = {v.theorem_id: v for v in
                         dg.evaluate_theorems(self.tab, self.ctx, cfg.theorems)}


@pytest.fixture(scope="module")
def runs():
    names = ["theorem1_1", "theorem1_2", "theorem1_3", "theorem1_3_unforced", "constant_forcing"]
    return {name: Run(name) for name in names}


def random_field(grid, rng, decay=2.0):
    k = np.arange(grid.N)
    return Field.from_coeffs(grid, rng.standard_normal(grid.N) * (1.0 + k) ** (-decay))


# ---------------------------------------------------------------------------


@criterion(1, "spectral exactness and transform round trip")
def test_c01_spectral_exactness():
    failures = []
    for grid in (Grid(0.0, 1.0, 128), Grid(0.0, math.pi, 128)):
        for s in (0.25, 0.5, 0.75):
            for k in range(1, grid.N // 2 + 1):
                phi = grid.eigenfunction(k)
                want = -grid.eigenvalue_power(s)[k] * phi.nodal
                err = np.linalg.norm(apply_I(phi, s).nodal - want) / np.linalg.norm(want)
                expect(failures, err <= 1e-12, f"L={grid.L:.4g} s={s} k={k}: rel err {err:.2e}")
        u = np.random.default_rng(0).standard_normal(grid.N)
        back = inverse_transform(grid, Field.from_nodal(grid, u).coeffs)
        err = np.linalg.norm(back - u) / np.linalg.norm(u)
        expect(failures, err <= 1e-12, f"round trip rel err {err:.2e}")
    settle(failures)


@criterion(2, "operator identities on 100 random fields")
def test_c02_operator_identities():
    g = Grid(0.0, math.pi, 128)
    h = g.h
    rng = np.random.default_rng(2)
    B = basis(g)
    worst = 0.0
    for _ in range(100):
        s = float(rng.uniform(0.05, 0.95))
        u = random_field(g, rng)
        ops = operators(g, s)
        Iu = apply_I(u, s).nodal
        dIu = ops.dxI_matrix @ u.nodal
        du = B.dx_matrix @ u.nodal
        pairs = [(-np.sum(Iu * u.nodal) * h, seminorm_sq(u, s)),
                 (np.sum(Iu * Iu) * h, seminorm_sq(u, 2 * s)),
                 (-np.sum(dIu * du) * h, seminorm_sq(u, s + 1)),
                 (np.sum(dIu * dIu) * h, seminorm_sq(u, 2 * s + 1))]
        # commutation of fractional powers, tested against a second field
        s1, s2 = float(rng.uniform(0, 1)), float(rng.uniform(0, 1))
        v = random_field(g, rng)
        pairs.append((np.sum(fractional_laplacian(u, s1).nodal * fractional_laplacian(v, s2).nodal) * h,
                      np.sum(fractional_laplacian(u, s1 + s2).nodal * v.nodal) * h))
        for lhs, rhs in pairs:
            worst = max(worst, abs(float(lhs) - float(rhs)) / max(1.0, abs(float(rhs))))
    assert worst <= 1e-8, f"worst residual {worst:.2e}"


@criterion(3, "kernel form matches the spectral operator")
def test_c03_kernel_consistency():
    failures = []

    def error(N, s, k):
        g = Grid(0.0, 1.0, N)
        f = g.eigenfunction(k)
        want = apply_I(f, s).nodal
        return np.linalg.norm(kernel_apply(f, s).nodal - want) / np.linalg.norm(want)

    for s in (0.3, 0.5, 0.7):
        for k in (2, 3):
            errs = [error(N, s, k) for N in (32, 64, 128)]
            expect(failures, errs[1] < 0.05, f"s={s} k={k} N=64: {errs[1]:.2e}")
            expect(failures, errs[0] > errs[1] > errs[2], f"s={s} k={k}: not decreasing {errs}")
    settle(failures)


@criterion(4, "discrete mass identity over 2e4 steps, three forcing regimes")
def test_c04_mass(runs):
    failures = []
    for name, kind in (("theorem1_1", "spacetime"), ("theorem1_2", "spatial"), ("constant_forcing", "constant")):
        r = runs[name]
        tab = r.tab
        expect(failures, r.cfg.forcing().kind == kind, f"{name} is not {kind}")
        expect(failures, tab["step"][-1] >= 20000, f"{name}: only {tab['step'][-1]} steps")
        step = float(tab["mass_step_error"].max())
        cum = float(np.max(np.abs(tab["mass"] - tab["mass_predicted"])))
        expect(failures, step <= 1e-10, f"{name}: per-step {step:.2e}")
        expect(failures, cum <= 1e-7, f"{name}: cumulative {cum:.2e}")
    settle(failures)


@criterion(5, "energy inequality; J nonincreasing without forcing")
def test_c05_energy(runs):
    failures = []
    for name, r in runs.items():
        c = dg.check_energy_inequality(r.tab, slack=1e-6)
        expect(failures, c.passed, f"{name}: margin {c.margin:.2e}")
    dJ = np.diff(runs["theorem1_3_unforced"].tab["J"])
    expect(failures, np.all(dJ <= 0), f"unforced J increases by up to {dJ.max():.2e}")
    settle(failures)


@criterion(6, "entropy inequality; n=3 bound converges under horizon doubling")
def test_c06_entropy(runs):
    failures = []
    for name, r in runs.items():
        c = dg.check_entropy_inequality(r.tab, r.ctx)[0]
        expect(failures, c.passed, f"{name}: margin {c.margin:.2e}")
    conv = runs["theorem1_2"].verdicts["T1.2"].check("entropy_rhs_convergence")
    expect(failures, conv.passed, f"relative change {conv.detail['relative_change']:.3e}")
    settle(failures)


@criterion(7, "positivity sandwich V <= min u <= max u <= Lambda, V > 0")
def test_c07_sandwich(runs):
    failures = []
    for name, r in runs.items():
        for c in dg.check_sandwich(r.tab, r.ctx):
            expect(failures, c.passed, f"{name} {c.name}: {c.status}, margin {c.margin:.2e}")
    settle(failures)


@criterion(8, "algebraic decay: exponent in [-0.6, -0.4] and sqrt(1+t) deviation nonincreasing")
def test_c08_algebraic_decay(runs):
    r = runs["theorem1_1"]
    failures = []
    t, dev = r.tab["t"], r.tab["deviation_Hs"]
    T = float(t[-1])
    rate = dg.fit_power_law(t, dev, T / 10.0)
    expect(failures, -0.6 <= rate <= -0.4, f"fitted exponent {rate:.4f} outside [-0.6, -0.4]")
    c = r.verdicts["T1.1"].check("envelope_ratio_nonincreasing")
    expect(failures, c.passed, f"envelope ratio rises by {c.detail['max_relative_rise']:.3e}")
    settle(failures)


@criterion(9, "boundedness: K finite and saturated, terminal energy level")
def test_c09_boundedness(runs):
    v = runs["theorem1_2"].verdicts["T1.2"]
    failures = []
    for name in ("K_finite", "K_saturation", "terminal_energy_level"):
        c = v.check(name)
        expect(failures, c.passed, f"{name}: {c.status} {c.detail}")
    settle(failures)


@criterion(10, "exponential rate for S0 in {0, 0.2}")
def test_c10_exponential(runs):
    failures = []
    for name in ("theorem1_3_unforced", "theorem1_3"):
        c = runs[name].verdicts["T1.3"].check("exponential_rate")
        d = c.detail
        expect(failures, d.get("r2", 0.0) >= 0.95 and d.get("slope", 0.0) < 0,
               f"{name}: slope {d.get('slope')}, R2 {d.get('r2')}")
    settle(failures)


@criterion(11, "comparison-lemma envelopes over 50 draws per case")
def test_c11_ode_lemma():
    failures = []
    rep = monte_carlo(50, seed=0)
    for case, entry in rep["cases"].items():
        expect(failures, not entry["failures"], f"case {case}: excess {entry['worst_rel_excess']:.2e}")
        expect(failures, entry["worst_rel_excess"] <= 1e-6, f"case {case}: {entry['worst_rel_excess']:.2e}")
    res = rep["cases"]["1"]["worst_F_residual"]
    expect(failures, res <= 1e-12, f"|F(B1)| = {res:.2e}")
    golden = solve_B1(InequalityParams(0.0, 2.0, -1.0, 1.0, A1=1.0, sigma=2.0))
    err = abs(golden - (1 + math.sqrt(5)) / 2)
    expect(failures, err <= 1e-10, f"golden ratio error {err:.2e}")
    settle(failures)


@criterion(12, "weighted interpolation over 100 pairs and the sign probe")
def test_c12_weighted_interpolation():
    failures = []
    g = Grid(0.0, math.pi, 128)
    for s in (0.6, 0.75):
        rep = weighted_interpolation_monte_carlo(g, s, 100, seed=0)
        expect(failures, not rep["failures"], f"s={s}: {rep['failures'][:3]}")
    settle(failures)


@criterion(13, "tau-halving and eps-continuation convergence")
def test_c13_scheme_convergence():
    failures = []
    cfg = replace(load_config(CONFIGS / "theorem1_1.cfg"), T=1.0, tau=0.02)
    sc = cfg.scenario()
    u = [x.nodal for x in tau_refinement(sc, 3)]
    d1, d2 = np.linalg.norm(u[0] - u[1]), np.linalg.norm(u[1] - u[2])
    expect(failures, d1 / d2 >= 1.5, f"tau-halving ratio {d1 / d2:.3f}")
    e = [x.nodal for x in epsilon_continuation(sc, (1e-4, 1e-5, 1e-6))]
    e1, e2 = np.linalg.norm(e[0] - e[1]), np.linalg.norm(e[1] - e[2])
    expect(failures, e2 < e1, f"eps differences {e1:.2e}, {e2:.2e}")
    settle(failures)


@criterion(14, "weak-form residual")
def test_c14_weak_form():
    failures = []
    res = {}
    for tau in (0.02, 0.01):
        r = Run("theorem1_1", keep_history=True, T=2.0, tau=tau)
        g = r.cfg.grid()
        const = dg.weak_form_residual(r.traj, Field.constant(g, 1.0))
        expect(failures, abs(const) <= 1e-8, f"tau={tau}: constant test function {const:.2e}")
        res[tau] = abs(dg.weak_form_residual(r.traj, g.eigenfunction(1)))
    ratio = res[0.02] / res[0.01]
    expect(failures, ratio >= 1.5, f"phi_1 residual ratio {ratio:.3f}")
    settle(failures)


@criterion(15, "determinism: byte-identical outputs")
def test_c15_determinism(tmp_path):
    digests = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert cli.main(["run", "theorem1_3", "--out", str(out)]) == cli.EXIT_OK
        digests.append({name: hashlib.sha256((out / name).read_bytes()).hexdigest()
                        for name in ("trajectory.csv", "verdicts.json", "manifest.json")})
    assert digests[0] == digests[1]
