"""Command line entry point.

    thinfilm run CONFIG [CONFIG ...] [--jobs K] [--out DIR]
    thinfilm resume CHECKPOINT
    thinfilm verify-lemmas [--seed S] [--draws D] [--out REPORT.json]
    thinfilm ode-envelope --lam L --p P --beta B --X0 X (--A1 A --sigma S | --alpha A)
    thinfilm configs

``run`` writes trajectory.csv, verdicts.json, manifest.json (and
checkpoint.json when checkpointing is enabled) into the output directory.
Exit status: 0 when no check fails, 1 when a check fails, 2 on a solver
abort, 3 on configuration errors, 4 when ``--stop-after`` ended the run early
(continue it with ``resume``).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import diagnostics as dg
from .config import ConfigError, ScenarioConfig, parse_config
from .forcing import check_admissibility, default_time_samples
from .inequalities import (estimate_embedding_constant, functional_monte_carlo,
                           weighted_interpolation_monte_carlo)
from .ode_lemma import InequalityParams, monte_carlo, solve_B1, verify_comparison
from .spectral import Field, Grid
from .stepper import SimState, SolverAbort, load_checkpoint, save_checkpoint

EXIT_OK, EXIT_FAIL, EXIT_ABORT, EXIT_CONFIG, EXIT_STOPPED = 0, 1, 2, 3, 4
CHECKPOINT = "checkpoint.json"
PARTIAL = "records.partial.csv"   # every step of an unfinished run, removed on completion
CONFIG_DIR = Path(__file__).parent / "configs"


def bundled_configs() -> list:
    return sorted(p.name for p in CONFIG_DIR.glob("*.cfg"))


def resolve_config(path: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    for cand in (CONFIG_DIR / path, CONFIG_DIR / f"{path}.cfg"):
        if cand.exists():
            return cand
    raise FileNotFoundError(f"no config file {path!r} (bundled: {', '.join(bundled_configs())})")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def versions() -> dict:
    return {"thinfilm": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


# ---------------------------------------------------------------------------
# scenario runs


def embedding_constant(cfg: ScenarioConfig) -> tuple:
    if cfg.C_omega is not None:
        return cfg.C_omega, "configured"
    est = estimate_embedding_constant(cfg.grid(), cfg.s, samples=cfg.embedding_samples, seed=cfg.seed)
    return est.value, est.method


class _CsvSink:
    """Streams records to trajectory.csv, keeping every ``stride``-th step and the last."""

    def __init__(self, path: Path, stride: int, keep_rows=None):
        self.path, self.stride = path, stride
        self.fh = open(path, "w", newline="")
        self.w = csv.writer(self.fh, lineterminator="\n")
        self.w.writerow(dg.FIELDS)
        self.last_written = -1
        for rec in keep_rows or ():
            self._write(rec)

    def _write(self, rec):
        self.w.writerow([repr(getattr(rec, k)) for k in dg.FIELDS])
        self.last_written = rec.step

    def add(self, rec):
        if rec.step % self.stride == 0:
            self._write(rec)

    def finish(self, rec):
        if rec.step != self.last_written:
            self._write(rec)
        self.fh.close()

    def flush(self):
        if not self.fh.closed:
            self.fh.flush()


def _weak_form_report(traj: dg.Trajectory, cfg: ScenarioConfig) -> dict:
    g = cfg.grid()
    const = Field.constant(g, 1.0)
    mode = g.eigenfunction(cfg.weak_form_mode) if cfg.weak_form_mode > 0 else const
    r0 = dg.weak_form_residual(traj, const)
    r1 = dg.weak_form_residual(traj, mode)
    scale = max(1.0, abs(traj.ctx.mass0))
    return {"constant_test_function": r0, "constant_passes": bool(abs(r0) <= 1e-8 * scale),
            f"mode_{cfg.weak_form_mode}_test_function": r1}


def _verdict_document(cfg, ctx, records, C_method, adm, weak, status_override=None) -> dict:
    tab = dg.records_to_table(records)
    verdicts = dg.evaluate_theorems(tab, ctx, cfg.theorems) if len(records) > 1 else []
    failed = any(v.status == dg.FAIL for v in verdicts)
    if weak is not None and not weak["constant_passes"]:
        failed = True
    status = status_override or (dg.FAIL if failed else dg.PASS)
    return {"status": status, "C_omega": ctx.C_omega, "C_omega_method": C_method,
            "admissibility": {"passes": adm.passes, "mean_rate": adm.mean_rate,
                              "seminorm": adm.seminorm, "worst_time": adm.worst_time},
            "final_time": records[-1].t, "steps": records[-1].step,
            "theorems": [v.to_dict() for v in verdicts],
            "weak_form": None if weak is None else {k: dg._json_float(v) for k, v in weak.items()}}


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True, allow_nan=True)
        fh.write("\n")


class _Stop(Exception):
    pass


def execute(cfg: ScenarioConfig, cfg_text: str, outdir: Path, resume_from=None,
            stop_after: int | None = None) -> int:
    """Run (or continue) a scenario and write all artifacts.  Returns the exit code.

    ``stop_after`` ends the run (with a checkpoint) once that many steps have
    been taken in this invocation.
    """
    outdir.mkdir(parents=True, exist_ok=True)
    scenario = cfg.scenario()
    if resume_from is None:
        C, C_method = embedding_constant(cfg)
    else:
        C, C_method = resume_from["C_omega"], resume_from["C_omega_method"]
    ctx = dg.ScenarioContext.build(scenario, C, cfg.A)
    adm = check_admissibility(scenario.forcing, scenario.grid, cfg.s, C,
                              default_time_samples(cfg.tau, cfg.T))
    csv_path = outdir / "trajectory.csv"
    partial_path = outdir / PARTIAL
    start = None
    if resume_from is None:
        kept = [dg.initial_record(ctx, scenario.u0)]
    else:
        state, rec = resume_from["state"], resume_from["record"]
        kept = [r for r in dg.read_csv(partial_path) if r.step <= rec.step] if partial_path.exists() else []
        if not kept or kept[-1].step != rec.step:
            raise ValueError(f"{partial_path} does not reach the checkpoint step {rec.step}")
        start = (state, rec)
    last = {"state": start[0] if start else None, "taken": 0}
    sink = _CsvSink(csv_path, cfg.output_stride, [r for r in kept if r.step % cfg.output_stride == 0])
    full = _CsvSink(partial_path, 1, kept)
    records = list(kept)

    def checkpoint(state, rec):
        sink.flush()
        full.flush()
        save_checkpoint(outdir / CHECKPOINT, state,
                        {"record": asdict(rec), "config_text": cfg_text, "C_omega": C,
                         "C_omega_method": C_method})

    def on_step(state, rec):
        sink.add(rec)
        full.add(rec)
        records.append(rec)
        last["state"] = state
        last["taken"] += 1
        if cfg.checkpoint_every and state.step_index % cfg.checkpoint_every == 0:
            checkpoint(state, rec)
        if stop_after is not None and last["taken"] >= stop_after:
            raise _Stop

    weak = None
    status_override = None
    code = EXIT_OK
    try:
        traj = dg.run_trajectory(scenario, ctx, keep_history=cfg.weak_form and start is None,
                                 start=start, on_step=on_step)
        sink.finish(records[-1])
        if cfg.checkpoint_every:
            checkpoint(traj.final_state, records[-1])
        full.finish(records[-1])
        partial_path.unlink()
        if cfg.weak_form and traj.complete_history and len(traj.U) > 1:
            weak = _weak_form_report(traj, cfg)
    except (SolverAbort, _Stop) as exc:
        sink.finish(records[-1])
        full.finish(records[-1])
        if last["state"] is None:
            last["state"] = SimState(0.0, scenario.u0, 0)
        checkpoint(last["state"], records[-1])
        if isinstance(exc, _Stop):
            status_override, code = "incomplete", EXIT_STOPPED
        else:
            status_override, code = "aborted", EXIT_ABORT
            print(f"solver abort: {exc}", file=sys.stderr)
    doc = _verdict_document(cfg, ctx, records, C_method, adm, weak, status_override)
    _write_json(outdir / "verdicts.json", doc)
    outputs = {name: _sha256(outdir / name) for name in ("trajectory.csv", "verdicts.json")}
    manifest = {"config": cfg.to_dict(), "config_text": cfg_text, "seed": cfg.seed,
                "versions": versions(), "C_omega": C, "C_omega_method": C_method,
                "resumed": resume_from is not None, "outputs": outputs}
    _write_json(outdir / "manifest.json", manifest)
    if code == EXIT_OK and doc["status"] == dg.FAIL:
        code = EXIT_FAIL
    return code


def _run_one(path: str, out: str | None, stop_after: int | None = None) -> tuple:
    try:
        p = resolve_config(path)
        text = p.read_text()
        cfg = parse_config(text, str(p))
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return path, EXIT_CONFIG
    outdir = Path(out if out is not None else cfg.output)
    return path, execute(cfg, text, outdir, stop_after=stop_after)


def cmd_run(args) -> int:
    if args.out is not None and len(args.configs) > 1:
        print("--out needs a single config", file=sys.stderr)
        return EXIT_CONFIG
    if args.jobs > 1 and len(args.configs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_one, args.configs, [args.out] * len(args.configs),
                                    [args.stop_after] * len(args.configs)))
    else:
        results = [_run_one(c, args.out, args.stop_after) for c in args.configs]
    for path, code in results:
        label = {EXIT_OK: "ok", EXIT_FAIL: "checks failed", EXIT_ABORT: "solver abort",
                 EXIT_CONFIG: "config error", EXIT_STOPPED: "stopped (resumable)"}[code]
        print(f"{path}: {label}")
    return max(code for _, code in results)


def cmd_resume(args) -> int:
    ck = Path(args.checkpoint)
    try:
        state, payload = load_checkpoint(ck)
        text = payload["config_text"]
        cfg = parse_config(text, f"{ck} (embedded config)")
    except (OSError, ValueError, KeyError) as exc:
        print(f"cannot resume: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rec = dg.DiagnosticsRecord(**payload["record"])
    outdir = ck.parent
    if not (outdir / PARTIAL).exists():
        print(f"cannot resume: {outdir / PARTIAL} is missing (the run already finished?)", file=sys.stderr)
        return EXIT_CONFIG
    code = execute(cfg, text, outdir, resume_from={"state": state, "record": rec,
                                                   "C_omega": payload["C_omega"],
                                                   "C_omega_method": payload["C_omega_method"]})
    print(f"{ck}: resumed from step {state.step_index}, exit {code}")
    return code


# ---------------------------------------------------------------------------
# lemma verification


def verify_lemmas(seed: int = 0, draws: int | None = None) -> dict:
    """Run every property suite; returns a JSON-ready report with a 'falsified' flag."""
    ode_draws = 50 if draws is None else draws
    pair_draws = 100 if draws is None else draws
    report = {"seed": seed}
    golden = InequalityParams(0.0, 2.0, -1.0, 1.0, A1=1.0, sigma=2.0)
    gerr = abs(solve_B1(golden) - (1 + math.sqrt(5)) / 2)
    mc = monte_carlo(ode_draws, seed)
    report["comparison_lemma"] = {"golden_ratio_error": gerr, **mc}
    grid = Grid(0.0, math.pi, 128)
    report["weighted_interpolation"] = {
        str(s): weighted_interpolation_monte_carlo(grid, s, pair_draws, seed) for s in (0.6, 0.75)}
    report["functional"] = functional_monte_carlo(grid, 0.75, pair_draws, seed)
    est = estimate_embedding_constant(grid, 0.75, seed=seed)
    report["embedding_constant"] = {"value": est.value, "best_found": est.best_found,
                                    "tail": est.tail, "method": est.method}
    bad = gerr > 1e-10
    bad |= any(c["failures"] for c in mc["cases"].values())
    bad |= mc["cases"]["1"]["worst_F_residual"] > 1e-12
    bad |= any(r["failures"] for r in report["weighted_interpolation"].values())
    bad |= report["functional"]["worst_poincare_margin"] < -1e-12
    bad |= report["functional"]["worst_interpolation_margin"] < -1e-12
    report["falsified"] = bool(bad)
    return report


def cmd_verify(args) -> int:
    rep = verify_lemmas(args.seed, args.draws)
    ode = rep["comparison_lemma"]
    rows = [("B1 golden-ratio case, |error|", ode["golden_ratio_error"]),
            ("B1 residual max |F(B1)|", ode["cases"]["1"]["worst_F_residual"]),
            ("case 1 worst relative excess", ode["cases"]["1"]["worst_rel_excess"]),
            ("case 2 worst relative excess", ode["cases"]["2"]["worst_rel_excess"])]
    for s, r in rep["weighted_interpolation"].items():
        rows.append((f"weighted interpolation s={s}: min ratio", r["worst_ratio"]))
        rows.append((f"weighted interpolation s={s}: max probe", r["worst_probe"]))
    rows.append(("Poincare worst margin", rep["functional"]["worst_poincare_margin"]))
    rows.append(("interpolation worst margin", rep["functional"]["worst_interpolation_margin"]))
    rows.append(("sup-embedding constant (0,pi), s=0.75", rep["embedding_constant"]["value"]))
    print(f"seed {args.seed}")
    for name, val in rows:
        print(f"  {name:<44s} {val: .6e}")
    if args.out:
        _write_json(Path(args.out), rep)
    if rep["falsified"]:
        print("FALSIFIED; reproducer:", file=sys.stderr)
        for case in ode["cases"].values():
            for f in case["failures"]:
                print(f"  seed={args.seed} params={f['params']}", file=sys.stderr)
        for s, r in rep["weighted_interpolation"].items():
            for f in r["failures"]:
                print(f"  seed={args.seed} s={s} draw={f['draw']}", file=sys.stderr)
        return EXIT_FAIL
    print("no falsification")
    return EXIT_OK


def cmd_ode(args) -> int:
    try:
        if args.alpha is not None:
            p = InequalityParams(args.lam, args.p, args.beta, args.X0, alpha=args.alpha)
        else:
            p = InequalityParams(args.lam, args.p, args.beta, args.X0, A1=args.A1, sigma=args.sigma)
    except ValueError as exc:
        print(f"bad parameters: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    res = verify_comparison(p, t_end=args.T, h=args.h, stride=args.stride)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["t", "X_rk", "envelope"])
    for t, x, e in zip(res.t, res.X, res.envelope):
        w.writerow([repr(float(t)), repr(float(x)), repr(float(e))])
    if args.out:
        out.close()
    print(f"max relative excess {res.max_rel_excess:.3e}; envelope holds: {res.holds}", file=sys.stderr)
    return EXIT_OK if res.holds else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="thinfilm", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run scenario configs")
    r.add_argument("configs", nargs="+")
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--out", default=None, help="output directory (single config only)")
    r.add_argument("--stop-after", type=int, default=None, metavar="STEPS",
                   help="checkpoint and stop after this many steps")
    r.set_defaults(func=cmd_run)
    c = sub.add_parser("resume", help="continue a run from its checkpoint")
    c.add_argument("checkpoint")
    c.set_defaults(func=cmd_resume)
    v = sub.add_parser("verify-lemmas", help="Monte-Carlo checks of the auxiliary inequalities")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--draws", type=int, default=None)
    v.add_argument("--out", default=None)
    v.set_defaults(func=cmd_verify)
    o = sub.add_parser("ode-envelope", help="RK4 equality trajectory against its envelope (CSV)")
    o.add_argument("--lam", type=float, required=True)
    o.add_argument("--p", type=float, required=True)
    o.add_argument("--beta", type=float, required=True)
    o.add_argument("--X0", type=float, required=True)
    o.add_argument("--A1", type=float)
    o.add_argument("--sigma", type=float)
    o.add_argument("--alpha", type=float)
    o.add_argument("--T", type=float, default=100.0)
    o.add_argument("--h", type=float, default=1e-3)
    o.add_argument("--stride", type=int, default=100)
    o.add_argument("--out", default=None)
    o.set_defaults(func=cmd_ode)
    l = sub.add_parser("configs", help="list bundled scenario configs")
    l.set_defaults(func=lambda a: print("\n".join(bundled_configs())) or EXIT_OK)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
