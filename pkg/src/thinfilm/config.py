"""Scenario configuration files.

INI-style text with sections [domain] [model] [initial] [forcing] [time]
[checks] [run].  Unknown sections or keys are rejected, and every error
names the file, line and key.  Numbers accept ``pi`` and simple multiples
such as ``2*pi`` or ``pi/2``.

Initial data and spatial forcing profiles are given as a mean value plus
eigenmode amplitudes, ``modes = 1:0.1, 3:-0.02`` meaning
mean + 0.1 phi_1 - 0.02 phi_3.
"""
from __future__ import annotations

import configparser
import math
import re
from dataclasses import asdict, dataclass, field

import numpy as np

from .forcing import ForcingSpec
from .spectral import Field, Grid
from .stepper import Scenario, StepperConfig


class ConfigError(ValueError):
    pass


SCHEMA = {
    "domain": {"a", "b", "N"},
    "model": {"n", "s", "eps", "A", "C_omega", "embedding_samples"},
    "initial": {"mean", "modes"},
    "forcing": {"kind", "S0", "mean", "modes", "A1", "sigma", "table"},
    "time": {"tau", "T", "output_stride", "sampling", "newton_tol", "newton_max_iter", "tau_min"},
    "checks": {"theorems", "weak_form", "weak_form_mode", "T_half"},
    "run": {"seed", "output", "checkpoint_every"},
}
REQUIRED = {"domain": {"b", "N"}, "model": {"n", "s"}, "initial": {"mean"}, "time": {"tau", "T"}}
THEOREMS = ("T1.1", "T1.2", "T1.3")

_NUM = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)?\s*(\*?\s*pi)?\s*(?:/\s*(\d+\.?\d*))?\s*$")


def parse_number(text: str) -> float:
    """Float, optionally times ``pi`` and over a divisor: '3', 'pi', '2*pi', '-pi/2'."""
    t = text.strip()
    if t.startswith("-") and t[1:].strip().startswith("pi"):
        return -parse_number(t[1:])
    m = _NUM.match(t)
    if not m or (m.group(1) is None and m.group(2) is None):
        raise ValueError(f"not a number: {text!r}")
    val = float(m.group(1)) if m.group(1) is not None else 1.0
    if m.group(2):
        val *= math.pi
    if m.group(3):
        val /= float(m.group(3))
    return val


def parse_modes(text: str) -> dict:
    out = {}
    for item in filter(None, (p.strip() for p in text.split(","))):
        k, _, a = item.partition(":")
        if not _:
            raise ValueError(f"mode entry {item!r} must look like k:amplitude")
        k = int(k)
        if k < 1:
            raise ValueError("mode indices start at 1 (the mean is given separately)")
        out[k] = out.get(k, 0.0) + parse_number(a)
    return out


def parse_table(text: str) -> tuple:
    pts = []
    for item in filter(None, (p.strip() for p in text.split(","))):
        t, _, g = item.partition(":")
        if not _:
            raise ValueError(f"table entry {item!r} must look like t:value")
        pts.append((parse_number(t), parse_number(g)))
    return tuple(pts)


def profile_coefficients(grid_L: float, mean: float, modes: dict) -> tuple:
    """Cosine coefficients of mean + sum a_k phi_k."""
    top = max(modes) if modes else 0
    c = [0.0] * (top + 1)
    c[0] = mean * math.sqrt(grid_L)
    for k, a in modes.items():
        c[k] = a
    return tuple(c)


@dataclass(frozen=True)
class ScenarioConfig:
    a: float = 0.0
    b: float = 1.0
    N: int = 128
    n: float = 2.0
    s: float = 0.75
    eps: float = 1e-6
    A: float | None = None
    C_omega: float | None = None
    embedding_samples: int = 10_000
    initial_mean: float = 1.0
    initial_modes: dict = field(default_factory=dict)
    forcing_kind: str = "constant"
    S0: float = 0.0
    forcing_mean: float = 0.0
    forcing_modes: dict = field(default_factory=dict)
    A1: float = 0.0
    sigma: float = 0.0
    table: tuple = ()
    tau: float = 0.01
    T: float = 1.0
    output_stride: int = 1
    sampling: str = "left"
    newton_tol: float = 1e-12
    newton_max_iter: int = 30
    tau_min: float | None = None
    theorems: tuple = ()
    weak_form: bool = False
    weak_form_mode: int = 1
    T_half: float | None = None
    seed: int = 0
    output: str = "out"
    checkpoint_every: int = 0

    # --- derived objects -------------------------------------------------

    def grid(self) -> Grid:
        return Grid(self.a, self.b, self.N)

    def initial_field(self) -> Field:
        g = self.grid()
        return Field.from_coeffs(g, profile_coefficients(g.L, self.initial_mean, self.initial_modes))

    def forcing(self) -> ForcingSpec:
        L = self.b - self.a
        if self.forcing_kind == "constant":
            return ForcingSpec.constant(self.S0)
        prof = profile_coefficients(L, self.forcing_mean, self.forcing_modes)
        if self.forcing_kind == "spatial":
            return ForcingSpec.spatial(prof)
        if self.table:
            return ForcingSpec.tabulated(prof, self.table)
        return ForcingSpec.decay_law(prof, self.A1, self.sigma)

    def stepper_config(self) -> StepperConfig:
        return StepperConfig(tau=self.tau, eps=self.eps, newton_tol=self.newton_tol,
                             newton_max_iter=self.newton_max_iter, tau_min=self.tau_min,
                             sampling=self.sampling)

    def scenario(self) -> Scenario:
        return Scenario(self.grid(), self.initial_field(), self.forcing(), self.T,
                        self.stepper_config(), self.s, self.n)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["initial_modes"] = {str(k): v for k, v in sorted(self.initial_modes.items())}
        d["forcing_modes"] = {str(k): v for k, v in sorted(self.forcing_modes.items())}
        d["table"] = [list(p) for p in self.table]
        d["theorems"] = list(self.theorems)
        return d


# ---------------------------------------------------------------------------


def _line_index(text: str) -> dict:
    """(section, key) -> line number, plus (section, None) for headers."""
    idx = {}
    section = None
    for i, line in enumerate(text.splitlines(), start=1):
        st = line.strip()
        if not st or st[0] in "#;":
            continue
        m = re.match(r"^\[([^\]]+)\]", st)
        if m:
            section = m.group(1).strip()
            idx.setdefault((section, None), i)
            continue
        key = re.split(r"[=:]", st, maxsplit=1)[0].strip()
        if section is not None:
            idx.setdefault((section, key), i)
    return idx


def parse_config(text: str, source: str = "<config>") -> ScenarioConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    lines = _line_index(text)

    def where(sec, key=None):
        ln = lines.get((sec, key)) or lines.get((sec, None))
        return f"{source}:{ln}" if ln else source

    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"{where(sec)}: unknown section [{sec}]")
        for key in cp[sec]:
            if key not in SCHEMA[sec]:
                raise ConfigError(f"{where(sec, key)}: unknown key '{key}' in [{sec}]")
    for sec, keys in REQUIRED.items():
        for key in keys:
            if not cp.has_option(sec, key):
                raise ConfigError(f"{where(sec)}: missing required key '{key}' in [{sec}]")

    vals = {}

    def get(sec, key, conv, dest=None):
        if cp.has_option(sec, key):
            raw = cp.get(sec, key)
            try:
                vals[dest or key] = conv(raw)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{where(sec, key)}: [{sec}] {key} = {raw!r}: {exc}") from None

    def to_int(x):
        v = parse_number(x)
        if v != int(v):
            raise ValueError("expected an integer")
        return int(v)

    def to_bool(x):
        v = x.strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ValueError("expected true/false")

    def opt_float(x):
        return None if x.strip().lower() in ("auto", "none", "mean") else parse_number(x)

    def theorems(x):
        out = tuple(p.strip() for p in x.split(",") if p.strip())
        bad = [t for t in out if t not in THEOREMS]
        if bad:
            raise ValueError(f"unknown theorem ids {bad}; expected some of {THEOREMS}")
        return out

    get("domain", "a", parse_number)
    get("domain", "b", parse_number)
    get("domain", "N", to_int)
    get("model", "n", parse_number)
    get("model", "s", parse_number)
    get("model", "eps", parse_number)
    get("model", "A", opt_float)
    get("model", "C_omega", opt_float)
    get("model", "embedding_samples", to_int)
    get("initial", "mean", parse_number, "initial_mean")
    get("initial", "modes", parse_modes, "initial_modes")
    get("forcing", "kind", lambda x: x.strip(), "forcing_kind")
    get("forcing", "S0", parse_number)
    get("forcing", "mean", parse_number, "forcing_mean")
    get("forcing", "modes", parse_modes, "forcing_modes")
    get("forcing", "A1", parse_number)
    get("forcing", "sigma", parse_number)
    get("forcing", "table", parse_table)
    get("time", "tau", parse_number)
    get("time", "T", parse_number)
    get("time", "output_stride", to_int)
    get("time", "sampling", lambda x: x.strip())
    get("time", "newton_tol", parse_number)
    get("time", "newton_max_iter", to_int)
    get("time", "tau_min", opt_float)
    get("checks", "theorems", theorems)
    get("checks", "weak_form", to_bool)
    get("checks", "weak_form_mode", to_int)
    get("checks", "T_half", opt_float)
    get("run", "seed", to_int)
    get("run", "output", lambda x: x.strip())
    get("run", "checkpoint_every", to_int)
    cfg = ScenarioConfig(**vals)
    _validate(cfg, where, cp)
    return cfg


def _validate(cfg: ScenarioConfig, where, cp) -> None:
    def fail(sec, key, msg):
        raise ConfigError(f"{where(sec, key)}: [{sec}] {key}: {msg}")

    if not cfg.b > cfg.a:
        fail("domain", "b", "need b > a")
    if not 4 <= cfg.N <= 1024:
        fail("domain", "N", "node count must lie in [4, 1024]")
    if not cfg.n > 0:
        fail("model", "n", "mobility exponent must be positive")
    if not 0 < cfg.s < 1:
        fail("model", "s", "fractional order must lie in (0, 1)")
    if not cfg.eps > 0:
        fail("model", "eps", "regularization must be positive")
    if cfg.A is not None and not cfg.A > 0:
        fail("model", "A", "entropy anchor must be positive")
    if cfg.C_omega is not None and not cfg.C_omega > 0:
        fail("model", "C_omega", "embedding constant must be positive")
    if cfg.C_omega is None and cfg.s <= 0.5:
        fail("model", "s", "estimating the embedding constant needs s > 1/2 (or set C_omega)")
    if cfg.embedding_samples < 1:
        fail("model", "embedding_samples", "must be positive")
    for k in cfg.initial_modes:
        if k >= cfg.N:
            fail("initial", "modes", f"mode {k} not resolved by N = {cfg.N}")
    if cfg.forcing_kind not in ("constant", "spatial", "spacetime"):
        fail("forcing", "kind", "expected constant, spatial or spacetime")
    if cfg.forcing_kind == "constant":
        for key in ("mean", "modes", "A1", "sigma", "table"):
            if cp.has_option("forcing", key):
                fail("forcing", key, "not used by constant forcing (use S0)")
    else:
        if cp.has_option("forcing", "S0"):
            fail("forcing", "S0", f"not used by {cfg.forcing_kind} forcing (use mean/modes)")
        for k in cfg.forcing_modes:
            if k >= cfg.N:
                fail("forcing", "modes", f"mode {k} not resolved by N = {cfg.N}")
    if cfg.forcing_kind == "spatial":
        for key in ("A1", "sigma", "table"):
            if cp.has_option("forcing", key):
                fail("forcing", key, "only used by spacetime forcing")
    if cfg.forcing_kind == "spacetime":
        if cfg.table:
            if cp.has_option("forcing", "A1") or cp.has_option("forcing", "sigma"):
                fail("forcing", "table", "give either a table or A1/sigma")
        elif not cfg.A1 > 0:
            fail("forcing", "A1", "decay-law amplitude must be positive")
    if not cfg.tau > 0:
        fail("time", "tau", "time step must be positive")
    if not cfg.T >= 0:
        fail("time", "T", "final time must be nonnegative")
    if cfg.output_stride < 1:
        fail("time", "output_stride", "must be >= 1")
    if cfg.sampling not in ("left", "right"):
        fail("time", "sampling", "expected left or right")
    if not cfg.newton_tol > 0:
        fail("time", "newton_tol", "must be positive")
    if cfg.newton_max_iter < 1:
        fail("time", "newton_max_iter", "must be >= 1")
    if cfg.tau_min is not None and not 0 < cfg.tau_min < cfg.tau:
        fail("time", "tau_min", "need 0 < tau_min < tau")
    if cfg.weak_form_mode < 0 or cfg.weak_form_mode >= cfg.N:
        fail("checks", "weak_form_mode", "mode index out of range")
    if cfg.T_half is not None and not 0 < cfg.T_half <= cfg.T:
        fail("checks", "T_half", "need 0 < T_half <= T")
    if cfg.checkpoint_every < 0:
        fail("run", "checkpoint_every", "must be >= 0")
    try:
        u0 = cfg.initial_field()
    except ValueError as exc:
        fail("initial", "mean", str(exc))
    if np.any(u0.nodal < 0):
        fail("initial", "modes", "initial datum must be nonnegative at every node")
    try:
        cfg.forcing()
    except ValueError as exc:
        fail("forcing", "kind", str(exc))


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        text = fh.read()
    return parse_config(text, str(path))
