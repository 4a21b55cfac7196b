"""Experiment configuration: INI-style sections of ``key = value`` pairs.

Every key has a default, so an empty file is a valid configuration. Unknown
sections or keys are errors. See :data:`DEFAULTS` for the full table.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ParseError
from .flow import parse_flow
from .model import ForceModel, ModelParams
from .observables import parse_strategy

EXPERIMENTS = ("fenep_lift", "fenep_coarse", "fene_lift", "qe_compare",
               "fene_coarse_startup", "fene_coarse_complex")

# section -> key -> (default text, description)
DEFAULTS: dict[str, dict[str, tuple[str, str]]] = {
    "experiment": {
        "name": ("fene_lift", "one of " + ", ".join(EXPERIMENTS)),
        "seed": ("1", "master seed; every stream is derived from it"),
    },
    "model": {
        "b": ("49", "maximal extension parameter"),
        "we": ("1", "Weissenberg number"),
        "eps": ("1", "viscosity ratio in (0, 1]"),
        "force": ("fene", "fene, fenep or hookean"),
    },
    "closure": {
        "strategy": ("even", "even, even+stress or cascade (optionally with ':L')"),
        "L": ("1", "comma-separated list of L values; not allowed with cascade"),
    },
    "numerics": {
        "n_particles": ("2000", "ensemble size"),
        "dt": ("2e-4", "microscopic time step"),
        "k_steps": ("1", "comma-separated list of K (macro step = K dt)"),
        "m_inf": ("50", "constrained steps per lift"),
        "m_inf_per_k": ("0", "if > 0, use m_inf = m_inf_per_k * K instead"),
        "t_star": ("1", "comma-separated lifting times"),
        "t_end": ("4", "end time of trajectories"),
        "init": ("warm", "lift start: warm, equilibrium or uniform"),
        "lift_mode": ("frozen", "frozen (kappa at t*) or qe (kappa = 0)"),
        "plateau_window": ("0", "steps in the plateau detector window; 0 disables"),
        "snapshots": ("5", "intermediate histograms written during a lift"),
        "output_dt": ("0", "spacing of reference outputs; 0 means every macro step"),
    },
    "flow": {
        "kappa": ("constant:2", "complex, zero, constant:<value> or table:<csv>"),
    },
    "output": {
        "dir": ("out", "output directory"),
        "bins": ("100", "histogram bins over [-sqrt(b), sqrt(b)]"),
    },
}


_LOWER = {s: {k.lower(): v[0] for k, v in keys.items()} for s, keys in DEFAULTS.items()}


@dataclass
class ExperimentConfig:
    experiment: str = "fene_lift"
    params: ModelParams = field(default_factory=ModelParams)
    strategy: str = "even"
    L: tuple = (1,)
    n_particles: int = 2000
    dt: float = 2e-4
    k_steps: tuple = (1,)
    m_inf: int = 50
    m_inf_per_k: int = 0
    t_star: tuple = (1.0,)
    t_end: float = 4.0
    seed: int = 1
    flow: str = "constant:2"
    out_dir: str = "out"
    bins: int = 100
    init: str = "warm"
    lift_mode: str = "frozen"
    plateau_window: int = 0
    snapshots: int = 5
    output_dt: float = 0.0
    base_dir: str = "."

    def strategy_tokens(self) -> list[str]:
        if self.strategy == "cascade":
            return ["cascade"]
        return [f"{self.strategy}:{L}" for L in self.L]

    def m_inf_for(self, k: int) -> int:
        return self.m_inf_per_k * k if self.m_inf_per_k > 0 else self.m_inf

    def schedule(self):
        return parse_flow(self.flow, Path(self.base_dir))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = {"b": self.params.b, "we": self.params.we, "eps": self.params.eps,
                       "force_model": self.params.force_model.value}
        d.pop("base_dir")
        return d


def _locate(text: str):
    """Map ``(section, key)`` to the 1-based line where it is set."""
    where, section = {}, None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip().lower()
            where[(section, None)] = no
            continue
        m = re.match(r"([^=:#;\s][^=:]*?)\s*[=:]", s)
        if m and section is not None:
            where.setdefault((section, m.group(1).strip().lower()), no)
    return where


class _Reader:
    def __init__(self, cp: configparser.ConfigParser, where):
        self.cp = cp
        self.where = where

    def raw(self, sec, key):
        if self.cp.has_option(sec, key):
            return self.cp.get(sec, key).strip()
        return _LOWER[sec][key.lower()]

    def given(self, sec, key) -> bool:
        return self.cp.has_option(sec, key)

    def fail(self, sec, key, msg):
        raise ParseError(msg, field=f"{sec}.{key}", line=self.where.get((sec, key.lower())))

    def _conv(self, sec, key, fn, what):
        text = self.raw(sec, key)
        try:
            return fn(text)
        except ValueError:
            self.fail(sec, key, f"{sec}.{key} = {text!r} is not {what}")

    def integer(self, sec, key, lo=None):
        v = self._conv(sec, key, int, "an integer")
        if lo is not None and v < lo:
            self.fail(sec, key, f"{sec}.{key} must be >= {lo}, got {v}")
        return v

    def real(self, sec, key, positive=False, nonneg=False):
        v = self._conv(sec, key, float, "a number")
        if v != v or v in (float("inf"), float("-inf")):
            self.fail(sec, key, f"{sec}.{key} must be finite")
        if positive and not v > 0:
            self.fail(sec, key, f"{sec}.{key} must be positive, got {v}")
        if nonneg and v < 0:
            self.fail(sec, key, f"{sec}.{key} must be >= 0, got {v}")
        return v

    def int_list(self, sec, key, lo=1):
        text = self.raw(sec, key)
        try:
            vals = tuple(int(t) for t in text.split(",") if t.strip())
        except ValueError:
            self.fail(sec, key, f"{sec}.{key} = {text!r} is not a list of integers")
        if not vals or any(v < lo for v in vals):
            self.fail(sec, key, f"{sec}.{key} needs integers >= {lo}")
        return vals

    def real_list(self, sec, key):
        text = self.raw(sec, key)
        try:
            vals = tuple(float(t) for t in text.split(",") if t.strip())
        except ValueError:
            self.fail(sec, key, f"{sec}.{key} = {text!r} is not a list of numbers")
        if not vals or any(not v >= 0 for v in vals):
            self.fail(sec, key, f"{sec}.{key} needs nonnegative numbers")
        return vals


def validate_config(text: str, base_dir: str | Path = ".") -> ExperimentConfig:
    """Parse, default and range-check configuration text.

    Raises
    ------
    ParseError
        With ``field`` (``section.key``) and ``line`` set where they apply.
    """
    cp = configparser.ConfigParser(interpolation=None, strict=True)
    cp.optionxform = str.lower
    try:
        cp.read_string(text)
    except configparser.DuplicateOptionError as e:
        raise ParseError(f"duplicate key {e.option!r}", field=f"{e.section}.{e.option}",
                         line=e.lineno) from None
    except configparser.DuplicateSectionError as e:
        raise ParseError(f"duplicate section {e.section!r}", field=e.section, line=e.lineno) from None
    except configparser.MissingSectionHeaderError as e:
        raise ParseError("key outside any [section]", line=e.lineno) from None
    except configparser.ParsingError as e:
        line = e.errors[0][0] if e.errors else None
        raise ParseError(f"malformed line: {e.errors[0][1] if e.errors else ''}", line=line) from None
    where = _locate(text)
    known = {s: {k.lower() for k in keys} for s, keys in DEFAULTS.items()}
    for sec in cp.sections():
        if sec not in known:
            raise ParseError(f"unknown section [{sec}]", field=sec, line=where.get((sec, None)))
        for key in cp.options(sec):
            if key not in known[sec]:
                raise ParseError(f"unknown key {key!r} in [{sec}]", field=f"{sec}.{key}",
                                 line=where.get((sec, key)))
    r = _Reader(cp, where)

    name = r.raw("experiment", "name").lower()
    if name not in EXPERIMENTS:
        r.fail("experiment", "name", f"unknown experiment {name!r}; expected one of {EXPERIMENTS}")
    b = r.real("model", "b", positive=True)
    we = r.real("model", "we", positive=True)
    eps = r.real("model", "eps", positive=True)
    if eps > 1:
        r.fail("model", "eps", f"model.eps must lie in (0, 1], got {eps}")
    force = r.raw("model", "force").lower()
    try:
        params = ModelParams(b, we, eps, ForceModel(force))
    except ValueError:
        r.fail("model", "force", f"unknown force model {force!r}")

    strategy = r.raw("closure", "strategy").lower()
    kind, _, arg = strategy.partition(":")
    if kind not in ("even", "even+stress", "cascade"):
        r.fail("closure", "strategy", f"unknown strategy {strategy!r}")
    if kind == "cascade":
        if arg or r.given("closure", "l"):
            key = "l" if r.given("closure", "l") else "strategy"
            r.fail("closure", key, "cascade fixes L = 4; remove the L setting")
        Ls = (4,)
    elif arg:
        if r.given("closure", "l"):
            r.fail("closure", "l", "L is given both in the strategy token and as a key")
        try:
            Ls = (int(arg),)
        except ValueError:
            r.fail("closure", "strategy", f"bad L in strategy token {strategy!r}")
    else:
        Ls = r.int_list("closure", "l", lo=1)
    for L in Ls:
        try:
            parse_strategy(f"{kind}:{L}" if kind != "cascade" else kind, params)
        except ValueError as e:
            r.fail("closure", "l" if r.given("closure", "l") else "strategy", str(e))

    cfg = ExperimentConfig(
        experiment=name, params=params, strategy=kind, L=Ls,
        n_particles=r.integer("numerics", "n_particles", lo=1),
        dt=r.real("numerics", "dt", positive=True),
        k_steps=r.int_list("numerics", "k_steps", lo=1),
        m_inf=r.integer("numerics", "m_inf", lo=0),
        m_inf_per_k=r.integer("numerics", "m_inf_per_k", lo=0),
        t_star=r.real_list("numerics", "t_star"),
        t_end=r.real("numerics", "t_end", nonneg=True),
        seed=r.integer("experiment", "seed", lo=0),
        flow=r.raw("flow", "kappa"),
        out_dir=r.raw("output", "dir"),
        bins=r.integer("output", "bins", lo=1),
        init=r.raw("numerics", "init").lower(),
        lift_mode=r.raw("numerics", "lift_mode").lower(),
        plateau_window=r.integer("numerics", "plateau_window", lo=0),
        snapshots=r.integer("numerics", "snapshots", lo=0),
        output_dt=r.real("numerics", "output_dt", nonneg=True),
        base_dir=str(base_dir),
    )
    if cfg.init not in ("warm", "equilibrium", "uniform"):
        r.fail("numerics", "init", f"unknown init {cfg.init!r}")
    if cfg.lift_mode not in ("frozen", "qe"):
        r.fail("numerics", "lift_mode", f"unknown lift mode {cfg.lift_mode!r}")
    if cfg.dt >= 1:
        r.fail("numerics", "dt", "numerics.dt must be below 1 (the FENE bound uses sqrt(dt))")
    if r.given("numerics", "m_inf") and cfg.m_inf_per_k > 0:
        r.fail("numerics", "m_inf_per_k", "set either m_inf or m_inf_per_k, not both")
    try:
        cfg.schedule()
    except (ValueError, OSError) as e:
        r.fail("flow", "kappa", f"bad flow {cfg.flow!r}: {e}")
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    return validate_config(path.read_text(), base_dir=path.parent)


def defaults_table() -> str:
    """Markdown table of every key, its default and meaning."""
    rows = ["| section | key | default | meaning |", "|---|---|---|---|"]
    for sec, keys in DEFAULTS.items():
        for key, (val, desc) in keys.items():
            rows.append(f"| {sec} | {key} | `{val}` | {desc} |")
    return "\n".join(rows)
