"""Experiment protocols that write CSV data files and a JSON manifest."""

from __future__ import annotations

import csv
import json
import logging
import math
import platform
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .coarse import CoarseConfig, run_coarse, run_micro_reference
from .config import ExperimentConfig
from .constrained import lift
from .errors import FeneClosureError, InfeasibleMoments
from .fenep_ode import integrate as integrate_fenep
from .histio import bin as bin_ensemble
from .histio import l1_distance
from .model import sample_equilibrium
from .observables import parse_strategy, restrict, stress
from .qe_oracle import qe_solve
from .rng import RngStream, mix64
from .sde import simulate

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"


def derived_stream(seed: int, *tags) -> RngStream:
    """Independent stream for ``tags``; stable across runs and platforms."""
    h = seed & 0xFFFFFFFFFFFFFFFF
    for t in tags:
        h = mix64(h ^ zlib.crc32(str(t).encode()))
    return RngStream(h)


def _tag(x) -> str:
    return f"{x:g}".replace(".", "p") if isinstance(x, float) else str(x).replace(":", "").replace("+", "_")


@dataclass
class Outputs:
    root: Path
    files: list = field(default_factory=list)

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.root / name


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _steps(t: float, dt: float) -> int:
    n = int(round(t / dt))
    if not math.isclose(n * dt, t, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError(f"time {t} is not a multiple of dt = {dt}")
    return n


def _reference_ensembles(cfg: ExperimentConfig, schedule):
    """Equilibrium start simulated to each ``t*`` (sorted); returns ``{t*: Ensemble}``."""
    p = cfg.params
    ens = sample_equilibrium(cfg.n_particles, p.b, derived_stream(cfg.seed, "init"), p)
    rng = derived_stream(cfg.seed, "reference")
    out = {}
    for ts in sorted(set(cfg.t_star)):
        ens = simulate(ens, schedule, cfg.dt, _steps(ts, cfg.dt) - _steps(ens.time, cfg.dt), rng)
        out[ts] = ens.with_configs(ens.configs, time=ts)
    return out


def run_lift_experiment(cfg: ExperimentConfig, out: Outputs) -> dict:
    """Reference run to each ``t*``, then one lift per strategy token (fenep_lift / fene_lift)."""
    schedule = cfg.schedule()
    refs = _reference_ensembles(cfg, schedule)
    summary = []
    n_snap = max(cfg.snapshots, 0)
    for ts, ref in refs.items():
        h_ref = bin_ensemble(ref, cfg.bins, cfg.params.b)
        h_ref.to_csv(out.path(f"histogram_t{_tag(ts)}_reference.csv"))
        kap = schedule(ts) if cfg.lift_mode == "frozen" else 0.0
        for token in cfg.strategy_tokens():
            spec = parse_strategy(token, cfg.params)
            target = restrict(ref, spec)
            init = ref if cfg.init == "warm" else cfg.init
            rng = derived_stream(cfg.seed, "lift", ts, token)
            tag = f"t{_tag(ts)}_{_tag(token)}"
            marks = set(np.linspace(0, cfg.m_inf, n_snap + 1).round().astype(int)) if n_snap else set()
            l1_rows = []

            def observer(ens, m, tag=tag, marks=marks, rows=l1_rows):
                h = bin_ensemble(ens, cfg.bins, cfg.params.b)
                rows.append((m, m * cfg.dt, l1_distance(h, h_ref)))
                if m in marks and m != cfg.m_inf:
                    h.to_csv(out.path(f"histogram_{tag}_m{m}.csv"))

            rep = lift(target, spec, kap, cfg.dt, cfg.m_inf, init, rng, n_particles=cfg.n_particles,
                       plateau_window=cfg.plateau_window or None, observer=observer)
            h = bin_ensemble(rep.ensemble, cfg.bins, cfg.params.b)
            h.to_csv(out.path(f"histogram_{tag}.csv"))
            series = rep.monitor_series
            _write_rows(out.path(f"trajectory_{tag}.csv"),
                        ["step", "lift_time", rep.monitor_label, "l1_to_reference"],
                        [(m, lt, series[i], l1) for i, (m, lt, l1) in enumerate(l1_rows)])
            summary.append({"t_star": ts, "strategy": token, "l1": l1_distance(h, h_ref),
                            "tau_reference": stress(ref), "tau_lifted": stress(rep.ensemble),
                            "steps": rep.steps_run, "plateau": rep.plateau_reached,
                            "retry_rounds": rep.retry_rounds})
    _write_rows(out.path("summary.csv"), list(summary[0].keys()), [list(s.values()) for s in summary])
    return {"lifts": summary}


def run_qe_compare(cfg: ExperimentConfig, out: Outputs) -> dict:
    """Stress relaxation during kappa-frozen and kappa = 0 lifts sharing random numbers."""
    schedule = cfg.schedule()
    refs = _reference_ensembles(cfg, schedule)
    summary = []
    for ts, ref in refs.items():
        for token in cfg.strategy_tokens():
            spec = parse_strategy(token, cfg.params)
            target = restrict(ref, spec)
            seed_tags = ("qe_compare", ts, token)
            reps = {}
            for mode, kap in (("frozen", schedule(ts)), ("qe", 0.0)):
                rng = derived_stream(cfg.seed, *seed_tags)
                init = ref if cfg.init == "warm" else cfg.init
                reps[mode] = lift(target, spec, kap, cfg.dt, cfg.m_inf, init, rng,
                                  n_particles=cfg.n_particles,
                                  plateau_window=cfg.plateau_window or None)
            a, b = reps["frozen"], reps["qe"]
            n = min(len(a.monitor_series), len(b.monitor_series))
            tag = f"t{_tag(ts)}_{_tag(token)}"
            _write_rows(out.path(f"trajectory_{tag}.csv"),
                        ["step", "lift_time", f"{a.monitor_label}_frozen", f"{a.monitor_label}_qe"],
                        [(m, m * cfg.dt, a.monitor_series[m], b.monitor_series[m]) for m in range(n)])
            row = {"t_star": ts, "strategy": token, "tau_reference": stress(ref),
                   "plateau_frozen": a.plateau_value, "plateau_qe": b.plateau_value,
                   "qe_density": ""}
            try:
                dens = qe_solve(target, spec)
                name = f"qe_density_{tag}.csv"
                dens.to_csv(out.path(name))
                row["qe_density"] = name
            except InfeasibleMoments as e:
                logger.info("no quasi-equilibrium density for %s: %s", tag, e)
            summary.append(row)
    _write_rows(out.path("summary.csv"), list(summary[0].keys()), [list(s.values()) for s in summary])
    return {"relaxation": summary}


def run_coarse_experiment(cfg: ExperimentConfig, out: Outputs) -> dict:
    """Micro reference plus a coarse run per ``(strategy, K)`` (fenep_coarse and fene_coarse_*)."""
    schedule = cfg.schedule()
    p = cfg.params
    init = sample_equilibrium(cfg.n_particles, p.b, derived_stream(cfg.seed, "init"), p)
    tokens = cfg.strategy_tokens()
    out_dt = cfg.output_dt or min(cfg.k_steps) * cfg.dt
    every = _steps(out_dt, cfg.dt)
    ref = run_micro_reference(init, schedule, cfg.dt, cfg.t_end, parse_strategy(tokens[-1], p),
                              derived_stream(cfg.seed, "reference"), output_every=every)
    ref.to_csv(out.path("trajectory_reference.csv"))
    summary = {"reference_max_tau": float(np.max(ref.stress))}
    if p.force_model.value == "fenep":
        ode = integrate_fenep(init.mean_square(), schedule, 1e-4, cfg.t_end, p)
        ode.to_csv(out.path("trajectory_ode.csv"))
    runs = []
    for token in tokens:
        spec = parse_strategy(token, p)
        M0 = restrict(init, spec)
        for k in cfg.k_steps:
            cc = CoarseConfig(spec, cfg.dt, k, cfg.m_inf_for(k), cfg.n_particles,
                              cfg.lift_mode, cfg.seed, cfg.init)
            tr = run_coarse(M0, schedule, cc, cfg.t_end, derived_stream(cfg.seed, "coarse", token, k),
                            init=init)
            tr.to_csv(out.path(f"trajectory_{_tag(token)}_K{k}.csv"))
            runs.append({"strategy": token, "k_steps": k, "m_inf": cc.m_inf,
                         "max_tau": float(np.nanmax(tr.stress))})
    summary["coarse"] = runs
    return summary


RUNNERS = {
    "fenep_lift": run_lift_experiment,
    "fene_lift": run_lift_experiment,
    "qe_compare": run_qe_compare,
    "fenep_coarse": run_coarse_experiment,
    "fene_coarse_startup": run_coarse_experiment,
    "fene_coarse_complex": run_coarse_experiment,
}


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> int:
    """Run ``cfg`` and write its outputs; returns a process exit status.

    On failure the manifest carries an ``error`` record and the status is 1.
    """
    root = Path(out_dir or cfg.out_dir)
    root.mkdir(parents=True, exist_ok=True)
    out = Outputs(root)
    manifest = {
        "experiment": cfg.experiment,
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "version": __version__,
        "backend": _kernels.backend_name(),
        "threads": _kernels.get_threads(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "status": "ok",
        "error": None,
    }
    start = time.perf_counter()
    status = 0
    try:
        manifest["summary"] = RUNNERS[cfg.experiment](cfg, out)
    except (FeneClosureError, ValueError, ArithmeticError, OSError) as e:
        status = 1
        manifest["status"] = "error"
        manifest["error"] = {"type": type(e).__name__, "message": str(e),
                             "field": getattr(e, "field", None)}
        # drop partial outputs so every listed file is complete
        for name in out.files:
            (root / name).unlink(missing_ok=True)
        out.files.clear()
    manifest["wall_time_s"] = time.perf_counter() - start
    manifest["files"] = sorted(set(out.files))
    (root / MANIFEST).write_text(json.dumps(_json_safe(manifest), indent=2) + "\n")
    return status
