"""Command-line entry point: ``fene-closure run`` and ``fene-closure presets``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

from . import _kernels
from .config import load_config, validate_config
from .errors import ParseError

logger = logging.getLogger("fene_closure")


def preset_names() -> list[str]:
    root = resources.files("fene_closure") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def preset_text(name: str) -> str:
    return (resources.files("fene_closure") / "presets" / f"{name}.ini").read_text()


def _manifest_to_ini(path: Path) -> str:
    """Rebuild config text from a manifest written by a previous run."""
    cfg = json.loads(path.read_text())["config"]
    p = cfg["params"]
    strategy = cfg["strategy"]
    lines = [
        "[experiment]", f"name = {cfg['experiment']}", f"seed = {cfg['seed']}",
        "[model]", f"b = {p['b']!r}", f"we = {p['we']!r}", f"eps = {p['eps']!r}",
        f"force = {p['force_model']}",
        "[closure]", f"strategy = {strategy}",
    ]
    if strategy != "cascade":
        lines.append("L = " + ",".join(str(v) for v in cfg["L"]))
    lines += [
        "[numerics]", f"n_particles = {cfg['n_particles']}", f"dt = {cfg['dt']!r}",
        "k_steps = " + ",".join(str(v) for v in cfg["k_steps"]),
        f"m_inf_per_k = {cfg['m_inf_per_k']}" if cfg["m_inf_per_k"] else f"m_inf = {cfg['m_inf']}",
        "t_star = " + ",".join(repr(v) for v in cfg["t_star"]), f"t_end = {cfg['t_end']!r}",
        f"init = {cfg['init']}", f"lift_mode = {cfg['lift_mode']}",
        f"plateau_window = {cfg['plateau_window']}", f"snapshots = {cfg['snapshots']}",
        f"output_dt = {cfg['output_dt']!r}",
        "[flow]", f"kappa = {cfg['flow']}",
        "[output]", f"dir = {cfg['out_dir']}", f"bins = {cfg['bins']}",
    ]
    return "\n".join(lines) + "\n"


def _resolve_config(arg: str):
    path = Path(arg)
    if path.is_file():
        if path.suffix == ".json":
            return validate_config(_manifest_to_ini(path), base_dir=path.parent)
        return load_config(path)
    if arg in preset_names():
        return validate_config(preset_text(arg))
    raise ParseError(f"no config file or preset named {arg!r}")


def _default_threads() -> int:
    env = os.environ.get("FENE_CLOSURE_THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ParseError(f"FENE_CLOSURE_THREADS={env!r} is not an integer") from None
    return os.cpu_count() or 1


def _error_record(out: Path | None, exc: Exception):
    record = {"status": "error", "error": {"type": type(exc).__name__, "message": str(exc),
                                           "field": getattr(exc, "field", None),
                                           "line": getattr(exc, "line", None)}}
    print(json.dumps(record), file=sys.stderr)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "manifest.json").write_text(json.dumps(record, indent=2) + "\n")


def cmd_run(args) -> int:
    from .experiments import run_experiment

    out = Path(args.out) if args.out else None
    try:
        cfg = _resolve_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ParseError("seed must be >= 0", field="experiment.seed")
            cfg = replace(cfg, seed=args.seed)
        threads = args.threads if args.threads is not None else _default_threads()
        if threads < 1:
            raise ParseError("threads must be >= 1")
    except (ParseError, OSError) as e:
        _error_record(out, e)
        return 2
    _kernels.set_threads(threads)
    out = out or Path(cfg.out_dir)
    logger.info("running %s into %s (backend %s, %d thread(s))", cfg.experiment, out,
                _kernels.backend_name(), _kernels.get_threads())
    status = run_experiment(cfg, out)
    if status:
        record = json.loads((out / "manifest.json").read_text())
        print(json.dumps({"status": "error", "error": record["error"]}), file=sys.stderr)
    return status


def cmd_presets(args) -> int:
    if args.show:
        if args.show not in preset_names():
            print(f"unknown preset {args.show!r}", file=sys.stderr)
            return 2
        sys.stdout.write(preset_text(args.show))
        return 0
    for name in preset_names():
        first = preset_text(name).splitlines()[0].lstrip("#; ").strip()
        print(f"{name:<36} {first}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fene-closure",
                                     description="Numerical closure experiments for FENE dumbbells.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("--config", required=True,
                     help="config file, preset name, or a manifest.json from an earlier run")
    run.add_argument("--seed", type=int, help="override the configured seed")
    run.add_argument("--threads", type=int,
                     help="worker threads (default: $FENE_CLOSURE_THREADS or CPU count)")
    run.add_argument("--out", help="output directory (default: the configured one)")
    run.set_defaults(func=cmd_run)

    pre = sub.add_parser("presets", help="list the bundled figure presets")
    pre.add_argument("--show", metavar="NAME", help="print one preset")
    pre.set_defaults(func=cmd_presets)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
