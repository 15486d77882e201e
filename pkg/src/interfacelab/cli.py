"""Command line entry point: ``interfacelab run|list|check-config``."""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import os
import platform
import shutil
import sys
import tempfile
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .config import SCHEMA_VERSION, SCENARIOS, ConfigError, RunConfig, load_config
from .scenarios import REGISTRY, ScenarioResult, run as run_scenario

OUTPUT_ENV = "INTERFACELAB_OUTPUT_ROOT"
DEFAULT_ROOT = "runs"
EXIT_OK, EXIT_CHECKS_FAILED, EXIT_BAD_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        # JSON has no inf/nan literals
        return v if np.isfinite(v) else str(v)
    return obj


def default_config_path(name: str) -> Path:
    return Path(str(resources.files("interfacelab") / "configs" / f"{name}.yaml"))


def resolve_config(arg: str) -> RunConfig:
    """A path to a YAML file, or the name of a built-in scenario (uses its default config)."""
    p = Path(arg)
    if not p.exists() and arg in SCENARIOS:
        p = default_config_path(arg)
    if not p.exists():
        raise ConfigError(f"config file not found: {arg}")
    return load_config(p)


def output_root(cfg: RunConfig) -> Path:
    env = os.environ.get(OUTPUT_ENV)
    if env:
        return Path(env)
    return Path(cfg.section("output").get("dir", DEFAULT_ROOT))


def write_table(path: Path, rows: list, config_hash: str) -> None:
    cols = []
    for r in rows:
        cols.extend(k for k in r if k not in cols)
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={config_hash}\n")
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(v) for k, v in r.items()})


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple, np.ndarray)):
        return json.dumps(_plain(v))
    return v


def write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(_plain(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def emit(cfg: RunConfig, result: ScenarioResult, root: Path, elapsed: float) -> Path:
    """Write all artifacts into a temp dir beside the target and move it into place."""
    h = cfg.hash
    target = root / f"{cfg.scenario}-{h[:8]}"
    root.mkdir(parents=True, exist_ok=True)
    fmt = cfg.section("output").get("format", "csv")
    tmp = Path(tempfile.mkdtemp(prefix=f".{cfg.scenario}-", dir=root))
    try:
        files = []
        for name, rows in result.tables.items():
            if fmt == "csv":
                write_table(tmp / f"{name}.csv", rows, h)
                files.append(f"{name}.csv")
            else:
                write_json(tmp / f"{name}.json", {"config_hash": h, "schema_version": SCHEMA_VERSION, "rows": rows})
                files.append(f"{name}.json")
        report = {
            "schema_version": SCHEMA_VERSION,
            "config_hash": h,
            "scenario": cfg.scenario,
            "seed": cfg.seed,
            "checks": result.checks,
            "passed": result.passed,
            "results": result.report,
            "files": sorted(files),
        }
        write_json(tmp / "report.json", report)
        # workers lives in metadata.json only, so reruns with other counts compare equal
        data = {k: v for k, v in cfg.data.items() if k != "workers"}
        write_json(tmp / "config.json", {"config_hash": h, "config": data})
        write_json(
            tmp / "metadata.json",
            {
                "config_hash": h,
                "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
                "elapsed_seconds": elapsed,
                "workers": cfg.workers,
                "source": cfg.source,
                "version": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
            },
        )
        if target.exists():
            shutil.rmtree(target)
        os.replace(tmp, target)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return target


def summary_text(cfg: RunConfig, result: ScenarioResult, target: Path | None) -> str:
    lines = [f"scenario {cfg.scenario}  seed {cfg.seed}  config {cfg.hash[:12]}"]
    lines += [f"  {s}" for s in result.summary]
    for name, ok in result.checks.items():
        lines.append(f"  [{'PASS' if ok else 'FAIL'}] {name}")
    n_ok = sum(bool(v) for v in result.checks.values())
    lines.append(f"{n_ok}/{len(result.checks)} checks passed")
    if target is not None:
        lines.append(f"artifacts: {target}")
    return "\n".join(lines)


def cmd_run(args) -> int:
    try:
        cfg = resolve_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    if args.workers is not None:
        if args.workers < 1:
            print("config error: --workers must be >= 1", file=sys.stderr)
            return EXIT_BAD_CONFIG
        cfg.data["workers"] = args.workers
    t0 = time.perf_counter()
    try:
        result = run_scenario(cfg)
    except Exception as exc:
        print(f"{cfg.scenario}: {type(exc).__name__} in {exc.__class__.__module__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    target = emit(cfg, result, output_root(cfg), time.perf_counter() - t0)
    print(summary_text(cfg, result, target))
    return EXIT_OK if result.passed else EXIT_CHECKS_FAILED


def cmd_list(args) -> int:
    width = max(len(n) for n in SCENARIOS)
    for name in SCENARIOS:
        print(f"{name:<{width}}  {REGISTRY[name][1]}")
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        cfg = resolve_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    print(f"ok: scenario {cfg.scenario}, config hash {cfg.hash}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="interfacelab", description="Lattice interface scaling-limit experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario from a YAML config (or a built-in scenario name)")
    r.add_argument("config")
    r.add_argument("--workers", type=int, default=None, help="replica worker threads (output does not depend on it)")
    r.set_defaults(func=cmd_run)
    ls = sub.add_parser("list", help="list built-in scenarios")
    ls.set_defaults(func=cmd_list)
    c = sub.add_parser("check-config", help="validate a config without running it")
    c.add_argument("config")
    c.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
