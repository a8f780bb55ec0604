"""Command line front end.

``impulsekit run <config.json>`` executes one catalog scenario and
writes its artifacts (convergence tables, state dumps, summary, and a
hash manifest) into a per-run subdirectory.  ``list`` prints the
catalog, ``validate`` checks a config without running anything.

Exit codes: 0 success, 2 config parse failure, 3 validation failure,
4 numerical guard tripped during the run.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .errors import ConfigError, ImpulseKitError, NumericalGuardError
from .geometry import save_wavefunction_csv, save_wavefunction_npz
from .scenarios import (
    SCHEMA_VERSION,
    ScenarioResult,
    catalog,
    config_from_mapping,
    run_scenario,
)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_GUARD = 4

OUTPUT_ROOT_ENV = "IMPULSEKIT_OUTPUT_ROOT"
THREADS_ENV = "IMPULSEKIT_THREADS"

__all__ = ["main", "run_command", "validate_command", "list_command"]


class _ParseFailure(Exception):
    pass


def _load_config(path: str) -> dict:
    """Read and structurally parse a config file.

    Anything that keeps the file from being read as a schema-1 mapping
    is a parse failure; semantic problems are left to validation.
    """
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise _ParseFailure(f"cannot read config: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise _ParseFailure(f"config is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise _ParseFailure("config root must be an object")
    if data.get("schema") != SCHEMA_VERSION:
        raise _ParseFailure(
            f"config schema must be {SCHEMA_VERSION}, got {data.get('schema')!r}"
        )
    if not isinstance(data.get("scenario"), str):
        raise _ParseFailure("config must name a scenario string")
    return data


def _plain(obj):
    """Recursively convert to JSON-safe builtins; non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        val = float(obj)
        return val if np.isfinite(val) else None
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


def _write_json(path: str, payload) -> None:
    with open(path, "w") as fh:
        json.dump(_plain(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _config_digest(describe: dict) -> str:
    canon = json.dumps(_plain(describe), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:8]


def _sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def _emit_artifacts(result: ScenarioResult, outdir: str, runtime: float) -> list:
    """Write everything a run produced; the manifest goes last."""
    os.makedirs(outdir, exist_ok=True)
    written = []

    def emit(name: str, writer) -> None:
        path = os.path.join(outdir, name)
        writer(path)
        written.append(name)

    emit("config.json", lambda p: _write_json(p, result.summary["config"]))
    for table in result.tables:
        emit(f"{table.scenario}_scan.csv", table.write_csv)
        emit(f"{table.scenario}_scan.json", table.write_json)
    for label, psi in result.states:
        if psi.grid.dim == 1:
            emit(f"state_{label}.csv", lambda p, s=psi: save_wavefunction_csv(s, p))
        else:
            emit(f"state_{label}.npz", lambda p, s=psi: save_wavefunction_npz(s, p))
    summary = dict(result.summary)
    summary["runtime_s"] = runtime
    summary["version"] = __version__
    emit("summary.json", lambda p: _write_json(p, summary))

    manifest = {
        "schema": SCHEMA_VERSION,
        "scenario": result.name,
        "version": __version__,
        "files": [
            {
                "path": name,
                "sha256": _sha256_file(os.path.join(outdir, name)),
                "bytes": os.path.getsize(os.path.join(outdir, name)),
            }
            for name in written
        ],
    }
    _write_json(os.path.join(outdir, "manifest.json"), manifest)
    written.append("manifest.json")
    return written


def _resolve_workers() -> int | None:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return None
    try:
        workers = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if workers <= 0:
        raise ConfigError(f"{THREADS_ENV} must be positive")
    return workers


def _resolve_outdir(data: dict, describe: dict) -> str:
    root = data.get("output_dir") or os.environ.get(OUTPUT_ROOT_ENV) or "impulsekit-runs"
    if not isinstance(root, str):
        raise ConfigError("output_dir must be a path string")
    sub = f"{describe['scenario']}-{_config_digest(describe)}"
    return os.path.join(root, sub)


def run_command(config_path: str) -> int:
    try:
        data = _load_config(config_path)
    except _ParseFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        cfg = config_from_mapping(data)
        workers = _resolve_workers()
        outdir = _resolve_outdir(data, cfg.describe())
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    t0 = time.perf_counter()
    try:
        result = run_scenario(cfg, workers=workers)
    except NumericalGuardError as exc:
        print(f"numerical guard: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except ImpulseKitError as exc:
        # anything else the library rejects is a bad configuration
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    runtime = time.perf_counter() - t0

    files = _emit_artifacts(result, outdir, runtime)
    print(f"{result.name}: {runtime:.1f}s")
    for key, entry in result.summary.get("checks", {}).items():
        tag = "pass" if entry.get("passed") else "FAIL"
        print(f"  [{tag}] {key} = {entry.get('value')}")
    print(f"wrote {len(files)} files to {outdir}")
    return EXIT_OK


def validate_command(config_path: str) -> int:
    try:
        data = _load_config(config_path)
    except _ParseFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        cfg = config_from_mapping(data)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    print(f"ok: {cfg.scenario} on {'x'.join(str(n) for n in cfg.npoints)} grid")
    return EXIT_OK


def list_command() -> int:
    for name, blurb in catalog():
        print(f"{name:18s} {blurb}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="impulsekit",
        description="design and verify impulsive control potentials",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute a scenario config")
    p_run.add_argument("config", help="path to a schema-1 JSON config")
    p_val = sub.add_parser("validate", help="check a config without running")
    p_val.add_argument("config", help="path to a schema-1 JSON config")
    sub.add_parser("list", help="print the scenario catalog")

    args = parser.parse_args(argv)
    if args.command == "run":
        return run_command(args.config)
    if args.command == "validate":
        return validate_command(args.config)
    return list_command()


if __name__ == "__main__":
    sys.exit(main())
