"""Command-line entry point: JSON configs in, CSV/JSON results out.

``csitsim run {fig1,fig2,fig4} config.json`` executes one study and writes
its result CSV, the fully resolved config and a run manifest into the
output directory.  ``csitsim run sweep config.json`` repeats a study while
varying one (dotted) config key over a list of values, one subdirectory
per value.  Result CSVs are byte-identical for identical config and seed,
regardless of worker count; the manifest is excluded from that guarantee
because it records wall-clock duration.

Exit status: 0 on success, 2 on configuration errors, 1 on I/O or internal
failures, 3 when ``--strict`` is set and any result point is flagged
(non-converged solver or no feasible blocklength).
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
import time
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__, fbl, scenarios, wet

_CONFIG_TYPES: dict[str, type] = {
    "fig1": scenarios.Fig1Config,
    "fig2": scenarios.Fig2Config,
    "fig4": scenarios.Fig4Config,
}
_NESTED_TYPES: dict[str, type] = {
    "fbl": fbl.FblConfig,
    "circuit": wet.EhCircuitModel,
}
_ENV_OUT_DIR = "CSITSIM_OUT_DIR"
_DEFAULT_OUT_DIR = "csitsim-out"
_INFEASIBLE = "infeasible"


class ConfigError(ValueError):
    """Configuration problem; the message names the offending file/key."""


# ---------------------------------------------------------------------------
# config parsing / serialization


def _tuplify(value: Any) -> Any:
    """JSON arrays (possibly nested) become tuples so configs hash/compare."""
    if isinstance(value, list):
        return tuple(_tuplify(v) for v in value)
    if isinstance(value, dict):
        return {k: _tuplify(v) for k, v in value.items()}
    return value


def _build_config(cls: type, data: dict, prefix: str = ""):
    field_names = {f.name for f in dataclasses.fields(cls)}
    kwargs: dict[str, Any] = {}
    for key, value in data.items():
        where = f"{prefix}{key}"
        if key not in field_names:
            raise ConfigError(f"unknown key {where!r} for {cls.__name__}")
        if key in _NESTED_TYPES:
            if not isinstance(value, dict):
                raise ConfigError(f"{where!r} must be an object")
            kwargs[key] = _build_config(_NESTED_TYPES[key], value, f"{where}.")
        else:
            kwargs[key] = _tuplify(value)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{prefix[:-1] or 'config'}: {exc}") from exc


def parse_config(path: str | os.PathLike, kind: str):
    """Load and validate a JSON scenario config; defaults fill missing keys.

    Unknown keys are rejected with their dotted path; an empty file counts
    as the empty object (all defaults).
    """
    if kind not in _CONFIG_TYPES:
        raise ConfigError(f"unknown scenario kind {kind!r}; expected one of {sorted(_CONFIG_TYPES)}")
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not text.strip():
        data: Any = {}
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top-level JSON value must be an object")
    return _build_config(_CONFIG_TYPES[kind], data)


def serialize_config(config) -> dict:
    """Plain-JSON dict of a config; `parse` of it reconstructs an equal config."""
    return dataclasses.asdict(config)


def config_hash(config) -> str:
    """SHA-256 of the canonical (sorted-key) JSON serialization."""
    canonical = json.dumps(serialize_config(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


@dataclasses.dataclass(frozen=True)
class RunManifest:
    """Provenance record written next to every result set."""

    config_hash: str
    seed: int
    version: str
    duration_s: float
    files: tuple[str, ...]


# ---------------------------------------------------------------------------
# CSV writers (one-line header, %.9g floats, '\n' line endings)


def _fmt(value) -> str:
    if value is None:
        return _INFEASIBLE
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "%.9g" % float(value)


def _write_rows(path: Path, header: str, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if not isinstance(v, str) else v for v in row) + "\n")


def write_fig1_csv(result: scenarios.Fig1Result, path: Path) -> None:
    rows = [(p.scenario, p.num_trained, p.maxmin_mw, p.std_error) for p in result.points]
    _write_rows(path, "scenario,K,maxmin_mw,std_error", rows)


def write_fig2_csv(result: scenarios.Fig2Result, path: Path) -> None:
    num_users = len(result.points[0].balanced_sinr_db) if result.points else 0
    header = "kappa_db,blocklength" + "".join(
        f",balanced_sinr_db_{u + 1}" for u in range(num_users)
    )
    rows = [
        (p.los_factor_db, p.blocklength, *p.balanced_sinr_db) for p in result.points
    ]
    _write_rows(path, header, rows)


def write_fig4_csv(result: scenarios.Fig4Result, path: Path) -> None:
    first = result.schemes[0]
    xs, ys = first.mean_map.xs, first.mean_map.ys
    rows = []
    for iy in range(ys.size):
        for ix in range(xs.size):
            for s in result.schemes:
                rows.append(
                    (
                        xs[ix],
                        ys[iy],
                        s.scheme,
                        s.mean_map.values[iy, ix],
                        s.outage_map.values[iy, ix],
                        s.outage_trials,
                    )
                )
    _write_rows(path, "x_m,y_m,scheme,mean_harvested_dbm,log10_outage,trials", rows)


# ---------------------------------------------------------------------------
# runners


def _run_fig1(config, workers):
    result = scenarios.run_fig1(config, workers=workers)
    flagged = any(p.flagged for p in result.points)
    return result, write_fig1_csv, flagged


def _run_fig2(config, workers):
    result = scenarios.run_fig2(config, workers=workers)
    flagged = any(p.flagged for p in result.points)
    return result, write_fig2_csv, flagged


def _run_fig4(config, workers):
    result = scenarios.run_fig4(config, workers=workers)
    return result, write_fig4_csv, False


_RUNNERS: dict[str, Callable] = {"fig1": _run_fig1, "fig2": _run_fig2, "fig4": _run_fig4}


def _execute(kind: str, config, out_dir: Path, workers: int) -> bool:
    """Run one study and write csv + resolved config + manifest.

    Returns the flagged status.  On any failure every file written so far
    is removed before the error propagates.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    started = time.perf_counter()
    try:
        result, writer, flagged = _RUNNERS[kind](config, workers)
        csv_path = out_dir / f"{kind}.csv"
        written.append(csv_path)  # recorded first so a partial file is removed
        writer(result, csv_path)
        resolved_path = out_dir / "resolved_config.json"
        written.append(resolved_path)
        resolved_path.write_text(
            json.dumps(serialize_config(config), indent=2, sort_keys=True) + "\n"
        )
        manifest = RunManifest(
            config_hash=config_hash(config),
            seed=int(config.seed),
            version=__version__,
            duration_s=round(time.perf_counter() - started, 3),
            files=tuple(p.name for p in written),
        )
        manifest_path = out_dir / "manifest.json"
        written.append(manifest_path)
        manifest_path.write_text(
            json.dumps(dataclasses.asdict(manifest), indent=2, sort_keys=True) + "\n"
        )
    except Exception:
        for p in written:
            try:
                p.unlink()
            except OSError:
                pass
        raise
    for p in written:
        print(f"wrote {p}")
    return flagged


# ---------------------------------------------------------------------------
# sweep


def _set_dotted(data: dict, dotted: str, value) -> dict:
    """Return a copy of `data` with `a.b.c` set to `value`."""
    keys = dotted.split(".")
    updated = dict(data)
    node = updated
    for key in keys[:-1]:
        child = node.get(key)
        if not isinstance(child, dict):
            child = {}
        child = dict(child)
        node[key] = child
        node = child
    node[keys[-1]] = value
    return updated


def _value_slug(value) -> str:
    text = value if isinstance(value, str) else _fmt(value)
    return "".join(c if (c.isalnum() or c in "._+-") else "_" for c in text)


def _run_sweep(config_path: str, out_dir: Path, workers: int, seed_override) -> bool:
    try:
        spec = json.loads(Path(config_path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{config_path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(spec, dict):
        raise ConfigError(f"{config_path}: top-level JSON value must be an object")
    unknown = set(spec) - {"scenario", "key", "values", "config"}
    if unknown:
        raise ConfigError(f"unknown sweep key(s): {sorted(unknown)}")
    for required in ("scenario", "key", "values"):
        if required not in spec:
            raise ConfigError(f"sweep config must define {required!r}")
    kind = spec["scenario"]
    if kind not in _CONFIG_TYPES:
        raise ConfigError(f"unknown scenario kind {kind!r}; expected one of {sorted(_CONFIG_TYPES)}")
    if not isinstance(spec["values"], list) or not spec["values"]:
        raise ConfigError("'values' must be a non-empty list")
    base = spec.get("config", {})
    if not isinstance(base, dict):
        raise ConfigError("'config' must be an object")
    leaf = spec["key"].split(".")[-1]
    flagged = False
    for value in spec["values"]:
        data = _set_dotted(base, spec["key"], value)
        config = _build_config(_CONFIG_TYPES[kind], data)
        if seed_override is not None:
            config = dataclasses.replace(config, seed=seed_override)
        sub_dir = out_dir / f"{leaf}={_value_slug(value)}"
        flagged |= _execute(kind, config, sub_dir, workers)
    return flagged


# ---------------------------------------------------------------------------
# argument parsing / entry point


def _make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csitsim",
        description="Monte Carlo studies of CSIT-limited multi-antenna schemes.",
    )
    parser.add_argument("--version", action="version", version=f"csitsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a study from a JSON config")
    run.add_argument(
        "scenario",
        choices=sorted(_CONFIG_TYPES) + ["sweep"],
        help="study to run, or 'sweep' to vary one key over several values",
    )
    run.add_argument("config", help="path to the JSON config file")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    run.add_argument(
        "--strict",
        action="store_true",
        help="exit with status 3 if any result point is flagged",
    )
    run.add_argument(
        "--out-dir",
        default=None,
        help=f"output directory (default ${_ENV_OUT_DIR} or ./{_DEFAULT_OUT_DIR})",
    )
    return parser


def main(argv=None) -> int:
    args = _make_parser().parse_args(argv)
    out_dir = Path(
        args.out_dir
        if args.out_dir is not None
        else os.environ.get(_ENV_OUT_DIR, _DEFAULT_OUT_DIR)
    )
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        if args.scenario == "sweep":
            flagged = _run_sweep(args.config, out_dir, args.threads, args.seed)
        else:
            config = parse_config(args.config, args.scenario)
            if args.seed is not None:
                config = dataclasses.replace(config, seed=args.seed)
            flagged = _execute(args.scenario, config, out_dir, args.threads)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        target = getattr(exc, "filename", None)
        print(f"error: {exc}" + (f" ({target})" if target else ""), file=sys.stderr)
        return 1
    if flagged:
        print(
            "warning: flagged result points (non-converged solve or infeasible blocklength)",
            file=sys.stderr,
        )
        if args.strict:
            return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
