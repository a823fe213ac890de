"""Command-line runner for the experiment presets.

Parameter precedence, lowest first: preset defaults, the ``--config`` JSON
document (either a flat mapping or a previous run's metadata with a
``params`` key), ``--override key=value`` pairs, then ``--seed``.

Exit codes: 0 ok, 1 experiment error, 2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__, gaw
from .errors import ConfigError, GreeklabError
from .experiments import EXPERIMENTS, resolve_params, run

EXIT_OK, EXIT_EXPERIMENT, EXIT_CONFIG = 0, 1, 2


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_overrides(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        out[k.strip().replace("-", "_")] = _parse_value(v)
    return out


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return doc.get("params", doc)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, np.generic):
        return x.item()
    return x


def write_csv(path: Path, rows: list):
    cols = []
    for r in rows:
        cols += [c for c in r if c not in cols]
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for r in rows:
            w.writerow({k: _jsonable(v) for k, v in r.items()})


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="greeklab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON parameter document")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory (default results/<command>)")
        sp.add_argument("--override", action="append", metavar="KEY=VALUE", default=[])
        sp.add_argument("--memory-cap", type=int, help="largest emulated tensor, in entries")
        sp.add_argument("--allow-large-tensor", action="store_true")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    out = Path(args.out or Path("results") / args.command)
    try:
        overrides = parse_overrides(args.override)
        if args.seed is not None:
            overrides["seed"] = args.seed
        schema = EXPERIMENTS[args.command][1]
        if args.allow_large_tensor and "allow_large_tensor" in schema:
            overrides["allow_large_tensor"] = True
        params = resolve_params(args.command, load_config(args.config), overrides)
    except ConfigError as exc:
        print(json.dumps({"error": "config", "message": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    if args.memory_cap is not None:
        gaw.MEMORY_CAP_ENTRIES = int(args.memory_cap)
    out.mkdir(parents=True, exist_ok=True)
    meta = {"command": args.command, "params": params, "version": __version__,
            "numpy": np.__version__, "scipy": scipy.__version__, "python": platform.python_version(),
            "memory_cap": gaw.MEMORY_CAP_ENTRIES}
    t0 = time.perf_counter()
    try:
        res = run(args.command, params)
    except (GreeklabError, ValueError, MemoryError) as exc:
        kind = getattr(exc, "kind", type(exc).__name__)
        meta.update(status="error", error={"kind": kind, "type": type(exc).__name__, "message": str(exc)},
                    seconds=round(time.perf_counter() - t0, 3))
        (out / "metadata.json").write_text(json.dumps(_jsonable(meta), indent=2), encoding="utf-8")
        print(json.dumps(meta["error"]), file=sys.stderr)
        return EXIT_CONFIG if isinstance(exc, ConfigError) else EXIT_EXPERIMENT
    files = []
    for name, rows in res.tables.items():
        write_csv(out / f"{name}.csv", rows)
        files.append(f"{name}.csv")
    meta.update(status="ok", summary=res.summary, files=files, seconds=round(time.perf_counter() - t0, 3))
    (out / "metadata.json").write_text(json.dumps(_jsonable(meta), indent=2), encoding="utf-8")
    print(json.dumps(_jsonable(res.summary)))
    if args.command == "verify" and not res.summary.get("passed", False):
        return EXIT_EXPERIMENT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
