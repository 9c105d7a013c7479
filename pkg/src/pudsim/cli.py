"""Command-line front end.

Every subcommand reads the same YAML/JSON config (all sections optional),
applies flag overrides, and writes its artifacts plus ``manifest.json``
into ``--out``. Artifacts are rendered in memory first so a failing run
leaves nothing behind.

Exit codes: 0 success, 1 validation error, 2 runtime error. Errors are
reported on stderr as a single JSON object.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any, Callable

import yaml

from . import casestudies as cs
from . import harness
from .bank import Bank, CommandKind, act, apa, pre, rd, ref, wr
from .profile import DeviceProfile, get_profile, profile_from_dict

SUBCOMMANDS = ("simulate", "sweep", "characterize", "bench", "destroy", "discover")


class ValidationError(Exception):
    pass


def tool_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "0+unknown"


def load_config(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"config file not found: {path}")
    try:
        text = p.read_text()
        data = json.loads(text) if p.suffix == ".json" else yaml.safe_load(text)
    except (OSError, ValueError, yaml.YAMLError) as e:
        raise ValidationError(f"cannot parse {path}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ValidationError("config must be a mapping")
    unknown = set(data) - {"profile", "seed", "format", "simulate", "experiment",
                           "characterize", "bench", "destroy", "discover"}
    if unknown:
        raise ValidationError(f"unknown config sections: {sorted(unknown)}")
    return data


def _profile(cfg: dict[str, Any]) -> DeviceProfile:
    prof = cfg.get("profile", "mfrH-512")
    try:
        if isinstance(prof, dict):
            return profile_from_dict(prof)
        return get_profile(prof)
    except (KeyError, TypeError, ValueError) as e:
        raise ValidationError(str(e)) from e


def _canonical(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)


def _section(cfg: dict[str, Any], name: str) -> dict[str, Any]:
    sec = cfg.get(name) or {}
    if not isinstance(sec, dict):
        raise ValidationError(f"section {name!r} must be a mapping")
    return dict(sec)


# ------------------------------------------------------------------ subcommands

_COMMANDS = {"ACT": CommandKind.ACT, "PRE": CommandKind.PRE, "WR": CommandKind.WR,
             "RD": CommandKind.RD, "REF": CommandKind.REF}


def _parse_sequence(items: list[dict[str, Any]], prof: DeviceProfile, columns: int):
    seq = []
    for it in items:
        kind = str(it.get("cmd", "")).upper()
        if kind not in _COMMANDS:
            raise ValidationError(f"unknown command {it.get('cmd')!r}")
        delay = float(it.get("delay", 0.0))
        if kind == "ACT":
            seq.append(act(int(it["row"]), delay))
        elif kind == "PRE":
            seq.append(pre(delay))
        elif kind == "WR":
            bits = it.get("data", 1)
            data = [int(bits)] * columns if isinstance(bits, int) else [int(b) for b in bits]
            seq.append(wr(data, delay))
        elif kind == "RD":
            seq.append(rd(delay))
        else:
            seq.append(ref(delay))
    return seq


def cmd_simulate(cfg, args, prof) -> tuple[dict[str, str], dict[str, Any]]:
    sec = _section(cfg, "simulate")
    seed = args.seed
    columns = int(sec.get("columns", min(prof.columns, 64)))
    if args.apa:
        rf, rs, t1, t2 = args.apa
        sec["apa"] = {"r_first": int(rf), "r_second": int(rs), "t1": t1, "t2": t2}
    if "sequence" in sec:
        seq = _parse_sequence(sec["sequence"], prof, columns)
    else:
        a = sec.get("apa", {"r_first": 0, "r_second": 7, "t1": 3.0, "t2": 3.0})
        seq = apa(int(a["r_first"]), int(a["r_second"]), float(a["t1"]), float(a["t2"]), prof)
        seq += [wr([1] * columns, prof.tRAS), pre(prof.tRP)]
    bank = Bank(prof, seed=seed, pattern=sec.get("pattern", "all0"), columns=columns,
                temperature=float(sec.get("temperature", 50.0)), vpp=float(sec.get("vpp", 2.5)))
    res = bank.execute(seq)
    events = [e.to_dict() for e in res.events]
    for e in events:
        print(json.dumps(e, sort_keys=True))
    return {"trace.json": json.dumps(events, indent=1, sort_keys=True) + "\n"}, {"simulate": sec}


def _experiment(sec: dict[str, Any], prof_name: str, seed: int) -> harness.ExperimentConfig:
    sec = dict(sec)
    sec.setdefault("profile", prof_name)
    sec["seed"] = seed
    try:
        cfg = harness.ExperimentConfig.from_dict(sec)
    except (TypeError, ValueError) as e:
        raise ValidationError(str(e)) from e
    return cfg


def _validate(exp: harness.ExperimentConfig, prof: DeviceProfile) -> DeviceProfile:
    try:
        return exp.validate(prof if exp.profile == prof.name else None)
    except (KeyError, ValueError) as e:
        raise ValidationError(str(e)) from e


def cmd_sweep(cfg, args, prof):
    exp = _experiment(_section(cfg, "experiment"), prof.name, args.seed)
    eprof = _validate(exp, prof)
    rep = harness.run_experiment(exp, eprof, jobs=args.jobs)
    files = harness.render([rep], args.format, stem=exp.operation)
    return files, {"experiment": exp.to_dict()}


# grids for the full characterization; each entry overrides the experiment defaults
CHARACTERIZE_DEFAULT = {
    "activation": {"operation": "activation", "t1": [1.5, 3.0, 6.0], "t2": [1.5, 3.0, 6.0],
                   "n": [2, 4, 8, 16, 32]},
    "maj": {"operation": "maj", "t1": [1.5, 3.0], "t2": [1.5, 3.0], "n": [4, 8, 16, 32]},
    "mrc": {"operation": "mrc", "t1": [1.5, 3.0, 36.0], "t2": [3.0, 6.0], "n": [2, 4, 8, 16, 32]},
}


def cmd_characterize(cfg, args, prof):
    sec = _section(cfg, "characterize")
    common = {k: v for k, v in sec.items() if k not in CHARACTERIZE_DEFAULT}
    exps = {}
    for op, grid in CHARACTERIZE_DEFAULT.items():
        grid_cfg = dict(grid)
        grid_cfg.update(common)
        grid_cfg.update(sec.get(op) or {})
        grid_cfg["operation"] = op
        exps[op] = _experiment(grid_cfg, prof.name, args.seed)
    profs = {op: _validate(e, prof) for op, e in exps.items()}
    files: dict[str, str] = {}
    best = []
    for op, exp in exps.items():
        rep = harness.run_experiment(exp, profs[op], jobs=args.jobs)
        files.update(harness.render([rep], args.format, stem=op))
        ref_knobs = {"pattern": exp.patterns[0], "temperature": float(min(exp.temperatures)),
                     "vpp": float(max(exp.vpps))}
        for x, n in sorted({(s.params[0], s.params[1]) for s in rep.summaries}):
            t1, t2 = harness.best_timing(rep, x=x, n=n, **ref_knobs)
            best.append({"operation": op, "x": x, "n": n, "t1": t1, "t2": t2,
                         "mean": round(rep.mean(x=x, n=n, t1=t1, t2=t2, **ref_knobs), 6)})
    files["best_timing.json"] = json.dumps(best, indent=1, sort_keys=True) + "\n"
    return files, {"characterize": {op: e.to_dict() for op, e in exps.items()}}


def cmd_bench(cfg, args, prof):
    sec = _section(cfg, "bench")
    rates = None
    if "rates_csv" in sec:
        try:
            rates = cs.rates_from_csv(sec["rates_csv"])
        except (OSError, KeyError, ValueError) as e:
            raise ValidationError(f"rates_csv: {e}") from e
    elif "rates" in sec:
        rates = {tuple(int(v) for v in k.split(",")): float(r) for k, r in sec["rates"].items()}
    try:
        cost = cs.CostModel.default(prof, rates)
        kernels = [k.upper() for k in sec.get("kernels", cs.KERNELS)]
        if any(k not in cs.KERNELS for k in kernels):
            raise ValueError(f"kernels must come from {cs.KERNELS}")
        width = int(sec.get("width", 32))
        x_sets = [tuple(x) for x in sec.get("x_sets", [[3], [3, 5], [3, 5, 7], [3, 5, 7, 9]])]
        mode = sec.get("mode", "usable")
        if mode not in ("usable", "retry"):
            raise ValueError("mode must be 'usable' or 'retry'")
    except (KeyError, TypeError, ValueError) as e:
        raise ValidationError(str(e)) from e
    rows = cs.speedup_table(cost, width, kernels, x_sets, mode)
    ext = args.format
    files = {f"speedup.{ext}": cs.table_text(rows, ext)}
    used = {"width": width, "kernels": kernels, "x_sets": [list(x) for x in x_sets], "mode": mode,
            "rates": {f"{x},{n}": v for (x, n), v in sorted(cost.usable.items())}}
    return files, {"bench": used}


def cmd_destroy(cfg, args, prof):
    rows = cs.destruction_table(prof)
    return {f"destruction.{args.format}": cs.table_text(rows, args.format)}, {"destroy": {}}


def cmd_discover(cfg, args, prof):
    sec = _section(cfg, "discover")
    columns = int(sec.get("columns", 64))
    threshold = float(sec.get("threshold", 0.9))
    if not 0 < threshold <= 1:
        raise ValidationError("threshold must lie in (0, 1]")
    bank = Bank(prof, seed=args.seed, columns=columns)
    ranges = harness.discover_subarrays(bank, threshold)
    rows = [{"start": a, "end": b, "rows": b - a + 1} for a, b in ranges]
    return {f"subarrays.{args.format}": cs.table_text(rows, args.format)}, \
        {"discover": {"columns": columns, "threshold": threshold}}


HANDLERS: dict[str, Callable] = {
    "simulate": cmd_simulate, "sweep": cmd_sweep, "characterize": cmd_characterize,
    "bench": cmd_bench, "destroy": cmd_destroy, "discover": cmd_discover,
}


# ------------------------------------------------------------------ driver

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pudsim", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML or JSON config file")
        p.add_argument("--out", default="pudsim-out", help="output directory")
        p.add_argument("--seed", type=int, help="master seed (64-bit)")
        p.add_argument("--format", choices=("csv", "json"), help="table format")
        p.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")
        p.add_argument("--profile", help="device profile name")
        if name == "simulate":
            p.add_argument("--apa", nargs=4, type=float, metavar=("R_F", "R_S", "T1", "T2"))
    return ap


def _error(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": {"type": kind, "message": message, "exit_code": code}},
                     sort_keys=True), file=sys.stderr)
    return code


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.profile:
            cfg["profile"] = args.profile
        seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        if not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        args.seed = seed
        args.format = args.format or cfg.get("format", "csv")
        if args.format not in ("csv", "json"):
            raise ValidationError("format must be 'csv' or 'json'")
        args.jobs = args.jobs or os.cpu_count() or 1
        if args.jobs < 1:
            raise ValidationError("--jobs must be >= 1")
        prof = _profile(cfg)
    except ValidationError as e:
        return _error("validation", str(e), 1)

    try:
        files, resolved = HANDLERS[args.command](cfg, args, prof)
    except ValidationError as e:
        return _error("validation", str(e), 1)
    except Exception as e:  # noqa: BLE001 - surfaced as a runtime error record
        return _error("runtime", f"{type(e).__name__}: {e}", 2)

    resolved = {"command": args.command, "profile": prof.to_dict(), "seed": args.seed,
                "format": args.format, **resolved}
    manifest = {
        "command": args.command,
        "config_hash": hashlib.sha256(_canonical(resolved).encode()).hexdigest(),
        "seed": args.seed,
        "tool_version": tool_version(),
        "config": json.loads(_canonical(resolved)),
        "files": {n: hashlib.sha256(t.encode()).hexdigest() for n, t in sorted(files.items())},
    }
    files["manifest.json"] = json.dumps(manifest, indent=1, sort_keys=True) + "\n"
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        for name, text in sorted(files.items()):
            (out / name).write_text(text)
    except OSError as e:
        return _error("runtime", f"cannot write outputs: {e}", 2)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
