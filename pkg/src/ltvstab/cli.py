"""Command line interface.

    ltvstab analyze CONFIG            block system from an INI file
    ltvstab second-order CONFIG       (p phi')' + q phi' + r phi = 0
    ltvstab example NAME [--param k=v ...]
    ltvstab emit REPORT.json --format json|csv|table
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from pathlib import Path

from .builtins import BUILTINS, get_builtin
from .expr import ExprError
from .report import analyze_second_order, analyze_system, emit
from .rivals import RIVALS
from .system import BlockSystem, ModelError, user_envelopes

FORMATS = ("json", "csv", "table")


class ConfigError(ValueError):
    pass


def _read_config(path: str) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.optionxform = str  # keep A/B/C/D case
    if not cp.read(path):
        raise ConfigError(f"cannot read config {path!r}")
    return cp


def _float(section, key, default=None) -> float | None:
    if section is None or key not in section:
        return default
    try:
        return float(section[key])
    except ValueError:
        raise ConfigError(f"[{section.name}] {key} must be a number, got {section[key]!r}") from None


def _list(value: str) -> list[str]:
    return [v.strip() for v in value.replace(";", ",").split(",") if v.strip()]


def _constants(cp) -> dict | None:
    if not cp.has_section("constants"):
        return None
    return {k: _float(cp["constants"], k) for k in cp["constants"]}


def _run_options(cp, default_horizon: float) -> dict:
    run = cp["run"] if cp.has_section("run") else None
    horizon = _float(run, "horizon", default_horizon)
    opts = {
        "horizon": horizon,
        "tol": _float(run, "tol", 1e-9),
        "rivals": tuple(_list(run["rivals"])) if run is not None and "rivals" in run else RIVALS,
        "empirical": run.getboolean("empirical", True) if run is not None else True,
        "domination": run.getboolean("domination", True) if run is not None else True,
    }
    bad = [r for r in opts["rivals"] if r not in RIVALS]
    if bad:
        raise ConfigError(f"unknown rival methods {bad}; choose from {', '.join(RIVALS)}")
    return opts


def _output_options(cp, args) -> dict:
    out = cp["output"] if cp is not None and cp.has_section("output") else None
    out_dir = args.out or (out.get("dir") if out is not None else None)
    formats = args.format or (_list(out["formats"]) if out is not None and "formats" in out else ["table"])
    figures = (out.getboolean("figures", True) if out is not None else True) and not args.no_figures
    for f in formats:
        if f not in FORMATS:
            raise ConfigError(f"unknown output format {f!r}")
    return {"dir": out_dir, "formats": formats, "figures": figures}


def system_from_config(cp) -> tuple[BlockSystem, float, list[str]]:
    if not cp.has_section("system"):
        raise ConfigError("config needs a [system] section")
    s = cp["system"]
    if "builtin" in s:
        b = get_builtin(s["builtin"])
        params = dict(cp["params"]) if cp.has_section("params") else {}
        return b.build(params), b.default_horizon, b.notes(params)
    t0 = _float(s, "t0", 0.0)
    consts = _constants(cp)
    blocks = {}
    for key in ("A", "B", "C", "D"):
        blocks[key] = s.get(key)
    if blocks["A"] is None or blocks["D"] is None:
        raise ConfigError("[system] needs at least A and D")
    sys_ = BlockSystem.from_expressions(t0=t0, name=s.get("name", Path("config").stem), constants=consts, **blocks)
    for key, dim in (("m", sys_.m), ("n", sys_.n)):
        if key in s and int(s[key]) != dim:
            raise ConfigError(f"[system] {key} = {s[key]} but the blocks give {dim}")
    return sys_, t0 + 100.0, []


def _finish(report: dict, output: dict, stdout) -> None:
    out_dir = Path(output["dir"]) if output["dir"] else None
    for fmt in output["formats"]:
        if out_dir is None and fmt == "csv":
            raise ConfigError("csv output needs an output directory (--out)")
        res = emit(report, fmt, out_dir)
        if isinstance(res, str):
            stdout.write(res)
    if out_dir is not None and output["figures"]:
        from .plotting import render_figures
        render_figures(report, out_dir)
    if out_dir is not None and "table" in output["formats"]:
        stdout.write((out_dir / "report.txt").read_text())


def cmd_analyze(args, stdout) -> int:
    cp = _read_config(args.config)
    sys_, default_h, notes = system_from_config(cp)
    opts = _run_options(cp, default_h)
    env = None
    if cp.has_section("envelopes"):
        e = cp["envelopes"]
        if "a_star" in e or "d_star" in e:
            if not ("a_star" in e and "d_star" in e):
                raise ConfigError("[envelopes] needs both a_star and d_star")
            env = user_envelopes(e["a_star"], e["d_star"], sys_.t0, _constants(cp))
    report = analyze_system(sys_, opts["horizon"], env, opts["rivals"], opts["empirical"],
                            opts["domination"], opts["tol"], notes)
    _finish(report, _output_options(cp, args), stdout)
    return 0


def cmd_second_order(args, stdout) -> int:
    cp = _read_config(args.config)
    sec = "equation" if cp.has_section("equation") else "system"
    if not cp.has_section(sec):
        raise ConfigError("config needs an [equation] section with p, q, r")
    e = cp[sec]
    missing = [k for k in ("p", "q", "r") if k not in e]
    if missing:
        raise ConfigError(f"[{sec}] missing {', '.join(missing)}")
    t0 = _float(e, "t0", 0.0)
    opts = _run_options(cp, t0 + 100.0)
    report = analyze_second_order(e["p"], e["q"], e["r"], t0, opts["horizon"], opts["rivals"],
                                  opts["empirical"], opts["tol"])
    _finish(report, _output_options(cp, args), stdout)
    return 0


def cmd_example(args, stdout) -> int:
    b = get_builtin(args.name)
    params = {}
    for item in args.param or []:
        if "=" not in item:
            raise ConfigError(f"--param expects k=v, got {item!r}")
        k, v = item.split("=", 1)
        params[k.strip()] = v.strip()
    sys_ = b.build(params)
    horizon = args.horizon if args.horizon is not None else b.default_horizon
    report = analyze_system(sys_, horizon, None, RIVALS, not args.no_empirical, True, 1e-9, b.notes(params))
    _finish(report, _output_options(None, args), stdout)
    return 0


def cmd_emit(args, stdout) -> int:
    try:
        report = json.loads(Path(args.report).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load report: {exc}") from None
    out = Path(args.out) if args.out else None
    res = emit(report, args.format[0] if args.format else "table", out)
    if isinstance(res, str):
        stdout.write(res)
    else:
        for p in res:
            stdout.write(f"{p}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ltvstab", description="Stability analysis of two-block "
                                 "linear time-varying systems with quaternion coefficients.")
    sub = ap.add_subparsers(dest="command", required=True)

    def output_args(p):
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", action="append", choices=FORMATS,
                       help="output format (repeatable; default from config or 'table')")
        p.add_argument("--no-figures", action="store_true", help="skip PNG figures")

    p = sub.add_parser("analyze", help="analyse a block system described by an INI config")
    p.add_argument("config")
    output_args(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("second-order", help="analyse (p phi')' + q phi' + r phi = 0")
    p.add_argument("config")
    output_args(p)
    p.set_defaults(func=cmd_second_order)

    p = sub.add_parser("example", help=f"run a built-in system ({', '.join(sorted(BUILTINS))})")
    p.add_argument("name")
    p.add_argument("--param", action="append", metavar="K=V")
    p.add_argument("--horizon", type=float)
    p.add_argument("--no-empirical", action="store_true")
    output_args(p)
    p.set_defaults(func=cmd_example)

    p = sub.add_parser("emit", help="re-render a saved JSON report")
    p.add_argument("report")
    p.add_argument("--format", action="append", choices=FORMATS)
    p.add_argument("--out", help="output directory (required for csv)")
    p.set_defaults(func=cmd_emit)
    return ap


def main(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, stdout)
    except (ConfigError, ModelError, ExprError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
