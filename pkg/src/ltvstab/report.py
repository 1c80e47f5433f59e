"""Analysis orchestration and report emission (JSON, CSV, text table).

A report is a plain dict so that ``emit`` can re-render a saved JSON file.
Every curve that backs a verdict is stored as a ``{"t": [...], "value": [...]}``
series.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .criteria import second_order_verdict, apply_exclusion, exclusion_check, second_order_system, block_verdict
from .rivals import FREEZING, LYAPUNOV_BOGDANOV, RIVALS, run_rivals
from .system import BlockSystem, Envelopes, ModelError
from .verifier import classify_empirical, domination_check, integrate_basis

SCHEMA_VERSION = 1

_RIVAL_ROW = {
    "LozinskiiI": "lozinskii-I",
    "LozinskiiII": "lozinskii-II",
    "LozinskiiIII": "lozinskii-III",
    FREEZING: "freezing",
    LYAPUNOV_BOGDANOV: "lyapunov-bogdanov",
}


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _empirical_section(sys: BlockSystem, horizon: float, tol: float) -> dict:
    traj = integrate_basis(sys, horizon, tol)
    ev = classify_empirical(traj)
    norms = traj.norms()
    init = np.where(norms[0] > 0, norms[0], 1.0)
    worst = (norms / init).max(axis=1)
    d = ev.to_dict()
    d["basis"] = traj.initial_basis
    d["series"] = {"t": traj.times, "value": worst}
    return d


def _domination_section(sys: BlockSystem, env: Envelopes | None, horizon: float) -> dict:
    N = 4 * sys.dim
    x0 = np.ones(N) / np.sqrt(N)
    try:
        res = domination_check(sys, env, x0[: 4 * sys.m], x0[4 * sys.m:], horizon, check_structure=False)
    except Exception as exc:  # reported, not fatal
        return {"ok": False, "message": str(exc)}
    return {"ok": True, "holds": res.holds, "max_violation": res.max_violation,
            "initial": "normalised all-ones vector"}


def analyze_system(sys: BlockSystem, horizon: float, env: Envelopes | None = None,
                   rivals=RIVALS, empirical: bool = True, domination: bool = True,
                   tol: float = 1e-9, notes: list[str] | None = None) -> dict:
    """Criterion, rival methods and empirical checks for one block system."""
    if not horizon > sys.t0:
        raise ModelError("horizon must exceed t0")
    with ThreadPoolExecutor(max_workers=3) as pool:
        crit_f = pool.submit(block_verdict, sys, env, horizon)
        riv_f = pool.submit(run_rivals, sys, horizon, tuple(rivals))
        emp_f = pool.submit(_empirical_section, sys, horizon, tol) if empirical else None
        crit, rivs = crit_f.result(), riv_f.result()
        emp = emp_f.result() if emp_f is not None else None
    report = crit.to_dict()
    report["rivals"] = [r.to_dict() for r in rivs]
    report["empirical"] = emp
    structural = crit.cond_a.passed and crit.cond_b.passed
    report["domination"] = _domination_section(sys, env, horizon) if (domination and structural) else None
    report["notes"] = list(notes or []) + report["notes"]
    report["system"] = sys.describe()
    report["envelopes"] = "user" if env is not None else "derived"
    report["kind"] = "block"
    report["horizon"] = horizon
    report["schema"] = SCHEMA_VERSION
    return _clean(report)


def analyze_second_order(p: str, q: str, r: str, t0: float, horizon: float, rivals=RIVALS,
                         empirical: bool = True, tol: float = 1e-9) -> dict:
    crit = second_order_verdict(p, q, r, horizon, t0)
    excl = exclusion_check(p, q, r, horizon, t0)
    crit = apply_exclusion(crit, excl)
    sys = second_order_system(p, q, r, t0)
    report = crit.to_dict()
    report["rivals"] = [x.to_dict() for x in run_rivals(sys, horizon, tuple(rivals))]
    report["empirical"] = _empirical_section(sys, horizon, tol) if empirical else None
    report["domination"] = None
    if excl.excluded:
        report["notes"].append("for p > 0, r <= 0 and real q the bounded-integral condition is also "
                               "necessary for Lyapunov stability (documentation only, not checked)")
    report["asymptotic_excluded"] = excl.excluded
    report["exclusion_check"] = {
        "applicable": excl.applicable,
        "reason": excl.reason,
        "witness_min_phi": excl.witness_min_phi,
        "witness_nondecreasing": excl.witness_nondecreasing,
    }
    report["system"] = dict(sys.describe(), equation={"p": p, "q": q, "r": r})
    report["envelopes"] = "second-order"
    report["kind"] = "second-order"
    report["horizon"] = horizon
    report["schema"] = SCHEMA_VERSION
    return _clean(report)


# -- emission ---------------------------------------------------------------

def to_json(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=1) + "\n"


def iter_series(report: dict):
    """``(name, t, values)`` for every curve in the report."""
    for key in ("cond1", "cond2"):
        c = report.get(key)
        if c and "series" in c:
            yield key, c["series"]["t"], c["series"]["value"]
    c2p = report.get("cond2prime")
    if c2p and "series" in c2p.get("E", {}):
        yield "cond2prime_intE", c2p["E"]["series"]["t"], c2p["E"]["series"]["value"]
    for extra in report.get("extra") or []:
        if "series" in extra:
            yield f"extra_{extra['name']}", extra["series"]["t"], extra["series"]["value"]
    for rv in report.get("rivals") or []:
        s = rv["curve"].get("series")
        if s:
            yield f"rival_{rv['method']}", s["t"], s["value"]
    emp = report.get("empirical")
    if emp and "series" in emp:
        yield "empirical_worst_ratio", emp["series"]["t"], emp["series"]["value"]


def write_csv(report: dict, out_dir: Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, t, v in iter_series(report):
        path = out_dir / f"{name}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "value"])
            for a, b in zip(t, v):
                w.writerow([repr(float(a)), "" if b is None else repr(float(b))])
        paths.append(path)
    return paths


def _fmt(x) -> str:
    return "n/a" if x is None else f"{x:.6g}"


def to_table(report: dict) -> str:
    sysd = report.get("system", {})
    lines = [f"system: {sysd.get('name') or 'unnamed'} (m={sysd.get('m')}, n={sysd.get('n')}, "
             f"t0={_fmt(sysd.get('t0'))}, horizon={_fmt(report.get('horizon'))})"]
    lines.append(f"verdict: {report['verdict']}")
    for key, label in (("condA", "condition a"), ("condB", "condition b")):
        c = report[key]
        lines.append(f"{label}: {'pass' if c['passed'] else 'FAIL'} "
                     f"(max violation {_fmt(c['max_violation'])}, {c['mode']})")
    for key in ("cond1", "cond2"):
        c = report[key]
        lines.append(f"{key}: sup={_fmt(c['sup'])} final={_fmt(c['final'])} trend={c['trend']}")
    c2p = report.get("cond2prime")
    if c2p:
        lines.append(f"cond2prime: {'satisfied' if c2p['satisfied'] else 'not satisfied'} "
                     f"(int E {c2p['E']['trend']}, J {c2p['J']['trend']})")
    if "asymptotic_excluded" in report:
        lines.append(f"asymptotic stability excluded: {'yes' if report['asymptotic_excluded'] else 'no'} "
                     f"({report['exclusion_check']['reason']})")
    for rv in report.get("rivals") or []:
        row = _RIVAL_ROW.get(rv["method"], rv["method"])
        if rv["method"] == FREEZING:
            lines.append(f"{row}: {rv['label']}")
        else:
            lines.append(f"{row}: {rv['verdict']} ({rv['label']})")
    emp = report.get("empirical")
    if emp:
        lines.append(f"empirical: {emp['classification']} (peak ratio {_fmt(emp['peakNorm'])}, "
                     f"end ratio {_fmt(emp['endRatio'])})")
    dom = report.get("domination")
    if dom:
        if dom.get("ok"):
            lines.append(f"domination: {'holds' if dom['holds'] else 'VIOLATED'} "
                         f"(max relative excess {_fmt(dom['max_violation'])})")
        else:
            lines.append(f"domination: not run ({dom.get('message')})")
    for n in report.get("notes") or []:
        lines.append(f"note: {n}")
    return "\n".join(lines) + "\n"


def emit(report: dict, fmt: str, out_dir: Path | None = None, stem: str = "report") -> list[Path] | str:
    """Write ``fmt`` output under ``out_dir``; without a directory return the text
    (CSV needs a directory)."""
    if fmt == "json":
        text = to_json(report)
    elif fmt == "table":
        text = to_table(report)
    elif fmt == "csv":
        if out_dir is None:
            raise ValueError("csv output needs a directory")
        return write_csv(report, Path(out_dir))
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if out_dir is None:
        return text
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{stem}.{'json' if fmt == 'json' else 'txt'}"
    path.write_text(text)
    return [path]
