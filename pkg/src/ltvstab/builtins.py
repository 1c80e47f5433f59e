"""Parameterised built-in systems."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from .system import BlockSystem, ModelError


@dataclass(frozen=True)
class Builtin:
    name: str
    description: str
    t0: float
    defaults: dict
    horizon_span: float
    blocks: dict  # block name -> template, formatted with parenthesised params
    checks: Callable[[dict], list[str]] = field(default=lambda p: [])

    def params(self, overrides: dict | None = None) -> dict:
        p = dict(self.defaults)
        for k, v in (overrides or {}).items():
            if k not in p:
                raise ModelError(f"{self.name}: unknown parameter {k!r} (known: {', '.join(sorted(p))})")
            p[k] = str(v)
        return p

    def build(self, overrides: dict | None = None) -> BlockSystem:
        p = {k: f"({v})" for k, v in self.params(overrides).items()}
        blocks = {k: [[tpl.format(**p)]] for k, tpl in self.blocks.items()}
        return BlockSystem.from_expressions(t0=self.t0, name=self.name, **blocks)

    def notes(self, overrides: dict | None = None) -> list[str]:
        return self.checks(self.params(overrides))

    @property
    def default_horizon(self) -> float:
        return self.t0 + self.horizon_span


def _num(v: str) -> float | None:
    try:
        return float(v)
    except ValueError:
        return None


def _sine_forced_checks(p: dict) -> list[str]:
    l1, l2, m1, m2, c = (_num(p[k]) for k in ("l1", "l2", "mu1", "mu2", "C"))
    if None in (l1, l2, m1, m2, c):
        return ["parameter restrictions not checked (non-numeric parameters)"]
    notes = []
    ok = l1 < 0 and l2 < 0 and l1 - l2 > 0
    if ok:
        margin = l1 + m1 * m2 / (l1 - l2)
        ok = margin <= 0
        notes.append(f"parameter restrictions {'hold' if ok else 'fail'}: "
                     f"l1 + mu1*mu2/(l1 - l2) = {margin:.6g}")
    else:
        notes.append("parameter restrictions fail: need l1, l2 < 0 and l1 > l2")
    notes.append(f"freezing precondition expected to fail: {c >= abs(l1 + l2)} (C >= |l1 + l2|)")
    return notes


def _log_coupled_checks(p: dict) -> list[str]:
    return [
        "B entry mu/(t ln^2 t) is integrable on [e, inf); t0 = e",
        "asymptotic case read as int (eps + nu) bounded above for some eps in (0, 1)",
    ]


BUILTINS: dict[str, Builtin] = {
    "sine-forced": Builtin(
        name="sine-forced",
        description="phi' = (l1 - C sin t) phi + mu1 psi, psi' = mu2 phi + l2 psi",
        t0=0.0,
        defaults={"l1": "-1", "l2": "-1.5", "mu1": "2", "mu2": "0.2", "C": "1"},
        horizon_span=100.0,
        blocks={"A": "{l1} - {C}*sin(t)", "B": "{mu1}", "C": "{mu2}", "D": "{l2}"},
        checks=_sine_forced_checks,
    ),
    "log-coupled": Builtin(
        name="log-coupled",
        description="phi' = nu phi + mu/(t ln^2 t) psi, psi' = mu phi + (nu - 1) psi, t >= e",
        t0=math.e,
        defaults={"nu": "0", "mu": "2"},
        horizon_span=1000.0,
        blocks={"A": "{nu}", "B": "{mu}/(t*ln(t)^2)", "C": "{mu}", "D": "{nu} - 1"},
        checks=_log_coupled_checks,
    ),
    "zero": Builtin(
        name="zero",
        description="phi' = 0, psi' = 0",
        t0=0.0,
        defaults={},
        horizon_span=100.0,
        blocks={"A": "0", "B": "0", "C": "0", "D": "0"},
    ),
}


def get_builtin(name: str) -> Builtin:
    try:
        return BUILTINS[name]
    except KeyError:
        raise ModelError(f"unknown built-in {name!r} (known: {', '.join(sorted(BUILTINS))})") from None
