"""Verification records and their text / machine serialisations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable


@dataclass(frozen=True)
class Check:
    id: str
    samples: int
    residual: float
    tol: float
    asserted: bool = True
    notes: str = ""

    @property
    def passed(self) -> bool:
        return math.isfinite(self.residual) and self.residual <= self.tol


@dataclass
class VerificationReport:
    checks: list[Check] = field(default_factory=list)
    title: str = ""

    def add(self, check: Check) -> Check:
        self.checks.append(check)
        return check

    def extend(self, checks: Iterable[Check]) -> None:
        self.checks.extend(checks)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.asserted)

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if c.asserted and not c.passed]

    def __getitem__(self, check_id: str) -> Check:
        for c in self.checks:
            if c.id == check_id:
                return c
        raise KeyError(check_id)

    def __iter__(self):
        return iter(self.checks)

    def __len__(self):
        return len(self.checks)

    def sorted(self) -> list[Check]:
        return sorted(self.checks, key=lambda c: c.id)

    def summary(self) -> str:
        asserted = [c for c in self.checks if c.asserted]
        failed = len(self.failures)
        status = "PASS" if self.passed else "FAIL"
        return f"{status}: {len(asserted) - failed}/{len(asserted)} asserted checks passed, {len(self.checks) - len(asserted)} informational"


def _status(c: Check) -> str:
    if not c.asserted:
        return "INFO"
    return "PASS" if c.passed else "FAIL"


def emit_report(report: VerificationReport, fmt: str = "text") -> str:
    """Serialise a report. ``text`` is aligned columns, ``machine`` is one key=value record per line."""
    checks = report.sorted()
    if fmt == "machine":
        lines = [
            f"id={c.id} samples={c.samples} residual={c.residual:.6e} tol={c.tol:.3e} "
            f"pass={'na' if not c.asserted else int(c.passed)}"
            for c in checks
        ]
        lines.append(
            f"summary checks={len(checks)} failed={len(report.failures)} pass={int(report.passed)}"
        )
        return "\n".join(lines) + "\n"
    if fmt != "text":
        raise ValueError(f"unknown report format {fmt!r}")
    lines = []
    if report.title:
        lines.append(report.title)
    if checks:
        w = max(len(c.id) for c in checks)
        lines.append(f"{'check':<{w}}  {'samples':>7}  {'residual':>12}  {'tol':>9}  status")
        for c in checks:
            line = f"{c.id:<{w}}  {c.samples:>7d}  {c.residual:>12.3e}  {c.tol:>9.1e}  {_status(c)}"
            if c.notes:
                line += f"  ({c.notes})"
            lines.append(line)
    lines.append(report.summary())
    return "\n".join(lines) + "\n"
