"""Verification reports: ordered checks rendered as TSV or JSON."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

PASS = "PASS"
FAIL = "FAIL"
INFO = "INFO"  # reported for reference, never gating
EXTENDED_PASS = "EXTENDED-PASS"
BUDGET_EXCEEDED = "BUDGET-EXCEEDED"

NON_FAILING = {PASS, INFO, EXTENDED_PASS, BUDGET_EXCEEDED}


def _plain(value):
    """JSON-friendly copy: tuples become lists, numpy scalars become ints."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        return value.item()
    return value


def render_value(value) -> str:
    return json.dumps(_plain(value), sort_keys=True, separators=(",", ":"))


@dataclass
class Check:
    id: str
    description: str
    expected: object
    observed: object
    status: str
    runtime: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status in NON_FAILING


class DuplicateCheckError(ValueError):
    pass


@dataclass
class VerificationReport:
    checks: list[Check] = field(default_factory=list)

    def add(self, check: Check) -> Check:
        if any(c.id == check.id for c in self.checks):
            raise DuplicateCheckError(check.id)
        self.checks.append(check)
        return check

    def extend(self, checks) -> None:
        for c in checks:
            self.add(c)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def counts(self) -> dict:
        out = {}
        for c in self.checks:
            out[c.status] = out.get(c.status, 0) + 1
        return out

    def to_tsv(self) -> str:
        rows = ["id\tdescription\texpected\tobserved\tstatus"]
        for c in self.checks:
            rows.append(
                "\t".join(
                    [c.id, c.description, render_value(c.expected), render_value(c.observed), c.status]
                )
            )
        return "\n".join(rows) + "\n"

    def to_json(self) -> str:
        payload = {
            "status": PASS if self.ok else FAIL,
            "checks": [
                {
                    "id": c.id,
                    "description": c.description,
                    "expected": _plain(c.expected),
                    "observed": _plain(c.observed),
                    "status": c.status,
                }
                for c in self.checks
            ],
        }
        return json.dumps(payload, indent=1, sort_keys=True) + "\n"

    def render(self, fmt: str = "tsv") -> str:
        return self.to_json() if fmt == "json" else self.to_tsv()

    def timings_tsv(self) -> str:
        rows = ["id\truntime_s"] + [f"{c.id}\t{c.runtime:.3f}" for c in self.checks]
        return "\n".join(rows) + "\n"
