"""Verification reports: one record per named check, serializable to JSON/CSV.

A check may run many subcomparisons; the Report carries the worst-scoring
one (error measured against its own tolerance) so a single pass flag and a
single (lhs, rhs) pair summarize the run.  The pass rule is
(abs_err <= tolerance or rel_err <= tolerance) and tail_bound <= tolerance,
with rel_err = abs_err / (1 + |rhs|).
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass


def _jsonable(obj):
    """Coerce numpy scalars and containers into plain JSON-ready values."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, bool):
        return obj
    if hasattr(obj, "item"):  # numpy scalar
        return _jsonable(obj.item())
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


@dataclass
class Report:
    check_id: str
    params: dict
    lhs: complex
    rhs: complex
    abs_err: float
    rel_err: float
    tail_bound: float
    tolerance: float
    passed: bool
    runtime_ms: float
    seed: int

    def to_dict(self) -> dict:
        return {
            "check_id": self.check_id,
            "params": _jsonable(self.params),
            "lhs": [float(self.lhs.real), float(self.lhs.imag)],
            "rhs": [float(self.rhs.real), float(self.rhs.imag)],
            "abs_err": float(self.abs_err),
            "rel_err": float(self.rel_err),
            "tail_bound": float(self.tail_bound),
            "tolerance": float(self.tolerance),
            "pass": bool(self.passed),
            "runtime_ms": float(self.runtime_ms),
            "seed": int(self.seed),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Report":
        return cls(
            check_id=d["check_id"],
            params=d["params"],
            lhs=complex(d["lhs"][0], d["lhs"][1]),
            rhs=complex(d["rhs"][0], d["rhs"][1]),
            abs_err=d["abs_err"],
            rel_err=d["rel_err"],
            tail_bound=d["tail_bound"],
            tolerance=d["tolerance"],
            passed=d["pass"],
            runtime_ms=d["runtime_ms"],
            seed=d["seed"],
        )

    def summary_line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return (
            f"{flag} {self.check_id}: abs_err={self.abs_err:.3e} "
            f"rel_err={self.rel_err:.3e} tail={self.tail_bound:.3e} "
            f"tol={self.tolerance:.1e} ({self.runtime_ms:.0f} ms)"
        )


class Accumulator:
    """Collects labeled comparisons and reports the worst one.

    Each comparison scores as min(abs_err, rel_err) / tol (matching the
    pass rule's or-semantics); sigma-scaled comparisons (Monte Carlo
    agreement in standard errors) score as deviation / tol.
    """

    def __init__(self, check_id: str, params: dict, seed: int = 0):
        self.check_id = check_id
        self.params = dict(params)
        self.seed = seed
        self._t0 = time.perf_counter()
        self._worst_score = -math.inf
        self._worst = None
        self._all_pass = True
        self.count = 0

    def add(self, label: str, lhs: complex, rhs: complex, tol: float,
            tail: float = 0.0, sigma: float | None = None) -> None:
        lhs, rhs = complex(lhs), complex(rhs)
        if sigma is not None:
            abs_err = abs(lhs - rhs) / sigma if sigma > 0 else math.inf
            rel_err = math.inf
        else:
            abs_err = abs(lhs - rhs)
            rel_err = abs_err / (1.0 + abs(rhs))
        err = min(abs_err, rel_err)
        score = max(err / tol, tail / tol if tol > 0 else math.inf)
        ok = err <= tol and tail <= tol
        self._all_pass = self._all_pass and ok
        self.count += 1
        if score > self._worst_score:
            self._worst_score = score
            self._worst = (label, lhs, rhs, abs_err, rel_err, tail, tol)

    def add_residual(self, label: str, residual: float, tol: float, tail: float = 0.0) -> None:
        """Comparison already reduced to a scalar residual against zero."""
        self.add(label, complex(residual), 0.0, tol, tail=tail)

    def report(self) -> Report:
        if self._worst is None:
            raise ValueError(f"check {self.check_id} recorded no comparisons")
        label, lhs, rhs, abs_err, rel_err, tail, tol = self._worst
        params = dict(self.params)
        params["worst_case"] = label
        params["comparisons"] = self.count
        return Report(
            check_id=self.check_id,
            params=params,
            lhs=lhs,
            rhs=rhs,
            abs_err=abs_err,
            rel_err=rel_err,
            tail_bound=tail,
            tolerance=tol,
            passed=self._all_pass,
            runtime_ms=(time.perf_counter() - self._t0) * 1000.0,
            seed=self.seed,
        )


CSV_FIELDS = [
    "check_id", "params", "lhs_re", "lhs_im", "rhs_re", "rhs_im",
    "abs_err", "rel_err", "tail_bound", "tolerance", "pass", "runtime_ms", "seed",
]


def reports_to_json(reports: list[Report]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True)


def reports_from_json(text: str) -> list[Report]:
    return [Report.from_dict(d) for d in json.loads(text)]


def reports_to_csv(reports: list[Report]) -> str:
    """Flat CSV: params serialized as one JSON column, complex split re/im."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS)
    writer.writeheader()
    for r in reports:
        writer.writerow({
            "check_id": r.check_id,
            "params": json.dumps(r.params, sort_keys=True),
            "lhs_re": repr(r.lhs.real),
            "lhs_im": repr(r.lhs.imag),
            "rhs_re": repr(r.rhs.real),
            "rhs_im": repr(r.rhs.imag),
            "abs_err": repr(r.abs_err),
            "rel_err": repr(r.rel_err),
            "tail_bound": repr(r.tail_bound),
            "tolerance": repr(r.tolerance),
            "pass": r.passed,
            "runtime_ms": repr(r.runtime_ms),
            "seed": r.seed,
        })
    return buf.getvalue()


def emit_report(reports: list[Report], fmt: str, destination: str) -> None:
    """Write reports to a file; fmt is 'json' or 'csv'."""
    if not reports:
        raise ValueError("no reports to emit")
    if fmt == "json":
        text = reports_to_json(reports)
    elif fmt == "csv":
        text = reports_to_csv(reports)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    with open(destination, "w") as fh:
        fh.write(text)
