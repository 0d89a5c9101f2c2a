"""Pinned example runs and their expectation checks.

Each id maps to one JSON spec shipped in ``skolab/specs``.  A spec is an
ExperimentSpec plus an ``expect`` list; every entry names a functional,
a statistic and one test:

``equals`` / ``at_most`` / ``at_least``
    compare the statistic at every n with an expression in ``n``
    (within ``tol``).
``trend``
    ``increasing`` or ``decreasing`` across the n grid.  For medians
    this needs non-overlapping median intervals; other statistics must
    be strictly monotone.
``ratio_below``
    max/min of the statistic across n stays below the bound.  An all-zero
    statistic counts as no variation.
``band_sigmas``
    ``|mean| <= k * std / sqrt(count)`` at every n.

An optional ``when`` expression in ``n`` restricts per-n tests.
"""

from __future__ import annotations

import json
import math
from importlib import resources
from typing import NamedTuple

from .errors import BadParameter, UnknownId

__all__ = ["REPRODUCE_IDS", "load_spec", "Check", "run", "check_expectations", "format_table"]

REPRODUCE_IDS = (
    "alternating",
    "sawtooth",
    "fig6",
    "zigzag",
    "single-jump-martingale",
    "exploding-pair",
    "crossing-walk",
    "ctrw-gd",
)

_NAMES = {"sqrt": math.sqrt, "floor": math.floor, "ceil": math.ceil, "pi": math.pi, "log": math.log, "exp": math.exp}


class Check(NamedTuple):
    functional: str
    n: int | None
    stat: str
    value: float | None
    expected: str
    passed: bool | None  # None: skipped


def load_spec(example_id: str) -> dict:
    if example_id not in REPRODUCE_IDS:
        raise UnknownId(f"unknown example {example_id!r}; known: {', '.join(REPRODUCE_IDS)}")
    text = resources.files("skolab").joinpath("specs", f"{example_id}.json").read_text(encoding="utf-8")
    return json.loads(text)


def _expr(text: str, n: int) -> float:
    return float(eval(str(text), {"__builtins__": {}}, {**_NAMES, "n": n}))  # pinned in-repo files only


def _stat(report, n, label, stat):
    st = report.stats(n, label, None)
    if stat not in st:
        raise BadParameter(f"unknown statistic {stat!r}")
    return float(st[stat])


def check_expectations(report, expect: list[dict]) -> list[Check]:
    from .montecarlo import Functional, convergence_trend

    out: list[Check] = []
    ns = report.n_values
    for e in expect:
        label = Functional.from_dict(e["functional"]).label
        stat = e.get("stat", "median")
        tol = float(e.get("tol", 0.0))
        if "trend" in e:
            want = e["trend"]
            if len(ns) < 3 if stat == "median" else len(ns) < 2:
                out.append(Check(label, None, stat, None, f"trend {want}", None))
                continue
            if stat == "median":
                verdict = convergence_trend(report)[label].verdict
                ok = verdict == want
            else:
                v = [_stat(report, n, label, stat) for n in ns]
                pairs = list(zip(v, v[1:]))
                ok = all(b > a for a, b in pairs) if want == "increasing" else all(b < a for a, b in pairs)
                verdict = "increasing" if all(b > a for a, b in pairs) else "decreasing" if all(b < a for a, b in pairs) else "not monotone"
            out.append(Check(label, None, stat, None, f"trend {want} (got {verdict})", ok))
        elif "ratio_below" in e:
            if len(ns) < 2:
                out.append(Check(label, None, stat, None, f"max/min < {e['ratio_below']}", None))
                continue
            v = [_stat(report, n, label, stat) for n in ns]
            lo, hi = min(v), max(v)
            ratio = 1.0 if hi == 0 else (math.inf if lo <= 0 else hi / lo)
            out.append(Check(label, None, stat, ratio, f"max/min < {e['ratio_below']}", ratio < float(e["ratio_below"])))
        elif "band_sigmas" in e:
            k = float(e["band_sigmas"])
            for n in ns:
                st = report.stats(n, label, None)
                band = k * st["std"] / math.sqrt(st["count"])
                out.append(Check(label, n, "mean", st["mean"], f"|mean| <= {band:.6g}", abs(st["mean"]) <= band))
        else:
            for key, cmp in (("equals", lambda v, x: abs(v - x) <= tol), ("at_most", lambda v, x: v <= x + tol),
                             ("at_least", lambda v, x: v >= x - tol)):
                if key in e:
                    for n in ns:
                        if "when" in e and not _expr(e["when"], n):
                            out.append(Check(label, n, stat, None, f"only when {e['when']}", None))
                            continue
                        v = _stat(report, n, label, stat)
                        x = _expr(e[key], n)
                        sign = {"equals": "=", "at_most": "<=", "at_least": ">="}[key]
                        out.append(Check(label, n, stat, v, f"{sign} {e[key]} = {x:.12g}", cmp(v, x)))
                    break
            else:
                raise BadParameter(f"expectation without a test: {e}")
    return out


def run(example_id: str, n_grid=None, seed: int | None = None, replicas: int | None = None):
    """Run a pinned example; returns ``(spec, report, checks)``."""
    from .montecarlo import ExperimentSpec, run_experiment

    d = load_spec(example_id)
    if n_grid:
        d["n_grid"] = sorted(set(int(n) for n in n_grid))
    if seed is not None:
        d["seed"] = int(seed)
    if replicas is not None:
        d["replicas"] = int(replicas)
    spec = ExperimentSpec.from_dict(d)
    report = run_experiment(spec)
    report.meta["example"] = example_id
    return spec, report, check_expectations(report, d.get("expect", []))


def format_table(example_id: str, spec_hash: str, checks: list[Check]) -> str:
    rows = [("functional", "n", "stat", "value", "expected", "result")]
    for c in checks:
        res = "SKIP" if c.passed is None else ("PASS" if c.passed else "FAIL")
        rows.append((c.functional, "" if c.n is None else str(c.n), c.stat,
                     "" if c.value is None else f"{c.value:.12g}", c.expected, res))
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = [f"{example_id}  spec {spec_hash}"]
    for r in rows:
        lines.append("  ".join(s.ljust(w) for s, w in zip(r, widths)).rstrip())
    return "\n".join(lines)
