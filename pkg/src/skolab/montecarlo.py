"""Monte Carlo harness and path diagnostics.

A run draws ``replicas`` samples of a registered construction for each
scale index ``n``, evaluates functionals on every sample and keeps the
raw values per replica.  Statistics are derived from the raw values, so
reports over disjoint replica ranges merge exactly and the merged
report does not depend on the order of merging.

Replica ``r`` always uses ``Seed(seed, r)``.  Replicas run on a thread
pool capped by ``SKOLAB_THREADS``; results are reassembled in replica
order, which keeps the output byte-identical for any thread count.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple, Sequence

import numpy as np

from . import metrics as _m
from .errors import BadParameter, InsufficientData, MissingInternals, SinkError, UnknownConstruction
from .integrals import dot_integral, quad_covariation
from .paths import StepPath, _segment_index, amalgamate, evaluate, sup_norm, total_variation
from .processes import CONSTRUCTIONS, Construction, construct, deterministic_limit
from .rng import Seed

__all__ = [
    "ExperimentSpec",
    "DiagnosticsReport",
    "TrendSummary",
    "wilson_interval",
    "median_interval",
    "run_experiment",
    "gd_diagnostics",
    "avci_estimate",
    "f_conditions_report",
    "restart_increment_estimate",
    "tightness_report",
    "convergence_trend",
    "stopped_jump",
    "restart_increments",
    "thread_count",
]

Z95 = 1.959963984540054
QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


def thread_count() -> int:
    raw = os.environ.get("SKOLAB_THREADS")
    if raw is None or raw == "":
        return min(8, os.cpu_count() or 1)
    try:
        k = int(raw)
    except ValueError:
        raise BadParameter(f"SKOLAB_THREADS must be an integer, got {raw!r}") from None
    if k < 1:
        raise BadParameter("SKOLAB_THREADS must be >= 1")
    return k


# ----------------------------------------------------------------- statistics


def wilson_interval(successes: int, total: int, z: float = Z95) -> tuple[float, float]:
    if total <= 0:
        raise InsufficientData("no samples")
    p = successes / total
    z2 = z * z
    den = 1 + z2 / total
    centre = (p + z2 / (2 * total)) / den
    half = z / den * math.sqrt(p * (1 - p) / total + z2 / (4 * total * total))
    return max(0.0, centre - half), min(1.0, centre + half)


def median_interval(sorted_values: np.ndarray) -> tuple[float, float]:
    """Distribution-free 95% interval for the median: the order
    statistics at the Wilson bounds of the rank proportion 1/2."""
    N = sorted_values.size
    pl, ph = wilson_interval(N / 2, N) if N % 2 == 0 else _wilson_half(N)
    lo = max(0, int(math.floor(N * pl)))
    hi = min(N - 1, int(math.ceil(N * ph)) - 1)
    hi = max(hi, lo)
    return float(sorted_values[lo]), float(sorted_values[hi])


def _wilson_half(N: int):
    # wilson_interval with a fractional success count
    p, z2 = 0.5, Z95 * Z95
    den = 1 + z2 / N
    centre = (p + z2 / (2 * N)) / den
    half = Z95 / den * math.sqrt(p * (1 - p) / N + z2 / (4 * N * N))
    return max(0.0, centre - half), min(1.0, centre + half)


def _value_stats(v: np.ndarray) -> dict:
    s = np.sort(v)
    N = s.size
    mean = float(np.mean(s))
    std = float(np.std(s, ddof=1)) if N > 1 else 0.0
    half = Z95 * std / math.sqrt(N)
    q = np.quantile(s, QUANTILES)
    mlo, mhi = median_interval(s)
    out = {
        "count": N,
        "mean": mean,
        "mean_lo": mean - half,
        "mean_hi": mean + half,
        "std": std,
        "min": float(s[0]),
        "max": float(s[-1]),
        "median": float(np.median(s)),
        "median_lo": mlo,
        "median_hi": mhi,
    }
    for level, val in zip(QUANTILES, q):
        out[f"q{int(round(level * 100)):02d}"] = float(val)
    return out


def _indicator_stats(v: np.ndarray) -> dict:
    N = v.size
    k = int(np.count_nonzero(v))
    lo, hi = wilson_interval(k, N)
    return {"count": N, "successes": k, "p": k / N, "p_lo": lo, "p_hi": hi}


# ---------------------------------------------------------------------- report


def _pkey(param) -> str:
    return "" if param is None else repr(float(param))


@dataclass
class _Cell:
    kind: str  # "value" or "indicator"
    values: dict = field(default_factory=dict)  # replica -> float

    def array(self) -> np.ndarray:
        return np.array([self.values[r] for r in sorted(self.values)], dtype=float)


class DiagnosticsReport:
    """Raw per-replica values for cells ``(n, functional, param)`` plus
    metadata.  ``param`` is the grid coordinate of a surface (delta,
    theta, R or c) or None."""

    def __init__(self, meta: dict | None = None):
        self.meta = dict(meta or {})
        self.cells: dict[tuple[int, str, str], _Cell] = {}
        self.flags: dict[str, bool] = {}
        self.runtime: float | None = None  # wall clock; not serialized

    # -- building
    def add(self, n: int, replica: int, functional: str, value: float, param=None, kind: str = "value"):
        key = (int(n), functional, _pkey(param))
        cell = self.cells.get(key)
        if cell is None:
            cell = self.cells[key] = _Cell(kind)
        elif cell.kind != kind:
            raise BadParameter(f"cell {key} mixes {cell.kind} and {kind} values")
        if replica in cell.values:
            raise BadParameter(f"replica {replica} already recorded for {key}")
        cell.values[int(replica)] = float(value)

    # -- access
    @property
    def n_values(self) -> list[int]:
        return sorted({k[0] for k in self.cells})

    def functionals(self) -> list[tuple[str, str]]:
        return sorted({(k[1], k[2]) for k in self.cells})

    def values(self, n: int, functional: str, param=None) -> np.ndarray:
        return self._cell(n, functional, param).array()

    def _cell(self, n, functional, param) -> _Cell:
        key = (int(n), functional, param if isinstance(param, str) else _pkey(param))
        if key not in self.cells:
            raise InsufficientData(f"no values for {key}")
        return self.cells[key]

    def stats(self, n: int, functional: str, param=None) -> dict:
        cell = self._cell(n, functional, param)
        a = cell.array()
        return _indicator_stats(a) if cell.kind == "indicator" else _value_stats(a)

    def probability(self, n: int, functional: str, param=None) -> float:
        return self.stats(n, functional, param)["p"]

    def median(self, n: int, functional: str, param=None) -> float:
        return self.stats(n, functional, param)["median"]

    def medians(self, functional: str, param=None):
        """(ns, medians, lo, hi) across the n grid for one functional."""
        p = param if isinstance(param, str) else _pkey(param)
        ns = sorted(k[0] for k in self.cells if k[1] == functional and k[2] == p)
        st = [self.stats(n, functional, p) for n in ns]
        return (np.array(ns), np.array([s["median"] for s in st]),
                np.array([s["median_lo"] for s in st]), np.array([s["median_hi"] for s in st]))

    # -- combination
    def merge(self, other: "DiagnosticsReport") -> "DiagnosticsReport":
        """Union of two reports over disjoint replica ranges."""
        a = {k: v for k, v in self.meta.items() if k != "replicas"}
        b = {k: v for k, v in other.meta.items() if k != "replicas"}
        if a != b:
            raise BadParameter("reports come from different experiments")
        out = DiagnosticsReport(a)
        for src in (self, other):
            for (n, f, p), cell in src.cells.items():
                for r, v in cell.values.items():
                    out.add(n, r, f, v, None if p == "" else float(p), cell.kind)
        reps = sorted({r for c in out.cells.values() for r in c.values})
        out.meta["replicas"] = _ranges(reps)
        for k in set(self.flags) | set(other.flags):
            out.flags[k] = bool(self.flags.get(k, False) or other.flags.get(k, False))
        return out

    # -- serialization
    def to_dict(self) -> dict:
        cells = []
        for key in sorted(self.cells):
            n, f, p = key
            c = self.cells[key]
            reps = sorted(c.values)
            cells.append({
                "n": n,
                "functional": f,
                "param": None if p == "" else float(p),
                "kind": c.kind,
                "replicas": reps,
                "values": [c.values[r] for r in reps],
                "stats": self.stats(n, f, p),
            })
        return {"meta": self.meta, "flags": dict(sorted(self.flags.items())), "cells": cells}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1, allow_nan=False)

    @classmethod
    def from_dict(cls, d: dict) -> "DiagnosticsReport":
        out = cls(d.get("meta", {}))
        out.flags = dict(d.get("flags", {}))
        for c in d["cells"]:
            for r, v in zip(c["replicas"], c["values"]):
                out.add(c["n"], r, c["functional"], v, c["param"], c["kind"])
        return out

    @classmethod
    def from_json(cls, text: str) -> "DiagnosticsReport":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        """Long format ``n,param,functional,stat,value,lo,hi``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "param", "functional", "stat", "value", "lo", "hi"])
        for key in sorted(self.cells):
            n, f, p = key
            st = self.stats(n, f, p)
            if self.cells[key].kind == "indicator":
                w.writerow([n, p, f, "p", repr(st["p"]), repr(st["p_lo"]), repr(st["p_hi"])])
                continue
            w.writerow([n, p, f, "mean", repr(st["mean"]), repr(st["mean_lo"]), repr(st["mean_hi"])])
            w.writerow([n, p, f, "median", repr(st["median"]), repr(st["median_lo"]), repr(st["median_hi"])])
            for level in QUANTILES:
                name = f"q{int(round(level * 100)):02d}"
                w.writerow([n, p, f, name, repr(st[name]), "", ""])
            w.writerow([n, p, f, "std", repr(st["std"]), "", ""])
        return buf.getvalue()

    def write(self, sink: str) -> None:
        text = self.to_csv() if str(sink).endswith(".csv") else self.to_json()
        try:
            with open(sink, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as e:
            raise SinkError(f"cannot write report to {sink!r}: {e}") from e

    def __eq__(self, other):
        if not isinstance(other, DiagnosticsReport):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def _ranges(reps: Sequence[int]) -> list[list[int]]:
    out: list[list[int]] = []
    for r in reps:
        if out and out[-1][1] == r:
            out[-1][1] = r + 1
        else:
            out.append([r, r + 1])
    return out


# ----------------------------------------------------------------- functionals


def stopped_jump(M: StepPath, c: float, t: float) -> float:
    """``|Delta M|`` at ``t ^ tau_c`` with ``tau_c = inf{s > 0 : |M|*_s >= c}``.

    M is a step path, so ``|M|*`` first reaches c at a breakpoint (or at
    time 0, which the definition excludes: the infimum is then 0 and the
    jump there is 0).
    """
    v = M.values
    bp = M.breakpoints
    norms = np.linalg.norm(v, axis=1)
    if norms[0] >= c:
        return 0.0
    run = np.maximum.accumulate(norms)
    hit = np.flatnonzero(run >= c)
    if hit.size and bp[hit[0]] <= t:
        i = int(hit[0])
    else:
        i = int(np.searchsorted(bp, t, side="right") - 1)
        if bp[i] != t:
            return 0.0
    return float(np.linalg.norm(v[i] - v[i - 1])) if i > 0 else 0.0


def restart_increments(X: StepPath, epochs: np.ndarray, delta: float, T: float | None = None) -> np.ndarray:
    """For each k >= 0 (sigma_0 = 0), the largest
    ``|X(r ^ T) - X(s)|`` over ``sigma_k <= s < sigma_{k+1} <= r <= sigma_{k+1} + delta``.

    Entries for k with ``sigma_{k+1}`` beyond T are 0.
    """
    T = X.horizon if T is None else T
    sig = np.concatenate([[0.0], np.asarray(epochs, dtype=float)])
    sig = sig[sig <= T]
    K = sig.size
    out = np.zeros(K)
    if K < 2:
        return out
    idx = _segment_index(X, sig)
    ends = _segment_index(X, np.minimum(sig[1:] + delta, T))
    for k in range(K - 1):
        # levels on [sigma_k, sigma_{k+1}) against levels on the r-window
        seg = X.values[idx[k]: max(idx[k + 1], idx[k] + 1)]
        win = X.values[idx[k + 1]: ends[k] + 1]
        d = np.linalg.norm(win[:, None, :] - seg[None, :, :], axis=2)
        out[k] = float(d.max())
    return out


def _role(c: Construction, role: str) -> StepPath:
    try:
        return c.paths[role]
    except KeyError:
        raise MissingInternals(f"construction provides {sorted(c.paths)}, not {role!r}") from None


def _limit_role(construction: str, role: str) -> StepPath:
    lim = deterministic_limit(construction)
    if isinstance(lim, StepPath):
        return lim
    return {"H": lim[0], "X": lim[1]}[role]


@dataclass(frozen=True)
class Functional:
    """A named path functional with its parameters.

    ``name`` in {integral_at, sup_norm, tv, quad_var, w_hat, n_delta,
    w_prime, w_dprime, v_tilde, metric_to_reference, stopped_jump,
    value_at, limit_integral_at}.
    ``exceeds`` turns the value into the indicator ``value > exceeds``.
    """

    name: str
    params: tuple = ()
    exceeds: float | None = None

    @classmethod
    def from_dict(cls, d: Mapping) -> "Functional":
        d = dict(d)
        name = d.pop("name")
        exceeds = d.pop("exceeds", None)
        if name not in _FUNCS:
            raise BadParameter(f"unknown functional {name!r}; known: {sorted(_FUNCS)}")
        return cls(name, tuple(sorted(d.items())), exceeds)

    def to_dict(self) -> dict:
        d = {"name": self.name, **dict(self.params)}
        if self.exceeds is not None:
            d["exceeds"] = self.exceeds
        return d

    @property
    def label(self) -> str:
        inner = ",".join(f"{k}={v}" for k, v in self.params)
        s = f"{self.name}({inner})"
        return s if self.exceeds is None else f"{s}>{self.exceeds}"

    def __call__(self, c: Construction, construction_id: str) -> float:
        v = _FUNCS[self.name](c, construction_id, **dict(self.params))
        return float(v > self.exceeds) if self.exceeds is not None else float(v)

    @property
    def kind(self) -> str:
        return "value" if self.exceeds is None else "indicator"


def _f_integral_at(c, cid, t=None, h="H", x="X"):
    H, X = _role(c, h), _role(c, x)
    return float(dot_integral(H, X, t if t is not None else X.horizon)[0])


def _f_sup_norm(c, cid, T=None, path="X"):
    return sup_norm(_role(c, path), T)


def _f_tv(c, cid, T=None, path="X"):
    p = _role(c, path)
    return total_variation(p, 0.0, p.horizon if T is None else T).total


def _f_quad_var(c, cid, t=None, path="X"):
    p = _role(c, path)
    q = quad_covariation(p, p)
    return float(np.sum(evaluate(q, p.horizon if t is None else t)))


def _f_w_hat(c, cid, delta, T=None, h="H", x="X"):
    return _m.consecutive_increment(_role(c, h), _role(c, x), delta, T)


def _f_n_delta(c, cid, delta, T=None, path="X"):
    return _m.increment_count(_role(c, path), delta, T)


def _f_w_prime(c, cid, theta, T=None, path="X"):
    return _m.w_prime(_role(c, path), theta, T)


def _f_w_dprime(c, cid, theta, T=None, path="X"):
    return _m.w_dprime(_role(c, path), theta, T)


def _f_v_tilde(c, cid, theta, T=None, path="X"):
    return _m.v_tilde(_role(c, path), theta, T)


def _joint(getter, path: str) -> StepPath:
    roles = [r.strip() for r in path.split(",")]
    return getter(roles[0]) if len(roles) == 1 else amalgamate(*(getter(r) for r in roles))


def _f_metric(c, cid, metric="uniform", T=None, path="X", tolerance=1e-6):
    """Distance to the construction's n -> infinity limit; ``path="H,X"``
    compares the joint path."""
    p = _joint(lambda r: _role(c, r), path)
    ref = _joint(lambda r: _limit_role(cid, r), path)
    opts = _m.MetricOptions(tolerance=tolerance)
    fn = {"uniform": lambda a, b: _m.uniform_distance(a, b, T),
          "j1": lambda a, b: _m.j1_distance(a, b, T, opts),
          "m1": lambda a, b: _m.m1_distance(a, b, T, opts)}
    if metric not in fn:
        raise BadParameter(f"unknown metric {metric!r}")
    return fn[metric](p, ref)


def _f_value_at(c, cid, t, path="X"):
    return float(np.sum(evaluate(_role(c, path), t)))


def _f_limit_integral_at(c, cid, t=None, h="H", x="X"):
    H, X = _limit_role(cid, h), _limit_role(cid, x)
    return float(dot_integral(H, X, t if t is not None else X.horizon)[0])


def _f_stopped_jump(c, cid, level, t=1.0, path="M"):
    return stopped_jump(_role(c, path), level, t)


_FUNCS: dict[str, Callable] = {
    "integral_at": _f_integral_at,
    "sup_norm": _f_sup_norm,
    "tv": _f_tv,
    "quad_var": _f_quad_var,
    "w_hat": _f_w_hat,
    "n_delta": _f_n_delta,
    "w_prime": _f_w_prime,
    "w_dprime": _f_w_dprime,
    "v_tilde": _f_v_tilde,
    "metric_to_reference": _f_metric,
    "stopped_jump": _f_stopped_jump,
    "value_at": _f_value_at,
    "limit_integral_at": _f_limit_integral_at,
}


# ------------------------------------------------------------------ experiment


@dataclass(frozen=True)
class ExperimentSpec:
    construction: str
    n_grid: tuple
    replicas: int = 200
    functionals: tuple = ()
    params: dict = field(default_factory=dict)
    seed: int = 0
    sink: str | None = None
    replica_offset: int = 0

    def __post_init__(self):
        if self.construction not in CONSTRUCTIONS:
            raise UnknownConstruction(f"unknown construction {self.construction!r}; known: {sorted(CONSTRUCTIONS)}")
        ns = tuple(int(n) for n in self.n_grid)
        if not ns:
            raise BadParameter("n_grid must be nonempty")
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise BadParameter("n_grid must be strictly ascending")
        object.__setattr__(self, "n_grid", ns)
        if int(self.replicas) != self.replicas or self.replicas < 1:
            raise BadParameter("replicas must be a positive integer")
        if self.replica_offset < 0:
            raise BadParameter("replica_offset must be nonnegative")
        fs = tuple(f if isinstance(f, Functional) else Functional.from_dict(f) for f in self.functionals)
        object.__setattr__(self, "functionals", fs)
        object.__setattr__(self, "params", dict(self.params))

    def to_dict(self) -> dict:
        return {
            "construction": self.construction,
            "params": self.params,
            "n_grid": list(self.n_grid),
            "replicas": self.replicas,
            "functionals": [f.to_dict() for f in self.functionals],
            "seed": self.seed,
            "sink": self.sink,
            "replica_offset": self.replica_offset,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExperimentSpec":
        known = {"construction", "params", "n_grid", "replicas", "functionals", "seed", "sink", "replica_offset"}
        extra = set(d) - known - {"expect", "description", "id"}
        if extra:
            raise BadParameter(f"unknown spec fields {sorted(extra)}")
        return cls(**{k: v for k, v in d.items() if k in known})

    @property
    def spec_hash(self) -> str:
        """Hash of everything that determines the per-replica values."""
        d = self.to_dict()
        for k in ("replicas", "replica_offset", "sink"):
            d.pop(k)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _meta(kind: str, construction: str, params: dict, seed: int, extra: dict, replicas: range) -> dict:
    blob = json.dumps({"kind": kind, "construction": construction, "params": params, **extra}, sort_keys=True, separators=(",", ":"), default=str)
    return {
        "analysis": kind,
        "construction": construction,
        "params": params,
        "seed": int(seed),
        "spec_hash": hashlib.sha256(blob.encode()).hexdigest()[:16],
        "replicas": _ranges(list(replicas)),
        **extra,
    }


def _drive(construction: str, params: dict, n_grid: Sequence[int], replicas: range, seed: int,
           evaluate_one: Callable[[Construction, int], list], report: DiagnosticsReport) -> DiagnosticsReport:
    """Generate and evaluate every (n, replica); fold in replica order."""
    t0 = time.perf_counter()
    threads = thread_count()

    def job(args):
        n, r = args
        c = construct(construction, n, Seed(int(seed), r), **params)
        return evaluate_one(c, n)

    for n in n_grid:
        tasks = [(n, r) for r in replicas]
        if threads > 1 and len(tasks) > 1:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                results = list(ex.map(job, tasks))
        else:
            results = [job(t) for t in tasks]
        for (n_, r), recs in zip(tasks, results):
            for functional, param, kind, value in recs:
                report.add(n_, r, functional, value, param, kind)
    report.runtime = time.perf_counter() - t0
    return report


def run_experiment(spec: ExperimentSpec | Mapping) -> DiagnosticsReport:
    """Evaluate every functional on every (n, replica) of an ExperimentSpec."""
    if not isinstance(spec, ExperimentSpec):
        spec = ExperimentSpec.from_dict(spec)
    reps = range(spec.replica_offset, spec.replica_offset + spec.replicas)
    meta = {
        "analysis": "experiment",
        "construction": spec.construction,
        "params": spec.params,
        "seed": int(spec.seed),
        "spec_hash": spec.spec_hash,
        "replicas": _ranges(list(reps)),
    }
    report = DiagnosticsReport(meta)

    def one(c, n):
        return [(f.label, None, f.kind, f(c, spec.construction)) for f in spec.functionals]

    _drive(spec.construction, spec.params, spec.n_grid, reps, spec.seed, one, report)
    if spec.sink:
        report.write(spec.sink)
    return report


def _reps(replicas: int, offset: int = 0) -> range:
    if int(replicas) != replicas or replicas < 1:
        raise BadParameter("replicas must be a positive integer")
    return range(offset, offset + int(replicas))


def _source(source) -> tuple[str, dict]:
    if isinstance(source, str):
        return source, {}
    if isinstance(source, Mapping):
        d = dict(source)
        cid = d.pop("construction")
        return cid, dict(d.pop("params", d))
    cid, params = source
    return cid, dict(params)


def gd_diagnostics(source, t: float, c_grid: Sequence[float], R_grid: Sequence[float], n_grid: Sequence[int],
                   replicas: int = 200, seed: int = 0, replica_offset: int = 0) -> DiagnosticsReport:
    """Tail curve ``P(TV_[0,t](A) > R)`` and ``|Delta M_{t ^ tau_c}|``.

    The source must provide paths ``M`` and ``A``.  Cells:
    ``tv_exceeds`` (indicator, param R) and ``stopped_jump`` (value,
    param c; its mean estimates the expectation).
    """
    cid, params = _source(source)
    if cid not in CONSTRUCTIONS:
        raise UnknownConstruction(f"unknown construction {cid!r}")
    reps = _reps(replicas, replica_offset)
    meta = _meta("gd", cid, params, seed, {"t": t, "c_grid": list(c_grid), "R_grid": list(R_grid)}, reps)
    report = DiagnosticsReport(meta)

    def one(c, n):
        M, A = _role(c, "M"), _role(c, "A")
        tv = total_variation(A, 0.0, t).total
        out = [("tv_exceeds", R, "indicator", float(tv > R)) for R in R_grid]
        out += [("stopped_jump", cc, "value", stopped_jump(M, cc, t)) for cc in c_grid]
        return out

    return _drive(cid, params, n_grid, reps, seed, one, report)


def avci_estimate(source, delta_grid: Sequence[float], gamma: float, T: float, n_grid: Sequence[int],
                  replicas: int = 200, seed: int = 0, replica_offset: int = 0) -> DiagnosticsReport:
    """Surface ``P(w_hat^T_delta(H, X) > gamma)`` over (n, delta)."""
    if not gamma > 0:
        raise BadParameter("gamma must be positive")
    cid, params = _source(source)
    if cid not in CONSTRUCTIONS:
        raise UnknownConstruction(f"unknown construction {cid!r}")
    reps = _reps(replicas, replica_offset)
    meta = _meta("avci", cid, params, seed, {"gamma": gamma, "T": T, "delta_grid": list(delta_grid)}, reps)
    report = DiagnosticsReport(meta)

    def one(c, n):
        H, X = _role(c, "H"), _role(c, "X")
        return [("w_hat_exceeds", d, "indicator", float(_m.consecutive_increment(H, X, d, T) > gamma)) for d in delta_grid]

    return _drive(cid, params, n_grid, reps, seed, one, report)


def f_conditions_report(source, delta_grid: Sequence[float], T: float, n_grid: Sequence[int], replicas: int = 200,
                        seed: int = 0, replica_offset: int = 0, explosion_factor: float = 2.0,
                        path: str = "H") -> DiagnosticsReport:
    """Quantiles of ``|H|*_T`` (``sup_norm``) and ``N^T_delta(H)``
    (``n_delta``, param delta).  ``flags[label]`` is set when the 95%
    quantile strictly increases along the n grid and ends more than
    ``explosion_factor`` times above its start."""
    cid, params = _source(source)
    if cid not in CONSTRUCTIONS:
        raise UnknownConstruction(f"unknown construction {cid!r}")
    reps = _reps(replicas, replica_offset)
    meta = _meta("f_conditions", cid, params, seed, {"T": T, "delta_grid": list(delta_grid), "path": path}, reps)
    report = DiagnosticsReport(meta)

    def one(c, n):
        H = _role(c, path)
        out = [("sup_norm", None, "value", sup_norm(H, T))]
        out += [("n_delta", d, "value", float(_m.increment_count(H, d, T))) for d in delta_grid]
        return out

    _drive(cid, params, n_grid, reps, seed, one, report)
    for f, p in report.functionals():
        q = [report.stats(n, f, p)["q95"] for n in report.n_values]
        grows = all(b > a for a, b in zip(q, q[1:]))
        big = q[-1] > explosion_factor * q[0] if q[0] > 0 else q[-1] > 0
        report.flags[f"{f}({p})" if p else f] = bool(len(q) > 1 and grows and big)
    return report


def restart_increment_estimate(source, delta_grid: Sequence[float], lam: float, T: float, n_grid: Sequence[int],
                               replicas: int = 200, seed: int = 0, replica_offset: int = 0,
                               path: str = "X") -> DiagnosticsReport:
    """Worst-over-k probability that X moves by more than ``lam``
    within delta after the (k+1)-th epoch, relative to its level on
    ``[sigma_k, sigma_{k+1})``.

    Cells ``restart_exceeds[k]`` (indicator, param delta) per epoch
    index, and ``restart_sup`` (value, param delta) holding the
    per-replica indicator for the worst k, chosen after all replicas
    are in: see :meth:`worst_probability`.
    """
    if not lam > 0:
        raise BadParameter("lambda must be positive")
    cid, params = _source(source)
    if cid not in CONSTRUCTIONS:
        raise UnknownConstruction(f"unknown construction {cid!r}")
    reps = _reps(replicas, replica_offset)
    meta = _meta("restart", cid, params, seed, {"lambda": lam, "T": T, "delta_grid": list(delta_grid)}, reps)
    report = DiagnosticsReport(meta)

    def one(c, n):
        if c.epochs is None:
            raise MissingInternals(f"construction {cid!r} exposes no jump epochs")
        X = _role(c, path)
        out = []
        for d in delta_grid:
            inc = restart_increments(X, c.epochs, d, T)
            # store the epoch indices that exceed, as a bit count per k
            for k in np.flatnonzero(inc > lam):
                out.append((f"restart_exceeds[{int(k)}]", d, "indicator", 1.0))
            out.append(("restart_epochs", d, "value", float(inc.size)))
        return out

    _drive(cid, params, n_grid, reps, seed, one, report)
    _fill_restart(report, delta_grid)
    return report


def _fill_restart(report: DiagnosticsReport, delta_grid):
    """Complete the sparse exceedance cells with zeros and record the
    worst-over-k probability as ``restart_worst`` (indicator cell of the
    maximizing k, ties to the smallest k)."""
    reps = sorted({r for c in report.cells.values() for r in c.values})
    for n in report.n_values:
        for d in delta_grid:
            pk = _pkey(d)
            ks = sorted(int(f[len("restart_exceeds["):-1]) for (nn, f, p) in report.cells
                        if nn == n and p == pk and f.startswith("restart_exceeds["))
            best_k, best_p = None, -1.0
            for k in ks:
                cell = report.cells[(n, f"restart_exceeds[{k}]", pk)]
                for r in reps:
                    cell.values.setdefault(r, 0.0)
                p = sum(cell.values.values()) / len(reps)
                if p > best_p:
                    best_k, best_p = k, p
            cell = _Cell("indicator")
            for r in reps:
                cell.values[r] = 0.0 if best_k is None else report.cells[(n, f"restart_exceeds[{best_k}]", pk)].values[r]
            report.cells[(n, "restart_worst", pk)] = cell


def tightness_report(source, theta_grid: Sequence[float], T: float, n_grid: Sequence[int], replicas: int = 200,
                     seed: int = 0, replica_offset: int = 0, path: str = "X") -> DiagnosticsReport:
    """Quantile surfaces of w', w'' (and its three-point part) per
    (n, theta), and ``|X|*_T`` per n."""
    cid, params = _source(source)
    if cid not in CONSTRUCTIONS:
        raise UnknownConstruction(f"unknown construction {cid!r}")
    reps = _reps(replicas, replica_offset)
    meta = _meta("tightness", cid, params, seed, {"T": T, "theta_grid": list(theta_grid), "path": path}, reps)
    report = DiagnosticsReport(meta)

    def one(c, n):
        X = _role(c, path)
        out = [("sup_norm", None, "value", sup_norm(X, T))]
        for th in theta_grid:
            out.append(("w_prime", th, "value", _m.w_prime(X, th, T)))
            out.append(("w_dprime", th, "value", _m.w_dprime(X, th, T)))
            out.append(("v_tilde", th, "value", _m.v_tilde(X, th, T)))
        return out

    return _drive(cid, params, n_grid, reps, seed, one, report)


# ---------------------------------------------------------------------- trends


class TrendSummary(NamedTuple):
    functional: str
    param: str
    ns: tuple
    medians: tuple
    verdict: str  # increasing | decreasing | flat | inconclusive
    slope: float | None  # least-squares slope of log|median| on log n
    residual: float | None


def _trend(functional, param, ns, med, lo, hi) -> TrendSummary:
    if len(ns) < 3:
        raise InsufficientData("a trend needs at least 3 values of n")
    order = np.argsort(ns)
    ns, med, lo, hi = (np.asarray(a, dtype=float)[order] for a in (ns, med, lo, hi))
    if np.all(med == med[0]):
        verdict = "flat"
    elif all(lo[k + 1] > hi[k] for k in range(len(ns) - 1)):
        verdict = "increasing"
    elif all(hi[k + 1] < lo[k] for k in range(len(ns) - 1)):
        verdict = "decreasing"
    else:
        verdict = "inconclusive"
    slope = residual = None
    if np.all(med != 0):
        A = np.vstack([np.log(ns), np.ones(len(ns))]).T
        y = np.log(np.abs(med))
        coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
        slope = float(coef[0])
        residual = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return TrendSummary(functional, param, tuple(int(n) for n in ns), tuple(float(m) for m in med), verdict, slope, residual)


def convergence_trend(reports) -> dict[str, TrendSummary]:
    """Monotonicity verdict and log-log slope of medians along n.

    Accepts one report, a list of reports (merged by n), or a mapping
    ``n -> median`` / ``n -> samples`` for a single unnamed functional.
    """
    if isinstance(reports, Mapping):
        ns = sorted(reports)
        med, lo, hi = [], [], []
        for n in ns:
            v = np.atleast_1d(np.asarray(reports[n], dtype=float))
            if v.size == 1:
                med.append(float(v[0])); lo.append(float(v[0])); hi.append(float(v[0]))
            else:
                s = _value_stats(v)
                med.append(s["median"]); lo.append(s["median_lo"]); hi.append(s["median_hi"])
        return {"value": _trend("value", "", ns, med, lo, hi)}
    if isinstance(reports, DiagnosticsReport):
        reports = [reports]
    merged: dict[tuple, dict] = {}
    for rep in reports:
        for (n, f, p), cell in rep.cells.items():
            if cell.kind != "value":
                continue
            merged.setdefault((f, p), {})[n] = rep.stats(n, f, p)
    out = {}
    for (f, p), by_n in sorted(merged.items()):
        ns = sorted(by_n)
        if len(ns) < 3:
            continue
        st = [by_n[n] for n in ns]
        label = f if not p else f"{f}[{p}]"
        out[label] = _trend(f, p, ns, [s["median"] for s in st], [s["median_lo"] for s in st], [s["median_hi"] for s in st])
    if not out:
        raise InsufficientData("no functional has values at 3 or more n")
    return out
