"""Piecewise-constant cadlag paths and pathwise functionals.

A ``StepPath`` on ``[0, T]`` stores breakpoints ``0 = t_0 < ... < t_k <= T``
and one value vector per segment; ``values[i]`` holds on ``[t_i, t_{i+1})``
and the last segment is closed at ``T``.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    BadParameter,
    DimensionMismatch,
    HorizonExceeded,
    HorizonMismatch,
    NonFiniteValue,
    NonMonotoneTimes,
    OutOfHorizon,
    RefinementTooSmall,
)

__all__ = [
    "StepPath",
    "GraphPolyline",
    "ParamRep",
    "Jumps",
    "TotalVariation",
    "make_step_path",
    "constant_path",
    "indicator_path",
    "evaluate",
    "jumps",
    "total_variation",
    "truncate_jumps",
    "jump_remainder",
    "completed_graph",
    "param_rep",
    "normalize",
    "restrict",
    "extend",
    "merge_breakpoints",
    "combine",
    "add",
    "subtract",
    "scale",
    "amalgamate",
    "component",
    "sup_norm",
    "common_horizon",
    "to_json",
    "from_json",
    "to_csv",
    "from_csv",
    "write_path",
    "read_path",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class StepPath:
    """Finite piecewise-constant cadlag path in R^d on ``[0, horizon]``.

    Construct through :func:`make_step_path` for validation with the
    documented error types; direct construction validates too.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    horizon: float

    def __post_init__(self):
        t = np.array(self.breakpoints, dtype=float).reshape(-1)
        v = np.array(self.values, dtype=float)
        T = float(self.horizon)
        if v.ndim == 1:
            v = v.reshape(-1, 1)
        if not math.isfinite(T) or T <= 0:
            raise NonFiniteValue(f"horizon must be finite and positive, got {T!r}")
        if t.size == 0:
            raise NonMonotoneTimes("at least one breakpoint (t0 = 0) is required")
        if not np.all(np.isfinite(t)):
            raise NonFiniteValue("breakpoints must be finite")
        if t[0] != 0.0:
            raise NonMonotoneTimes(f"first breakpoint must be 0, got {t[0]!r}")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise NonMonotoneTimes("breakpoints must be strictly increasing")
        if t[-1] > T:
            raise HorizonExceeded(f"breakpoint {t[-1]!r} beyond horizon {T!r}")
        if v.ndim != 2 or v.shape[0] != t.size or v.shape[1] < 1:
            raise DimensionMismatch(
                f"values shape {v.shape} does not match {t.size} segments"
            )
        if not np.all(np.isfinite(v)):
            raise NonFiniteValue("values must be finite")
        object.__setattr__(self, "breakpoints", _frozen(t))
        object.__setattr__(self, "values", _frozen(v))
        object.__setattr__(self, "horizon", T)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def n_segments(self) -> int:
        return self.breakpoints.size

    def __call__(self, t, side: str = "right"):
        return evaluate(self, t, side)

    def __eq__(self, other):
        if not isinstance(other, StepPath):
            return NotImplemented
        return (
            self.horizon == other.horizon
            and np.array_equal(self.breakpoints, other.breakpoints)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    def __repr__(self):
        return (
            f"StepPath(dim={self.dim}, horizon={self.horizon!r}, "
            f"segments={self.n_segments})"
        )


def make_step_path(dim, horizon, breakpoints, values, normalize: bool = False) -> StepPath:
    """Validated constructor; ``normalize`` drops zero-size breakpoints."""
    v = np.array(values, dtype=float)
    if v.ndim == 1:
        v = v.reshape(-1, 1) if dim == 1 else v.reshape(1, -1)
    if v.ndim != 2 or v.shape[1] != int(dim):
        raise DimensionMismatch(f"values have shape {v.shape}, expected (k+1, {dim})")
    p = StepPath(np.asarray(breakpoints, dtype=float), v, horizon)
    return _normalize(p) if normalize else p


def constant_path(c, horizon: float) -> StepPath:
    c = np.atleast_1d(np.asarray(c, dtype=float))
    return StepPath(np.zeros(1), c.reshape(1, -1), horizon)


def indicator_path(start: float, horizon: float, height=1.0, end: float | None = None) -> StepPath:
    """``height * 1_[start, end)`` (``end=None`` means up to and including T)."""
    h = np.atleast_1d(np.asarray(height, dtype=float))
    zero = np.zeros_like(h)
    if start <= 0:
        t, v = [0.0], [h]
    else:
        t, v = [0.0, start], [zero, h]
    if end is not None and end <= horizon:
        t.append(end)
        v.append(zero)
    return StepPath(np.array(t), np.array(v), horizon)


# ---------------------------------------------------------------- evaluation


def evaluate(path: StepPath, t, side: str = "right"):
    """Value at ``t``; ``side='left'`` gives the left limit (x(0-) = x(0))."""
    ts = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(ts)) or np.any(ts < 0) or np.any(ts > path.horizon):
        raise OutOfHorizon(f"time outside [0, {path.horizon}]")
    if side == "right":
        idx = np.searchsorted(path.breakpoints, ts, side="right") - 1
    elif side == "left":
        idx = np.maximum(np.searchsorted(path.breakpoints, ts, side="left") - 1, 0)
    else:
        raise BadParameter(f"side must be 'right' or 'left', got {side!r}")
    return path.values[idx].copy()


def _segment_index(path: StepPath, ts: np.ndarray) -> np.ndarray:
    return np.searchsorted(path.breakpoints, ts, side="right") - 1


class Jumps(NamedTuple):
    times: np.ndarray
    sizes: np.ndarray

    def __len__(self):
        return self.times.size


def jumps(path: StepPath) -> Jumps:
    """Times and sizes of the nonzero jumps, sorted by time."""
    d = np.diff(path.values, axis=0)
    keep = np.any(d != 0, axis=1)
    return Jumps(path.breakpoints[1:][keep].copy(), d[keep])


class TotalVariation(NamedTuple):
    per_coordinate: np.ndarray
    total: float


def total_variation(path: StepPath, a: float = 0.0, b: float | None = None) -> TotalVariation:
    """Sum of |increments| at breakpoints in ``(a, b]``."""
    b = path.horizon if b is None else b
    if not (0 <= a <= b <= path.horizon):
        raise OutOfHorizon(f"need 0 <= a <= b <= T, got a={a}, b={b}")
    bp = path.breakpoints[1:]
    sel = (bp > a) & (bp <= b)
    inc = np.abs(np.diff(path.values, axis=0)[sel])
    per = np.array([math.fsum(inc[:, i]) for i in range(path.dim)])
    return TotalVariation(per, math.fsum(per))


def sup_norm(path: StepPath, T: float | None = None) -> float:
    """``|x|*_T``: max Euclidean norm over [0, T]."""
    p = path if T is None else restrict(path, T)
    return float(np.max(np.linalg.norm(p.values, axis=1)))


# ---------------------------------------------------------- jump truncation


def truncate_jumps(path: StepPath, delta: float) -> StepPath:
    """The pure-jump path keeping the excess over ``delta`` of every jump."""
    if not delta > 0:
        raise BadParameter("delta must be positive")
    times, sizes = jumps(path)
    zero = np.zeros((1, path.dim))
    if math.isinf(delta) or times.size == 0:
        return StepPath(np.zeros(1), zero, path.horizon)
    norms = np.linalg.norm(sizes, axis=1)
    factor = np.maximum(1.0 - delta / norms, 0.0)
    keep = factor > 0
    kept = sizes[keep] * factor[keep, None]
    vals = np.vstack([zero, np.cumsum(kept, axis=0)])
    return StepPath(np.concatenate([[0.0], times[keep]]), vals, path.horizon)


def jump_remainder(path: StepPath, delta: float) -> StepPath:
    """``x - J_delta(x)``: every jump of the result has norm at most delta."""
    return subtract(path, truncate_jumps(path, delta))


# ------------------------------------------------------------ path algebra


def common_horizon(paths: Sequence[StepPath], extend_paths: bool = False) -> float:
    hs = {p.horizon for p in paths}
    if len(hs) == 1:
        return hs.pop()
    if not extend_paths:
        raise HorizonMismatch(f"paths have different horizons {sorted(hs)}; pass extend=True")
    return max(hs)


def merge_breakpoints(*paths: StepPath) -> np.ndarray:
    return np.unique(np.concatenate([p.breakpoints for p in paths]))


def restrict(path: StepPath, T: float) -> StepPath:
    """Restriction to ``[0, T]`` for ``0 < T <= horizon``."""
    if not 0 < T <= path.horizon:
        raise OutOfHorizon(f"cannot restrict horizon {path.horizon} to {T}")
    if T == path.horizon:
        return path
    k = np.searchsorted(path.breakpoints, T, side="right")
    return StepPath(path.breakpoints[:k], path.values[:k], T)


def extend(path: StepPath, T: float) -> StepPath:
    """Constant extension beyond the horizon."""
    if T < path.horizon:
        raise BadParameter("extension target is before the horizon")
    if T == path.horizon:
        return path
    return StepPath(path.breakpoints, path.values, T)


def _align(paths: Sequence[StepPath], extend_paths: bool):
    T = common_horizon(paths, extend_paths)
    ps = [extend(p, T) for p in paths]
    grid = merge_breakpoints(*ps)
    return T, grid, [p.values[_segment_index(p, grid)] for p in ps]


def combine(fn, *paths: StepPath, extend: bool = False) -> StepPath:
    """Apply ``fn`` to segment values on the merged grid."""
    T, grid, vals = _align(paths, extend)
    out = np.asarray(fn(*vals), dtype=float)
    if out.ndim == 1:
        out = out.reshape(-1, 1)
    return StepPath(grid, out, T)


def _check_broadcast(x: StepPath, y: StepPath):
    if x.dim != y.dim and 1 not in (x.dim, y.dim):
        raise DimensionMismatch(f"dimensions {x.dim} and {y.dim} are incompatible")


def add(x: StepPath, y: StepPath, extend: bool = False) -> StepPath:
    _check_broadcast(x, y)
    return combine(np.add, x, y, extend=extend)


def subtract(x: StepPath, y: StepPath, extend: bool = False) -> StepPath:
    _check_broadcast(x, y)
    return combine(np.subtract, x, y, extend=extend)


def scale(path: StepPath, c) -> StepPath:
    return StepPath(path.breakpoints, path.values * np.asarray(c, dtype=float), path.horizon)


def amalgamate(*paths: StepPath, extend: bool = False) -> StepPath:
    """Stack paths into one R^(d1+d2+...) path on the merged grid."""
    return combine(lambda *v: np.hstack(v), *paths, extend=extend)


def component(path: StepPath, i) -> StepPath:
    idx = np.atleast_1d(i)
    return StepPath(path.breakpoints, path.values[:, idx], path.horizon)


def _normalize(path: StepPath) -> StepPath:
    keep = np.concatenate([[True], np.any(np.diff(path.values, axis=0) != 0, axis=1)])
    return StepPath(path.breakpoints[keep], path.values[keep], path.horizon)


def normalize(path: StepPath) -> StepPath:
    """Drop breakpoints carrying a zero-size jump."""
    return _normalize(path)


# --------------------------------------------------------- completed graph


@dataclass(frozen=True, eq=False)
class GraphPolyline:
    """Vertices of the completed graph in traversal order.

    ``values[j]`` and ``times[j]`` form vertex j.  Between consecutive
    vertices either the time moves (flat piece) or the value moves
    (a jump segment at fixed time, traversed from left limit to value).
    """

    values: np.ndarray
    times: np.ndarray
    provenance: StepPath | None = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(np.array(self.values, dtype=float)))
        object.__setattr__(self, "times", _frozen(np.array(self.times, dtype=float)))

    @property
    def vertices(self) -> list[tuple[np.ndarray, float]]:
        return [(self.values[j], float(self.times[j])) for j in range(self.times.size)]

    def __len__(self):
        return self.times.size


def completed_graph(path: StepPath) -> GraphPolyline:
    v = path.values
    idx = 1 + np.flatnonzero(np.any(np.diff(v, axis=0) != 0, axis=1))
    n_j = idx.size
    vals = np.empty((2 * n_j + 2, path.dim))
    times = np.empty(2 * n_j + 2)
    vals[0], times[0] = v[0], 0.0
    vals[1:-1:2], vals[2:-1:2] = v[idx - 1], v[idx]
    times[1:-1:2] = times[2:-1:2] = path.breakpoints[idx]
    vals[-1], times[-1] = v[-1], path.horizon
    # a jump at T makes the closing vertex a duplicate
    if n_j and times[-2] == path.horizon:
        vals, times = vals[:-1], times[:-1]
    return GraphPolyline(vals, times, path)


@dataclass(frozen=True, eq=False)
class ParamRep:
    """Sampled parametric representation ``(u, r)`` on a parameter grid."""

    grid: np.ndarray
    u: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        g = np.array(self.grid, dtype=float)
        u = np.array(self.u, dtype=float)
        r = np.array(self.r, dtype=float)
        if u.ndim == 1:
            u = u.reshape(-1, 1)
        if not (g.size == u.shape[0] == r.size) or g.size < 2:
            raise DimensionMismatch("grid, u and r must have equal length >= 2")
        object.__setattr__(self, "grid", _frozen(g))
        object.__setattr__(self, "u", _frozen(u))
        object.__setattr__(self, "r", _frozen(r))

    @property
    def dim(self) -> int:
        return self.u.shape[1]


def param_rep(path: StepPath, refinement: int) -> ParamRep:
    """Arclength-uniform sampling of the completed graph with K+1 points.

    Every graph vertex is one of the samples; the remaining samples are
    spread over the segments in proportion to their length.
    """
    poly = completed_graph(path)
    m = len(poly)
    K = int(refinement)
    if K < m:
        raise RefinementTooSmall(f"refinement {K} is below the vertex count {m}")
    seg = np.hypot(
        np.linalg.norm(np.diff(poly.values, axis=0), axis=1), np.diff(poly.times)
    )
    total = seg.sum()
    extra = K + 1 - m
    # largest-remainder allocation of interior samples per segment
    quota = extra * seg / total
    alloc = np.floor(quota).astype(int)
    rest = extra - alloc.sum()
    if rest:
        order = np.argsort(-(quota - alloc), kind="stable")
        alloc[order[:rest]] += 1
    cum = np.concatenate([[0.0], np.cumsum(seg)]) / total
    grid, u, r = [], [], []
    for j in range(m - 1):
        k = alloc[j] + 1
        fr = np.arange(k) / k
        grid.append(cum[j] + fr * (cum[j + 1] - cum[j]))
        u.append(poly.values[j] + fr[:, None] * (poly.values[j + 1] - poly.values[j]))
        r.append(poly.times[j] + fr * (poly.times[j + 1] - poly.times[j]))
    grid.append([1.0])
    u.append(poly.values[-1:])
    r.append(poly.times[-1:])
    return ParamRep(np.concatenate(grid), np.vstack(u), np.concatenate(r))


# ---------------------------------------------------------------------- IO


def to_json(path: StepPath) -> str:
    # repr of a Python float round-trips exactly, and json uses it
    return json.dumps(
        {
            "dim": path.dim,
            "horizon": path.horizon,
            "breakpoints": path.breakpoints.tolist(),
            "values": path.values.tolist(),
        }
    )


def from_json(text: str) -> StepPath:
    try:
        obj = json.loads(text)
        return make_step_path(obj["dim"], obj["horizon"], obj["breakpoints"], obj["values"])
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise BadParameter(f"malformed path JSON: {exc}") from exc


def to_csv(path: StepPath) -> str:
    buf = io.StringIO()
    buf.write(f"# horizon={path.horizon!r}\n")
    buf.write(",".join(["t"] + [f"v{i + 1}" for i in range(path.dim)]) + "\n")
    for t, v in zip(path.breakpoints, path.values):
        buf.write(",".join(repr(float(a)) for a in (t, *v)) + "\n")
    return buf.getvalue()


def from_csv(text: str) -> StepPath:
    horizon = None
    rows = []
    header = None
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if "horizon=" in line:
                horizon = float(line.split("horizon=", 1)[1])
            continue
        if header is None:
            header = line.split(",")
            if header[0] != "t":
                raise BadParameter("CSV header must start with 't'")
            continue
        rows.append([float(a) for a in line.split(",")])
    if header is None or not rows:
        raise BadParameter("empty path CSV")
    arr = np.array(rows)
    if arr.shape[1] != len(header):
        raise DimensionMismatch("CSV rows do not match the header")
    t, v = arr[:, 0], arr[:, 1:]
    if horizon is None:
        horizon = float(t[-1]) if t[-1] > 0 else 1.0
    return make_step_path(v.shape[1], horizon, t, v)


def write_path(path: StepPath, filename: str) -> None:
    text = to_csv(path) if str(filename).endswith(".csv") else to_json(path)
    with open(filename, "w") as fh:
        fh.write(text)


def read_path(filename: str) -> StepPath:
    with open(filename) as fh:
        text = fh.read()
    return from_csv(text) if str(filename).endswith(".csv") else from_json(text)
