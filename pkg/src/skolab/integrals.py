"""Simple integrals of step integrands, quadratic covariation and
discretization operators.

Integrands always enter through their left limits: the integral of h
against z jumps at s by ``h(s-) * (z(s) - z(s-))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadParameter, DimensionMismatch, InvalidRep, OutOfHorizon
from .paths import (
    GraphPolyline,
    ParamRep,
    StepPath,
    _segment_index,
    common_horizon,
    completed_graph,
    evaluate,
    extend as _extend,
    jumps,
    merge_breakpoints,
)

__all__ = [
    "Partition",
    "simple_integral",
    "dot_integral",
    "quad_covariation",
    "discretize_grid",
    "adaptive_partition",
    "discretization_gap",
    "integral_param_rep",
    "augmented_rep",
    "on_graph",
]


@dataclass(frozen=True, eq=False)
class Partition:
    times: np.ndarray
    kind: str = "deterministic_grid"

    def __post_init__(self):
        t = np.array(self.times, dtype=float).reshape(-1)
        if t.size == 0 or t[0] != 0.0:
            raise BadParameter("a partition starts at 0")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise BadParameter("partition times must be strictly increasing")
        if self.kind not in ("deterministic_grid", "adaptive"):
            raise BadParameter(f"unknown partition kind {self.kind!r}")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)

    @classmethod
    def uniform(cls, m: int, horizon: float) -> "Partition":
        return cls(np.arange(m) * (horizon / m))


def _as_partition(grid) -> Partition:
    return grid if isinstance(grid, Partition) else Partition(np.asarray(grid, dtype=float))


def _pair(h: StepPath, z: StepPath, extend_paths: bool):
    if h.dim != z.dim and h.dim != 1:
        raise DimensionMismatch(f"integrand dim {h.dim} vs integrator dim {z.dim}")
    T = common_horizon([h, z], extend_paths)
    return _extend(h, T), _extend(z, T), T


def simple_integral(h: StepPath, z: StepPath, t: float | None = None, extend: bool = False):
    """``int_0^t h(s-) dz(s)`` componentwise.

    Returns the integral process as a StepPath on z's breakpoints when
    ``t`` is None, else its value at ``t``.
    """
    h, z, T = _pair(h, z, extend)
    bp = z.breakpoints
    dz = np.diff(z.values, axis=0)
    hl = evaluate(h, bp[1:], side="left")
    inc = hl * dz
    vals = np.vstack([np.zeros((1, z.dim)), np.cumsum(inc, axis=0)])
    out = StepPath(bp, vals, T)
    if t is None:
        return out
    if not 0 <= t <= T:
        raise OutOfHorizon(f"t={t} outside [0, {T}]")
    return evaluate(out, t)


def dot_integral(h: StepPath, z: StepPath, t: float | None = None, extend: bool = False):
    """Sum of the componentwise integrals (the inner-product integral)."""
    I = simple_integral(h, z, None, extend)
    out = StepPath(I.breakpoints, I.values.sum(axis=1, keepdims=True), I.horizon)
    return out if t is None else evaluate(out, t)


def quad_covariation(x: StepPath, y: StepPath, extend: bool = False) -> StepPath:
    """``[x, y]_t = sum_{s <= t} dx(s) dy(s)`` componentwise."""
    if x.dim != y.dim and 1 not in (x.dim, y.dim):
        raise DimensionMismatch(f"dimensions {x.dim} and {y.dim} are incompatible")
    T = common_horizon([x, y], extend)
    x, y = _extend(x, T), _extend(y, T)
    g = merge_breakpoints(x, y)
    xv = x.values[_segment_index(x, g)]
    yv = y.values[_segment_index(y, g)]
    prod = np.diff(xv, axis=0) * np.diff(yv, axis=0)
    d = prod.shape[1]
    vals = np.vstack([np.zeros((1, d)), np.cumsum(prod, axis=0)])
    return StepPath(g, vals, T)



def discretize_grid(x: StepPath, grid) -> StepPath:
    """``I_rho(x) = sum_i x(s_i) 1_[s_i, s_{i+1})`` on the path's horizon."""
    s = _as_partition(grid).times
    if s[-1] > x.horizon:
        raise OutOfHorizon("grid extends beyond the horizon")
    return StepPath(s, evaluate(x, s), x.horizon)


def adaptive_partition(x: StepPath, grid, eps: float) -> Partition:
    """Refine each grid cell at the first times x moves by at least eps
    from its value at the current partition point.

    The last cell runs from the last grid time to the horizon.  A step
    path can only move at breakpoints, so the infimum over continuous
    time is a breakpoint (or the cell end).
    """
    if not eps > 0:
        raise BadParameter("eps must be positive")
    base = _as_partition(grid).times
    T = x.horizon
    if base[-1] > T:
        raise OutOfHorizon("grid extends beyond the horizon")
    bp = x.breakpoints
    vals = x.values
    out = [float(base[0])]
    ends = list(base[1:]) + [T]
    for k, end in enumerate(ends):
        tau = out[-1] if k == 0 else float(base[k])
        if k > 0:
            out.append(tau)
        i0 = np.searchsorted(bp, tau, side="right")
        ref = vals[i0 - 1]
        last_cell = k == len(ends) - 1
        for i in range(i0, bp.size):
            b = bp[i]
            if b > end or (b == end and not last_cell):
                break
            if np.linalg.norm(vals[i] - ref) >= eps:
                out.append(float(b))
                ref = vals[i]
    return Partition(np.array(out), "adaptive")


def discretization_gap(h: StepPath, x: StepPath, grid, eps: float, T: float | None = None, extend: bool = False) -> float:
    """Sup-norm over [0, T] of the difference between the integrals of
    the grid discretization and the adaptive discretization of h."""
    h, x, Th = _pair(h, x, extend)
    T = Th if T is None else T
    g = _as_partition(grid)
    coarse = simple_integral(discretize_grid(h, g), x)
    fine = simple_integral(discretize_grid(h, adaptive_partition(h, g, eps)), x)
    gg = merge_breakpoints(coarse, fine)
    gg = gg[gg <= T]
    diff = coarse.values[_segment_index(coarse, gg)] - fine.values[_segment_index(fine, gg)]
    return float(np.max(np.linalg.norm(diff, axis=1)))


# ------------------------------------------------ parametric representation


def integral_param_rep(rep: ParamRep, h_breaks) -> np.ndarray:
    """Integral coordinate of a representation of the pair (h, z).

    ``rep.u`` holds (h, z) side by side.  With partition times
    ``0 = t_1 < ... < t_{k+1} = T`` of h, let zbar_i be the last and
    zhat_i the first parameter mapped to time t_i.  Then
    ``u_int(p) = sum_i h(zhat_{i+1}) [z(p ^ zbar_{i+1}) - z(p ^ zbar_i)]``.
    Parameters are grid indices, so everything is evaluated on samples.
    """
    D = rep.dim
    if D % 2:
        raise InvalidRep("representation must stack (h, z) with equal dimensions")
    d = D // 2
    u1, u2, r = rep.u[:, :d], rep.u[:, d:], rep.r
    if np.any(np.diff(r) < 0):
        raise InvalidRep("time component must be nondecreasing")
    T = r[-1]
    tb = np.unique(np.concatenate([[0.0], np.asarray(h_breaks, dtype=float), [T]]))
    tb = tb[(tb >= 0) & (tb <= T)]
    first, last = [], []
    for t in tb:
        hit = np.flatnonzero(r == t)
        if hit.size == 0:
            # fine if h does not move there: splitting a cell at a time
            # where h is continuous leaves the sum unchanged
            i = int(np.searchsorted(r, t))
            if 0 < i < r.size and np.array_equal(u1[i - 1], u1[i]):
                continue
            raise InvalidRep(f"no sample of the representation at time {t}")
        first.append(hit[0])
        last.append(hit[-1])
    n = r.size
    idx = np.arange(n)
    out = np.zeros((n, d))
    for i in range(len(first) - 1):
        coef = u1[first[i + 1]]
        hi = np.minimum(idx, last[i + 1])
        lo = np.minimum(idx, last[i])
        out += coef * (u2[hi] - u2[lo])
    return out


def augmented_rep(rep: ParamRep, h_breaks) -> ParamRep:
    """The representation (h, z, int h- dz) built from one of (h, z)."""
    return ParamRep(rep.grid, np.hstack([rep.u, integral_param_rep(rep, h_breaks)]), rep.r)


def on_graph(poly: GraphPolyline, u: np.ndarray, r: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Whether each point (u[j], r[j]) lies on the polyline (within tol)."""
    u = np.atleast_2d(u)
    V, Tt = poly.values, poly.times
    res = np.zeros(u.shape[0], dtype=bool)
    for j in range(u.shape[0]):
        cand = np.flatnonzero((np.minimum(Tt[:-1], Tt[1:]) <= r[j] + tol) & (np.maximum(Tt[:-1], Tt[1:]) >= r[j] - tol))
        for s in cand:
            a, b = V[s], V[s + 1]
            if Tt[s] != Tt[s + 1]:
                # flat piece in time: value must equal the constant
                if np.linalg.norm(u[j] - a) <= tol:
                    res[j] = True
                    break
            else:
                d = b - a
                L2 = float(d @ d)
                lam = 0.0 if L2 == 0 else float(np.clip((u[j] - a) @ d / L2, 0, 1))
                if np.linalg.norm(u[j] - (a + lam * d)) <= tol:
                    res[j] = True
                    break
    return res
