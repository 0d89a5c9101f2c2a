"""Distances and moduli on the space of step paths.

Uniform, J1 and M1 distances on ``[0, T]``, the exponentially weighted
half-line distance, the oscillation moduli ``w'`` and ``w''``, the
consecutive-increment functional and the large-increment counter.

For step paths every supremum below is attained on the merged
breakpoint grid: between breakpoints both paths are constant, so any
time inside a segment can be replaced by any other time in the same
segment without changing the quantity.  The only subtlety is that a
segment ``[g_j, g_{j+1})`` is open on the right, which turns window
constraints on time differences into strict inequalities on breakpoint
differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import BadParameter, DimensionMismatch, RefinementTooSmall
from .paths import (
    StepPath,
    _segment_index,
    common_horizon,
    completed_graph,
    extend,
    jumps,
    merge_breakpoints,
    restrict,
)

__all__ = [
    "MetricOptions",
    "uniform_distance",
    "j1_distance",
    "m1_distance",
    "weak_m1_distance",
    "frechet_distance",
    "halfline_distance",
    "w_prime",
    "w_dprime",
    "v_tilde",
    "v_bar",
    "consecutive_increment",
    "increment_count",
    "oscillation",
]


@dataclass(frozen=True)
class MetricOptions:
    tolerance: float = 1e-6
    mode: str = "exact"
    base_metric: str = "uniform"
    T_max: float = 20.0
    Q: int = 256

    def __post_init__(self):
        if not self.tolerance > 0:
            raise BadParameter("tolerance must be positive")
        if self.mode not in ("exact", "upper_bound"):
            raise BadParameter(f"unknown mode {self.mode!r}")
        if self.base_metric not in ("uniform", "J1", "M1"):
            raise BadParameter(f"unknown base metric {self.base_metric!r}")
        if not self.T_max > 0:
            raise BadParameter("T_max must be positive")
        if self.Q < 2:
            raise BadParameter("Q must be at least 2")


DEFAULT = MetricOptions()


def _kern():
    from . import _kernels

    return _kernels


def _pair(x: StepPath, y: StepPath, T: float | None, extend_paths: bool = False):
    if x.dim != y.dim:
        raise DimensionMismatch(f"dimensions {x.dim} and {y.dim} differ")
    if T is None:
        T = common_horizon([x, y], extend_paths)
    if extend_paths:
        x = extend(x, max(x.horizon, T))
        y = extend(y, max(y.horizon, T))
    return restrict(x, T), restrict(y, T), T


# ------------------------------------------------------------------ uniform


def uniform_distance(x: StepPath, y: StepPath, T: float | None = None, extend: bool = False) -> float:
    x, y, T = _pair(x, y, T, extend)
    g = merge_breakpoints(x, y)
    diff = x.values[_segment_index(x, g)] - y.values[_segment_index(y, g)]
    return float(np.max(np.linalg.norm(diff, axis=1)))


# ----------------------------------------------------------------------- J1


def _jump_structure(p: StepPath):
    times, _ = jumps(p)
    idx = np.concatenate([[0], np.searchsorted(p.breakpoints, times)])
    return times, p.values[idx]


def _j1_decide(a, v, b, w, D, T, eps):
    """Lattice reachability for d_J1 <= eps.

    State (i, j): x has made i jumps (under the time change), y has made
    j.  Moving i alone places x-jump i+1 inside the closure of y-segment
    j; moving both places it exactly on y-jump j+1.  A time change fixes
    0 and T, so a jump at T can only be matched to time T.
    """
    p, q = a.size, b.size
    seg_lo = np.concatenate([[0.0], b])
    seg_hi = np.concatenate([b, [T]])
    ok = D <= eps
    R = np.zeros((p + 1, q + 1), dtype=bool)
    R[0, 0] = ok[0, 0]
    for i in range(p + 1):
        for j in range(q + 1):
            if not R[i, j]:
                continue
            if j < q and ok[i, j + 1]:
                R[i, j + 1] = True
            if i < p:
                ai = a[i]
                if ok[i + 1, j]:
                    if ai == T:
                        horiz = j == q
                    else:
                        horiz = (
                            seg_lo[j] < seg_hi[j]
                            and max(seg_lo[j], ai - eps) <= min(seg_hi[j], ai + eps)
                        )
                    if horiz:
                        R[i + 1, j] = True
                if j < q and ok[i + 1, j + 1]:
                    bj = b[j]
                    if (ai == T) == (bj == T) and abs(ai - bj) <= eps:
                        R[i + 1, j + 1] = True
    return bool(R[p, q])


def _norm_matrix(v, w):
    return np.linalg.norm(v[:, None, :] - w[None, :, :], axis=2)


def _j1_exact(x: StepPath, y: StepPath, T: float) -> float:
    a, v = _jump_structure(x)
    b, w = _jump_structure(y)
    D = _norm_matrix(v, w)
    cand = np.unique(np.concatenate([[0.0], D.ravel(), np.abs(a[:, None] - b[None, :]).ravel()]))
    lo, hi = 0, cand.size - 1
    # the largest candidate is always feasible: it dominates every
    # value mismatch and every |a_i - b_j| (so the identity works too)
    while lo < hi:
        mid = (lo + hi) // 2
        if _j1_decide(a, v, b, w, D, T, cand[mid]):
            hi = mid
        else:
            lo = mid + 1
    return float(cand[lo])


def _j1_grid(x: StepPath, y: StepPath, T: float, h: float) -> float:
    a, v = _jump_structure(x)
    b, w = _jump_structure(y)
    D = _norm_matrix(v, w)
    n = max(1, int(math.ceil(T / h)))
    G = np.unique(np.concatenate([np.linspace(0.0, T, n + 1), b, a, [0.0, T]]))
    G = G[(G >= 0) & (G <= T)]
    yidx = np.searchsorted(b, G[:-1], side="right")
    return float(
        _kern().j1_grid_cost(G, yidx, a, a == T, D, int(np.searchsorted(b, T, side="right")))
    )


def j1_distance(x: StepPath, y: StepPath, T: float | None = None, opts: MetricOptions = DEFAULT, extend: bool = False) -> float:
    """Skorokhod J1 distance on ``[0, T]``.

    ``exact`` mode returns the infimum over time changes.  The optimum is
    determined by which x-jumps are placed on which y-segments (or on
    which y-jumps); feasibility for a level eps is a reachability
    question on the lattice of jump counts, and the infimum is one of
    the finitely many pairwise value mismatches or jump-time gaps, so a
    binary search over those candidates is exact.  ``upper_bound`` mode
    evaluates the best time change whose x-jump images lie on a grid of
    spacing ``opts.tolerance``; it is an independent check of the
    lattice search.
    """
    x, y, T = _pair(x, y, T, extend)
    if opts.mode == "exact":
        return _j1_exact(x, y, T)
    return _j1_grid(x, y, T, opts.tolerance)


# ----------------------------------------------------------------------- M1


def _frechet(PV, PT, QV, QT, tol):
    k = _kern()
    PV = np.ascontiguousarray(PV, dtype=float)
    QV = np.ascontiguousarray(QV, dtype=float)
    PT = np.ascontiguousarray(PT, dtype=float)
    QT = np.ascontiguousarray(QT, dtype=float)
    end0 = max(np.linalg.norm(PV[0] - QV[0]), abs(PT[0] - QT[0]))
    end1 = max(np.linalg.norm(PV[-1] - QV[-1]), abs(PT[-1] - QT[-1]))
    lo = max(end0, end1)
    if k.frechet_decide(PV, PT, QV, QT, lo):
        return float(lo)
    # every coupling stays within the largest vertex-to-vertex distance
    hi = float(
        np.max(
            np.maximum(
                np.linalg.norm(PV[:, None, :] - QV[None, :, :], axis=2),
                np.abs(PT[:, None] - QT[None, :]),
            )
        )
    )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if k.frechet_decide(PV, PT, QV, QT, mid):
            hi = mid
        else:
            lo = mid
    return hi


def frechet_distance(P, Q, tolerance: float = 1e-6) -> float:
    """Frechet distance of two (value, time) polylines, ground metric
    ``max(|value difference|, |time difference|)``; returns an upper
    bound within ``tolerance``."""
    return _frechet(P.values, P.times, Q.values, Q.times, tolerance)


def m1_distance(x: StepPath, y: StepPath, T: float | None = None, opts: MetricOptions = DEFAULT, extend: bool = False) -> float:
    """Strong M1 distance on ``[0, T]``.

    Parametric representations of a step path are exactly the monotone
    traversals of its completed-graph polyline, so the infimum over pairs
    of representations is the Frechet distance of the two polylines.
    Bisection on the free-space decision procedure stops once the
    bracket is below ``opts.tolerance``; the upper end is returned.
    """
    x, y, T = _pair(x, y, T, extend)
    if opts.tolerance <= 0:
        raise RefinementTooSmall("tolerance must be positive")
    P, Q = completed_graph(x), completed_graph(y)
    return _frechet(P.values, P.times, Q.values, Q.times, opts.tolerance)


def weak_m1_distance(x: StepPath, y: StepPath, T: float | None = None, opts: MetricOptions = DEFAULT, extend: bool = False) -> float:
    """Product (coordinatewise) M1 distance: max over coordinates.

    Experimental: representations may differ across coordinates.
    """
    x, y, T = _pair(x, y, T, extend)
    out = 0.0
    for i in range(x.dim):
        xi = StepPath(x.breakpoints, x.values[:, [i]], T)
        yi = StepPath(y.breakpoints, y.values[:, [i]], T)
        out = max(out, m1_distance(xi, yi, T, opts))
    return out


# ---------------------------------------------------------------- half-line


_BASE = {"uniform": None, "J1": j1_distance, "M1": m1_distance}


def halfline_distance(x: StepPath, y: StepPath, opts: MetricOptions = DEFAULT, return_error: bool = False):
    """``int_0^inf e^{-T} (rho_T(x, y) ^ 1) dT`` with paths held constant
    after their horizons.

    The integrand only changes character at breakpoint times, so the
    trapezoid rule (linear in the integrand, exact in the weight) splits ``[0, T_max]`` there and evaluates one-sided
    values just inside each piece (never at a breakpoint).  On top of
    that sits a uniform grid of ``Q`` nodes.  The error estimate is the
    gap to the same rule on every other uniform node, and the tail
    beyond ``T_max`` adds at most ``e^{-T_max}``.
    """
    if x.dim != y.dim:
        raise DimensionMismatch(f"dimensions {x.dim} and {y.dim} differ")
    Tm = opts.T_max
    H = max(x.horizon, y.horizon, Tm)
    xe, ye = extend(x, H), extend(y, H)
    base = _BASE[opts.base_metric]
    sub = replace(opts, mode="exact")

    def f(T):
        if base is None:
            v = uniform_distance(xe, ye, T)
        else:
            v = base(xe, ye, T, sub)
        return min(v, 1.0)

    bps = merge_breakpoints(xe, ye)
    bps = bps[(bps > 0) & (bps < Tm)]
    uni = np.linspace(0.0, Tm, opts.Q)
    nodes = np.unique(np.concatenate([uni, bps]))
    is_bp = np.isin(nodes, bps)
    span = np.diff(nodes)
    jit = 1e-9 * min(float(span.min()), 1.0)

    cache = {}

    def val(T):
        key = float(T)
        if key not in cache:
            cache[key] = f(max(min(key, Tm), jit))
        return cache[key]

    def rule(keep):
        nd = nodes[keep]
        bp = is_bp[keep]
        total = 0.0
        for k in range(nd.size - 1):
            a, b = nd[k], nd[k + 1]
            fa = val(a + jit if (bp[k] or a == 0.0) else a)
            fb = val(b - jit if bp[k + 1] else b)
            # linear interpolation of the integrand, exact against e^{-T}
            L = b - a
            ea = math.exp(-a)
            m0 = -ea * math.expm1(-L)
            m1 = ea * (-math.expm1(-L) - L * math.exp(-L))
            total += fa * m0 + (fb - fa) / L * m1
        return total

    fine = rule(np.ones(nodes.size, dtype=bool))
    if not return_error:
        return fine
    on_uni = np.isin(nodes, uni)
    uni_rank = np.cumsum(on_uni) - 1
    keep = ~on_uni | (uni_rank % 2 == 0) | (nodes == Tm)
    coarse = rule(keep)
    return fine, abs(fine - coarse) + math.exp(-Tm)


# ------------------------------------------------------------------- moduli


def _segments(path: StepPath, T: float):
    p = restrict(path, T)
    return p.breakpoints, p.values


def oscillation(path: StepPath, a: float, b: float) -> float:
    """Diameter of the value set on the closed window ``[a, b]``."""
    i0 = _segment_index(path, np.array([a]))[0]
    i1 = _segment_index(path, np.array([b]))[0]
    return _diameter(path.values[i0 : i1 + 1])


def _diameter(v: np.ndarray) -> float:
    if v.shape[0] < 2:
        return 0.0
    if v.shape[1] == 1:
        return float(v.max() - v.min())
    return float(np.max(np.linalg.norm(v[:, None, :] - v[None, :, :], axis=2)))


def w_prime(x: StepPath, theta: float, T: float | None = None) -> float:
    """J1 modulus: min over partitions with cells of length >= theta of
    the largest within-cell oscillation (cells are half-open).

    For a tolerance eta, a cell starting in segment k may end anywhere
    up to the first jump time at which the value set would exceed eta;
    the reachable cell starts are propagated left to right, keeping only
    the earliest start per segment.  The minimal eta is then found by
    bisection to floating-point resolution.
    """
    T = x.horizon if T is None else T
    if not 0 < theta < T:
        raise BadParameter("need 0 < theta < T")
    bp, v = _segments(x, T)
    if bp.size > 1 and bp[-1] == T:
        # cells are [t_{i-1}, t_i): the value at T itself never counts
        bp, v = bp[:-1], v[:-1]
    b = np.concatenate([bp, [T]])
    hi = _diameter(v)
    if hi == 0.0:
        return 0.0
    return float(_kern().wprime_search(b, np.ascontiguousarray(v), float(theta), v.shape[1] == 1, hi * (1 + 1e-12), 200))


def v_tilde(x: StepPath, theta: float, T: float | None = None) -> float:
    """Largest distance from x(t2) to the segment [x(t1), x(t3)] over
    t1 < t2 < t3 with t3 - t1 <= 2 theta."""
    T = x.horizon if T is None else T
    g, v = _segments(x, T)
    K = g.size
    if K < 3:
        return 0.0
    # t1 < g[a+1] and t3 >= g[c] make segment triple (a, b, c) reachable
    # iff g[c] - g[a+1] < 2 theta
    nxt = np.concatenate([g[1:], [np.inf]])
    cmax = np.searchsorted(g, nxt + 2 * theta, side="left") - 1
    cmax = np.minimum(cmax, K - 1).astype(np.int64)
    k = _kern()
    if v.shape[1] == 1:
        return float(k.vtilde_1d(g, np.ascontiguousarray(v[:, 0]), cmax))
    return float(k.vtilde_nd(np.ascontiguousarray(v), cmax))


def v_bar(x: StepPath, t: float, theta: float, T: float | None = None) -> float:
    """Oscillation on the closed window ``[t - theta, t + theta] ∩ [0, T]``."""
    T = x.horizon if T is None else T
    return oscillation(restrict(x, T), max(0.0, t - theta), min(T, t + theta))


def w_dprime(x: StepPath, theta: float, T: float | None = None) -> float:
    """M1 modulus: max of the three-point term and the end oscillations."""
    T = x.horizon if T is None else T
    if not 0 < theta < T:
        raise BadParameter("need 0 < theta < T")
    return max(v_tilde(x, theta, T), v_bar(x, 0.0, theta, T), v_bar(x, T, theta, T))


# --------------------------------------------------- increment functionals


def consecutive_increment(h: StepPath, x: StepPath, delta: float, T: float | None = None, extend: bool = False) -> float:
    """sup over coordinates and s < t < u <= (s + delta) ^ T of
    ``|h(s) - h(t)| ^ |x(t) - x(u)|``.

    On the merged grid, s, t, u lie in segments js < jt < ju; since s can
    approach g[js+1] from below and u can sit at g[ju], the triple is
    admissible iff ``g[ju] - g[js+1] < delta``.
    """
    if not delta > 0:
        raise BadParameter("delta must be positive")
    h, x, T = _pair(h, x, T, extend)
    g = merge_breakpoints(h, x)
    K = g.size
    if K < 3:
        return 0.0
    hv = h.values[_segment_index(h, g)]
    xv = x.values[_segment_index(x, g)]
    nxt = np.concatenate([g[1:], [np.inf]])
    umax = np.minimum(np.searchsorted(g, nxt + delta, side="left") - 1, K - 1).astype(np.int64)
    k = _kern()
    best = 0.0
    for i in range(h.dim):
        best = max(best, float(k.what_1d(g, np.ascontiguousarray(hv[:, i]), np.ascontiguousarray(xv[:, i]), umax, float(delta))))
    return best


def increment_count(x: StepPath, delta: float, T: float | None = None) -> int:
    """Largest n with 0 <= s_1 <= t_1 <= s_2 <= ... <= t_n <= T and
    ``|x(t_i) - x(s_i)| >= delta``.

    Greedy is optimal: completing each increment as early as possible
    leaves the largest remaining interval (earliest-finish argument for
    chains of intervals).  The next increment may start where the
    previous one ended.
    """
    if not delta > 0:
        raise BadParameter("delta must be positive")
    T = x.horizon if T is None else T
    _, v = _segments(x, T)
    count = 0
    start = 0
    if v.shape[1] == 1:
        w = v[:, 0]
        lo = hi = w[0]
        for j in range(1, w.size):
            c = w[j]
            if c - lo >= delta or hi - c >= delta:
                count += 1
                lo = hi = c
            else:
                lo = min(lo, c)
                hi = max(hi, c)
        return count
    for j in range(1, v.shape[0]):
        if np.any(np.linalg.norm(v[start:j] - v[j], axis=1) >= delta):
            count += 1
            start = j
    return count
