"""Compiled inner loops for the metrics module."""

import math

import numpy as np
from numba import njit

_INF = np.inf


@njit(cache=True)
def _ground(pv, pt, qv, qt):
    s = 0.0
    for k in range(pv.shape[0]):
        d = pv[k] - qv[k]
        s += d * d
    return max(math.sqrt(s), abs(pt - qt))


@njit(cache=True)
def _free_interval(av, at, bv, bt, qv, qt, eps):
    """Parameters s in [0,1] with ground(a + s(b-a), q) <= eps."""
    lo, hi = 0.0, 1.0
    # Euclidean part: A s^2 + B s + C <= 0
    A = 0.0
    B = 0.0
    C = -eps * eps
    for k in range(av.shape[0]):
        dv = bv[k] - av[k]
        w = av[k] - qv[k]
        A += dv * dv
        B += 2.0 * w * dv
        C += w * w
    if A == 0.0:
        if C > 0.0:
            return 1.0, 0.0
    else:
        disc = B * B - 4.0 * A * C
        if disc < 0.0:
            return 1.0, 0.0
        r = math.sqrt(disc)
        s1 = (-B - r) / (2.0 * A)
        s2 = (-B + r) / (2.0 * A)
        lo = max(lo, s1)
        hi = min(hi, s2)
    # time part: |w + s dt| <= eps
    dt = bt - at
    w = at - qt
    if dt == 0.0:
        if abs(w) > eps:
            return 1.0, 0.0
    else:
        s1 = (-eps - w) / dt
        s2 = (eps - w) / dt
        if s1 > s2:
            s1, s2 = s2, s1
        lo = max(lo, s1)
        hi = min(hi, s2)
    return lo, hi


@njit(cache=True)
def frechet_decide(PV, PT, QV, QT, eps):
    """Free-space reachability: is the Frechet distance <= eps?

    Per-cell free space is convex because the ground metric is a norm of
    an affine map of the two segment parameters, so propagating the
    lowest reachable point of each cell boundary is exact.
    """
    m = PT.shape[0]
    n = QT.shape[0]
    if _ground(PV[0], PT[0], QV[0], QT[0]) > eps:
        return False
    if _ground(PV[m - 1], PT[m - 1], QV[n - 1], QT[n - 1]) > eps:
        return False
    # vertical edges: P vertex i, Q segment j (param t); horizontal: P seg i, Q vertex j
    Vlo = np.empty((m, n - 1))
    Vhi = np.empty((m, n - 1))
    Hlo = np.empty((m - 1, n))
    Hhi = np.empty((m - 1, n))
    for i in range(m):
        for j in range(n - 1):
            lo, hi = _free_interval(QV[j], QT[j], QV[j + 1], QT[j + 1], PV[i], PT[i], eps)
            Vlo[i, j] = lo
            Vhi[i, j] = hi
    for i in range(m - 1):
        for j in range(n):
            lo, hi = _free_interval(PV[i], PT[i], PV[i + 1], PT[i + 1], QV[j], QT[j], eps)
            Hlo[i, j] = lo
            Hhi[i, j] = hi
    RVlo = np.full((m, n - 1), 2.0)
    RVhi = np.full((m, n - 1), -1.0)
    RHlo = np.full((m - 1, n), 2.0)
    RHhi = np.full((m - 1, n), -1.0)
    ok = True
    for j in range(n - 1):
        if ok and Vlo[0, j] <= 0.0 and Vhi[0, j] >= 0.0:
            RVlo[0, j] = 0.0
            RVhi[0, j] = Vhi[0, j]
            ok = Vhi[0, j] >= 1.0
        else:
            ok = False
    ok = True
    for i in range(m - 1):
        if ok and Hlo[i, 0] <= 0.0 and Hhi[i, 0] >= 0.0:
            RHlo[i, 0] = 0.0
            RHhi[i, 0] = Hhi[i, 0]
            ok = Hhi[i, 0] >= 1.0
        else:
            ok = False
    for i in range(m - 1):
        for j in range(n - 1):
            left = RVlo[i, j] <= RVhi[i, j]
            bottom = RHlo[i, j] <= RHhi[i, j]
            # right edge
            if bottom:
                lo, hi = Vlo[i + 1, j], Vhi[i + 1, j]
            elif left:
                lo, hi = max(Vlo[i + 1, j], RVlo[i, j]), Vhi[i + 1, j]
            else:
                lo, hi = 2.0, -1.0
            if lo <= hi:
                RVlo[i + 1, j] = lo
                RVhi[i + 1, j] = hi
            # top edge
            if left:
                lo, hi = Hlo[i, j + 1], Hhi[i, j + 1]
            elif bottom:
                lo, hi = max(Hlo[i, j + 1], RHlo[i, j]), Hhi[i, j + 1]
            else:
                lo, hi = 2.0, -1.0
            if lo <= hi:
                RHlo[i, j + 1] = lo
                RHhi[i, j + 1] = hi
    if m >= 2 and RHlo[m - 2, n - 1] <= RHhi[m - 2, n - 1] and RHhi[m - 2, n - 1] >= 1.0:
        return True
    if n >= 2 and RVlo[m - 1, n - 2] <= RVhi[m - 1, n - 2] and RVhi[m - 1, n - 2] >= 1.0:
        return True
    return False


@njit(cache=True)
def j1_grid_cost(G, yidx, a, a_at_T, D, y_final):
    """Minimax cost of the best time change placing x-jumps on grid G.

    G[0] = 0 < ... < G[L] = T.  Cell k is [G[k], G[k+1]) with y segment
    yidx[k].  State i = number of x-jumps already placed.  The value is
    the true cost max(|lambda - id|, |x o lambda - y|) of a realizable
    piecewise-linear time change, hence an upper bound for d_J1.
    """
    p = a.shape[0]
    L = G.shape[0] - 1
    C = np.full(p + 1, _INF)
    C[0] = D[0, yidx[0]]
    new = np.empty(p + 1)
    for k in range(1, L):
        t = G[k]
        jcol = yidx[k]
        new[0] = max(D[0, jcol], C[0])
        for i in range(1, p + 1):
            stay = C[i]
            move = _INF
            if not a_at_T[i - 1]:
                move = max(C[i - 1], abs(t - a[i - 1]))
            best = min(stay, move)
            new[i] = max(D[i, jcol], best)
        for i in range(p + 1):
            C[i] = new[i]
    if p > 0 and a_at_T[p - 1]:
        return max(C[p - 1], D[p, y_final])
    return max(C[p], D[p, y_final])


@njit(cache=True)
def what_1d(g, h, x, umax, delta):
    """Exact consecutive-increment functional for one coordinate.

    Segments j carry (h[j], x[j]) on [g[j], g[j+1]).  A triple of segments
    js < jt < ju is admissible iff g[ju] - g[js+1] < delta, and umax[js]
    is the largest such ju.
    """
    K = g.shape[0]
    best = 0.0
    pref = np.empty(K)
    for jt in range(1, K - 1):
        top = umax[jt - 1]
        if top <= jt:
            continue
        run = 0.0
        for ju in range(jt + 1, top + 1):
            d = abs(x[jt] - x[ju])
            if d > run:
                run = d
            pref[ju] = run
        for js in range(jt - 1, -1, -1):
            u = umax[js]
            if u <= jt:
                break
            a = abs(h[js] - h[jt])
            v = a if a < pref[u] else pref[u]
            if v > best:
                best = v
    return best


@njit(cache=True)
def vtilde_1d(g, v, cmax):
    """Three-point deviation sup over segment triples a < b < c with
    g[c] - g[a+1] < 2 theta; cmax[a] is the largest admissible c."""
    K = v.shape[0]
    best = 0.0
    pmin = np.empty(K)
    pmax = np.empty(K)
    for b in range(1, K - 1):
        top = cmax[b - 1]
        if top <= b:
            continue
        lo = _INF
        hi = -_INF
        for c in range(b + 1, top + 1):
            if v[c] < lo:
                lo = v[c]
            if v[c] > hi:
                hi = v[c]
            pmin[c] = lo
            pmax[c] = hi
        for a in range(b - 1, -1, -1):
            c = cmax[a]
            if c <= b:
                break
            peak = v[b] - max(v[a], pmin[c])
            trough = min(v[a], pmax[c]) - v[b]
            d = max(peak, trough)
            if d > best:
                best = d
    return best


@njit(cache=True)
def _point_segment(p, a, b):
    d = b - a
    L2 = 0.0
    for k in range(d.shape[0]):
        L2 += d[k] * d[k]
    s = 0.0
    if L2 > 0.0:
        num = 0.0
        for k in range(d.shape[0]):
            num += (p[k] - a[k]) * d[k]
        s = min(1.0, max(0.0, num / L2))
    acc = 0.0
    for k in range(d.shape[0]):
        e = p[k] - a[k] - s * d[k]
        acc += e * e
    return math.sqrt(acc)


@njit(cache=True)
def vtilde_nd(v, cmax):
    K = v.shape[0]
    best = 0.0
    for a in range(K):
        for c in range(a + 2, cmax[a] + 1):
            for b in range(a + 1, c):
                d = _point_segment(v[b], v[a], v[c])
                if d > best:
                    best = d
    return best


@njit(cache=True)
def _break_index_1d(v, eta):
    """e[k] = first m > k with max-min of v[k..m] > eta, else K."""
    K = v.shape[0]
    e = np.empty(K, dtype=np.int64)
    # monotone deques of indices over the window [k, m)
    qmax = np.empty(K, dtype=np.int64)
    qmin = np.empty(K, dtype=np.int64)
    hmax = 0
    tmax = 0
    hmin = 0
    tmin = 0
    m = 0
    for k in range(K):
        if m < k:
            m = k
        while hmax < tmax and qmax[hmax] < k:
            hmax += 1
        while hmin < tmin and qmin[hmin] < k:
            hmin += 1
        while m < K:
            cur_max = v[m]
            cur_min = v[m]
            if hmax < tmax and v[qmax[hmax]] > cur_max:
                cur_max = v[qmax[hmax]]
            if hmin < tmin and v[qmin[hmin]] < cur_min:
                cur_min = v[qmin[hmin]]
            if cur_max - cur_min > eta:
                break
            while hmax < tmax and v[qmax[tmax - 1]] <= v[m]:
                tmax -= 1
            qmax[tmax] = m
            tmax += 1
            while hmin < tmin and v[qmin[tmin - 1]] >= v[m]:
                tmin -= 1
            qmin[tmin] = m
            tmin += 1
            m += 1
        e[k] = m
    return e


@njit(cache=True)
def _diam_exceeds(v, k, m, eta):
    for i in range(k, m + 1):
        for j in range(i + 1, m + 1):
            s = 0.0
            for c in range(v.shape[1]):
                d = v[i, c] - v[j, c]
                s += d * d
            if math.sqrt(s) > eta:
                return True
    return False


@njit(cache=True)
def _break_index_nd(v, eta):
    K = v.shape[0]
    e = np.empty(K, dtype=np.int64)
    m = 1
    for k in range(K):
        if m < k + 1:
            m = k + 1
        while m < K and not _diam_exceeds(v, k, m, eta):
            m += 1
        e[k] = m
    return e


@njit(cache=True)
def _wprime_feasible(b, e, theta):
    """Can [0, T) be cut into cells of length >= theta whose values stay
    within the tolerance encoded by the break indices e?

    b has K+1 entries (segment starts plus T).  Only the smallest
    reachable cell start in each segment matters, because later starts
    in the same segment reach a subset of the same ends.
    """
    K = e.shape[0]
    T = b[K]
    dq = np.empty(K, dtype=np.int64)
    key = np.empty(K)
    head = 0
    tail = 0
    mstart = np.full(K, _INF)
    mstart[0] = 0.0
    for j in range(K):
        if j > 0:
            while head < tail and e[dq[head]] < j:
                head += 1
            if head < tail:
                s = max(b[j], key[dq[head]])
                if s < b[j + 1]:
                    mstart[j] = s
        if mstart[j] < _INF:
            reach = mstart[j] + theta
            end = b[e[j]]
            if reach <= end:
                if e[j] == K:
                    return True
                key[j] = reach
                while head < tail and key[dq[tail - 1]] >= reach:
                    tail -= 1
                dq[tail] = j
                tail += 1
    return False


@njit(cache=True)
def wprime_search(b, v, theta, one_d, hi, iters):
    K = v.shape[0]
    if one_d:
        e0 = _break_index_1d(v[:, 0], 0.0)
    else:
        e0 = _break_index_nd(v, 0.0)
    if _wprime_feasible(b, e0, theta):
        return 0.0
    lo = 0.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if one_d:
            e = _break_index_1d(v[:, 0], mid)
        else:
            e = _break_index_nd(v, mid)
        if _wprime_feasible(b, e, theta):
            hi = mid
        else:
            lo = mid
    return hi
