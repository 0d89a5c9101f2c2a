"""Random and deterministic path constructions.

All generators are pure functions of their parameters and a seed.  The
seed is an int or a :class:`~skolab.rng.Seed`; each construction draws
from named streams (``"innovations"``, ``"signs"``, ``"waits"``, ...)
so adding a draw to one stream never shifts another.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .errors import BadParameter, MissingInternals, NotUncorrelated, UnknownConstruction, UnknownId
from .paths import StepPath, evaluate, indicator_path
from .rng import Seed, as_seed

__all__ = [
    "InnovationModel",
    "CtrwConfig",
    "CtrwSample",
    "Decomposition",
    "sample_innovations",
    "truncated_mean",
    "moving_average_path",
    "ctrw_path",
    "ctrw_decompose",
    "SingleJumpSample",
    "single_jump_martingale",
    "martingale_value",
    "compensator_path",
    "exploding_pair",
    "ExplodingSample",
    "crossing_pair",
    "CrossingSample",
    "deterministic_example",
    "deterministic_limit",
    "delayed_readout_integrand",
    "inverse_subordinator_path",
    "CONSTRUCTIONS",
    "construct",
]


# --------------------------------------------------------------- innovations

_KINDS = ("pareto_rademacher", "stable", "gaussian", "rademacher", "constant", "pareto_positive")


@dataclass(frozen=True)
class InnovationModel:
    """Law of i.i.d. innovations.

    ``pareto_rademacher``: sign * x_min * (1-U)^(-1/alpha).
    ``pareto_positive``: x_min * (1-U)^(-1/beta), beta in (0, 1).
    ``stable``: index alpha, skewness ``skew``, scale ``scale`` in the
    parameterization where the characteristic exponent for alpha != 1 is
    ``-|s u|^a (1 - i b sgn(u) tan(pi a / 2))``.
    """

    kind: str
    alpha: float | None = None
    beta: float | None = None
    x_min: float = 1.0
    skew: float = 0.0
    scale: float = 1.0
    sigma: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        k = self.kind
        if k not in _KINDS:
            raise BadParameter(f"unknown innovation kind {k!r}")
        if k in ("pareto_rademacher", "stable"):
            if self.alpha is None or not 0 < self.alpha <= 2:
                raise BadParameter("alpha must lie in (0, 2]")
        if k == "pareto_positive":
            if self.beta is None or not 0 < self.beta < 1:
                raise BadParameter("beta must lie in (0, 1)")
        if k.startswith("pareto") and not self.x_min > 0:
            raise BadParameter("x_min must be positive")
        if k == "stable":
            if not -1 <= self.skew <= 1:
                raise BadParameter("skew must lie in [-1, 1]")
            if not self.scale > 0:
                raise BadParameter("scale must be positive")
        if k == "gaussian" and not self.sigma > 0:
            raise BadParameter("sigma must be positive")
        if k == "constant" and not math.isfinite(self.c):
            raise BadParameter("constant must be finite")

    @classmethod
    def pareto_rademacher(cls, alpha: float, x_min: float = 1.0):
        return cls("pareto_rademacher", alpha=alpha, x_min=x_min)

    @classmethod
    def pareto_positive(cls, beta: float, x_min: float = 1.0):
        return cls("pareto_positive", beta=beta, x_min=x_min)

    @classmethod
    def stable(cls, alpha: float, skew: float = 0.0, scale: float = 1.0):
        return cls("stable", alpha=alpha, skew=skew, scale=scale)

    @classmethod
    def gaussian(cls, sigma: float = 1.0):
        return cls("gaussian", sigma=sigma)

    @classmethod
    def rademacher(cls):
        return cls("rademacher")

    @classmethod
    def constant(cls, c: float):
        return cls("constant", c=c)

    @property
    def symmetric(self) -> bool:
        if self.kind in ("pareto_rademacher", "gaussian", "rademacher"):
            return True
        if self.kind == "stable":
            return self.skew == 0.0
        return self.kind == "constant" and self.c == 0.0

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}

    @classmethod
    def from_dict(cls, d: dict) -> "InnovationModel":
        return cls(**d)


def _pareto_from_uniform(u: np.ndarray, index: float, x_min: float) -> np.ndarray:
    return x_min * (1.0 - u) ** (-1.0 / index)


def _signs(rng: np.random.Generator, count: int) -> np.ndarray:
    return np.where(rng.random(count) < 0.5, -1.0, 1.0)


def _stable(rng: np.random.Generator, count: int, a: float, b: float) -> np.ndarray:
    # trigonometric inversion: V uniform on (-pi/2, pi/2), W standard exponential
    V = math.pi * (rng.random(count) - 0.5)
    V = np.where(V <= -math.pi / 2, np.nextafter(-math.pi / 2, 0.0), V)
    W = rng.standard_exponential(count)
    if a == 1.0:
        hp = math.pi / 2
        return (1 / hp) * ((hp + b * V) * np.tan(V) - b * np.log(hp * W * np.cos(V) / (hp + b * V)))
    t = b * math.tan(math.pi * a / 2)
    B = math.atan(t) / a
    S = (1 + t * t) ** (1 / (2 * a))
    return S * np.sin(a * (V + B)) / np.cos(V) ** (1 / a) * (np.cos(V - a * (V + B)) / W) ** ((1 - a) / a)


def sample_innovations(model: InnovationModel, count: int, seed=0, component: str = "innovations") -> np.ndarray:
    """``count`` i.i.d. draws from ``model``."""
    if int(count) != count or count < 1:
        raise BadParameter("count must be a positive integer")
    count = int(count)
    s = as_seed(seed)
    rng = s.stream(component)
    k = model.kind
    if k == "constant":
        return np.full(count, float(model.c))
    if k == "rademacher":
        return _signs(rng, count)
    if k == "gaussian":
        return model.sigma * rng.standard_normal(count)
    if k == "pareto_positive":
        return _pareto_from_uniform(rng.random(count), model.beta, model.x_min)
    if k == "pareto_rademacher":
        mag = _pareto_from_uniform(rng.random(count), model.alpha, model.x_min)
        return _signs(s.stream(component + "/signs"), count) * mag
    return model.scale * _stable(rng, count, float(model.alpha), float(model.skew))


def truncated_mean(model: InnovationModel, a: float) -> float:
    """``E[a theta 1{|a theta| <= 1}]`` for theta drawn from ``model``."""
    if not a > 0:
        raise BadParameter("scale factor must be positive")
    if model.symmetric:
        return 0.0
    k = model.kind
    if k == "constant":
        v = a * model.c
        return v if abs(v) <= 1 else 0.0
    if k == "pareto_positive":
        b, xm = model.beta, model.x_min
        top = 1.0 / a
        if top <= xm:
            return 0.0
        return a * b * xm**b * (top ** (1 - b) - xm ** (1 - b)) / (1 - b)
    # skewed stable: numerical integration of the density
    from scipy import integrate
    from scipy.stats import levy_stable

    dist = levy_stable(model.alpha, model.skew, loc=0.0, scale=model.scale)
    dist.dist.parameterization = "S1"
    lim = 1.0 / a
    val, _ = integrate.quad(lambda x: x * dist.pdf(x), -lim, lim, limit=200)
    return a * val


# ------------------------------------------------------- moving averages/CTRW


@dataclass(frozen=True)
class CtrwConfig:
    """Correlated CTRW ``n^{-beta/alpha} sum_{k <= N(nt)} zeta_k`` with
    ``zeta_i = sum_j c_j theta_{i-j}``.

    ``beta=None`` means unit waits, ``N(nt) = floor(nt)``, and the jump
    scale ``n^{-1/alpha}``.  ``normalize`` divides zeta by ``sum c_j``.
    ``coupling='coupled'`` ties ``|theta_k|`` to the wait through the
    same uniform: ``J_k = x_min (1-U_k)^{-1/beta}`` and
    ``theta_k = sign_k (1-U_k)^{-1/alpha} = sign_k (J_k/x_min)^{beta/alpha}``.
    """

    alpha: float
    beta: float | None = None
    coeffs: tuple = (1.0,)
    coupling: str = "uncoupled"
    scale_n: int = 100
    horizon: float = 1.0
    innovation: InnovationModel | None = None
    wait_xmin: float = 1.0
    normalize: bool = True

    def __post_init__(self):
        if not 0 < self.alpha <= 2:
            raise BadParameter("alpha must lie in (0, 2]")
        if self.beta is not None and not 0 < self.beta < 1:
            raise BadParameter("beta must lie in (0, 1)")
        c = np.asarray(self.coeffs, dtype=float).reshape(-1)
        if c.size == 0 or not np.all(np.isfinite(c)) or np.any(c < 0):
            raise BadParameter("coefficients must be finite and nonnegative")
        if not c[0] > 0:
            raise BadParameter("c_0 must be positive")
        object.__setattr__(self, "coeffs", tuple(float(x) for x in c))
        if self.coupling not in ("uncoupled", "coupled"):
            raise BadParameter(f"unknown coupling {self.coupling!r}")
        if self.coupling == "coupled" and self.beta is None:
            raise BadParameter("coupled walks need random waits (beta)")
        if int(self.scale_n) != self.scale_n or self.scale_n < 1:
            raise BadParameter("scale_n must be a positive integer")
        object.__setattr__(self, "scale_n", int(self.scale_n))
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise BadParameter("horizon must be positive")
        if not self.wait_xmin > 0:
            raise BadParameter("wait_xmin must be positive")
        if self.innovation is None:
            object.__setattr__(self, "innovation", InnovationModel.pareto_rademacher(self.alpha))

    @property
    def exponent(self) -> float:
        return (1.0 if self.beta is None else self.beta) / self.alpha

    @property
    def jump_factor(self) -> float:
        """Multiplier taking theta_k to the k-th jump in the uncorrelated case."""
        c0 = self.coeffs[0]
        return self.scale_n ** (-self.exponent) * (c0 / sum(self.coeffs) if self.normalize else c0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["coeffs"] = list(self.coeffs)
        d["innovation"] = self.innovation.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CtrwConfig":
        d = dict(d)
        if isinstance(d.get("innovation"), dict):
            d["innovation"] = InnovationModel.from_dict(d["innovation"])
        if "coeffs" in d:
            d["coeffs"] = tuple(d["coeffs"])
        return cls(**d)


class CtrwSample(NamedTuple):
    path: StepPath
    count: StepPath  # N(n t) on [0, T]
    epochs: np.ndarray  # jump times L_k / n
    jump_sizes: np.ndarray
    zeta: np.ndarray
    theta: np.ndarray  # theta_{1-J} .. theta_N
    waits: np.ndarray
    uniforms: np.ndarray | None
    config: CtrwConfig


def _moving_sum(cfg: CtrwConfig, theta: np.ndarray) -> np.ndarray:
    c = np.asarray(cfg.coeffs)
    J = c.size - 1
    N = theta.size - J
    zeta = np.zeros(N)
    for j in range(J + 1):
        zeta += c[j] * theta[J - j : J - j + N]
    if cfg.normalize:
        zeta = zeta / c.sum()
    return zeta


def _epochs(cfg: CtrwConfig, s: Seed):
    """Renewal epochs L_k / n up to the horizon, the waits and (for
    coupled walks) the uniforms behind them."""
    n, T = cfg.scale_n, cfg.horizon
    if cfg.beta is None:
        N = int(math.floor(n * T))
        while N > 0 and N / n > T:
            N -= 1
        k = np.arange(1, N + 1, dtype=float)
        return k / n, np.ones(N), None
    rng = s.stream("waits")
    target = n * T
    chunk = max(64, int(2 * target**cfg.beta) + 16)
    us, total = [], 0.0
    while True:
        u = rng.random(chunk)
        w = _pareto_from_uniform(u, cfg.beta, cfg.wait_xmin)
        us.append(u)
        total += float(w.sum())
        if total > target:
            break
        chunk *= 2
    u = np.concatenate(us)
    w = _pareto_from_uniform(u, cfg.beta, cfg.wait_xmin)
    L = np.cumsum(w)
    N = int(np.searchsorted(L, target, side="right"))
    return L[:N] / n, w[:N], u[:N]


def ctrw_path(config: CtrwConfig, seed=0) -> CtrwSample:
    """Sample the walk; jumps ``n^{-beta/alpha} zeta_k`` at times ``L_k / n``."""
    s = as_seed(seed)
    epochs, waits, uniforms = _epochs(config, s)
    N = epochs.size
    J = len(config.coeffs) - 1
    if config.coupling == "coupled":
        pre = sample_innovations(config.innovation, J, s, "presample") if J else np.zeros(0)
        signs = _signs(s.stream("signs"), N) if N else np.zeros(0)
        theta = np.concatenate([pre, signs * (1.0 - uniforms) ** (-1.0 / config.alpha)])
    else:
        theta = sample_innovations(config.innovation, N + J, s) if N + J else np.zeros(0)
    zeta = _moving_sum(config, theta)
    sizes = config.scale_n ** (-config.exponent) * zeta
    T = config.horizon
    bp = np.concatenate([[0.0], epochs])
    vals = np.concatenate([[0.0], np.cumsum(sizes)])
    path = StepPath(bp, vals[:, None], T)
    count = StepPath(bp, np.arange(N + 1, dtype=float)[:, None], T)
    return CtrwSample(path, count, epochs, sizes, zeta, theta, waits, uniforms, config)


def moving_average_path(config: CtrwConfig, seed=0, return_internals: bool = False):
    """Partial-sum path of a moving average with unit waits: jump
    ``n^{-1/alpha} zeta_k`` at ``k/n``."""
    if config.beta is not None:
        raise BadParameter("moving averages use deterministic unit waits (beta=None)")
    sample = ctrw_path(config, seed)
    return sample if return_internals else sample.path


class Decomposition(NamedTuple):
    martingale: StepPath
    large: StepPath
    drift: StepPath
    drift_per_step: float


def ctrw_decompose(config: CtrwConfig, sample: CtrwSample) -> Decomposition:
    """Split an uncorrelated walk into compensated small jumps, the sum
    of jumps larger than 1, and the drift ``N(nt) E[zeta 1{|zeta| <= 1}]``."""
    if any(c != 0.0 for c in config.coeffs[1:]):
        raise NotUncorrelated("decomposition needs c_j = 0 for j >= 1")
    if not isinstance(sample, CtrwSample):
        raise MissingInternals("pass the CtrwSample returned by ctrw_path")
    if config.coupling == "coupled":
        m = 0.0 if config.innovation.symmetric else truncated_mean(
            InnovationModel.pareto_rademacher(config.alpha), config.jump_factor)
    else:
        m = truncated_mean(config.innovation, config.jump_factor)
    x = sample.path
    sizes = sample.jump_sizes
    big = np.where(np.abs(sizes) > 1.0, sizes, 0.0)
    large = np.concatenate([[0.0], np.cumsum(big)])
    drift = m * np.arange(sizes.size + 1, dtype=float)
    mart = x.values[:, 0] - large - drift
    bp, T = x.breakpoints, x.horizon
    return Decomposition(
        StepPath(bp, mart[:, None], T),
        StepPath(bp, large[:, None], T),
        StepPath(bp, drift[:, None], T),
        float(m),
    )


# --------------------------------------------------- single-jump martingale


def _sjm_check(n, T, eps):
    if not n >= 4:
        raise BadParameter("need n >= 4")
    if not 0 < eps < 1:
        raise BadParameter("need 0 < eps < 1")
    if not T > 0:
        raise BadParameter("need T > 0")


def _g(t, n, T):
    t = np.asarray(t, dtype=float)
    lo = T + 1.0 / n - n**-0.5
    return np.where((t >= lo) & (t < T), T + 1.0 / n - t, 0.0)


def _f(x):
    x = np.asarray(x, dtype=float)
    safe = np.where(x > 0, x, 1.0)
    return np.where(x > 0, np.cos(1 / safe) / safe - np.sin(1 / safe), 0.0)


def _phi(x):
    x = np.asarray(x, dtype=float)
    safe = np.where(x > 0, x, 1.0)
    return np.where(x > 0, safe * np.sin(1 / safe), 0.0)


def _tail_prob(t, T, eps):
    # P((t, T]) for tau ~ (1-eps) Leb/T + eps delta_T
    t = np.asarray(t, dtype=float)
    return np.where(t < T, (1 - eps) * (T - np.maximum(t, 0.0)) / T + eps, 0.0)


def martingale_value(t, tau, n: int, T: float = 1.0, eps: float = 0.5):
    """``M_t = Psi(tau) 1{tau <= t} - Lambda(t ^ tau) / T`` in closed form."""
    _sjm_check(n, T, eps)
    t = np.asarray(t, dtype=float)
    tau = np.asarray(tau, dtype=float)
    psi = _f(_g(tau, n, T)) * _tail_prob(tau, T, eps) / (1 - eps)
    lam = _phi(_g(np.minimum(t, tau), n, T))
    return np.where(tau <= t, psi, 0.0) - lam / T


def _window_grid(n: int, T: float, per_half_period: int) -> np.ndarray:
    """Times in [T + 1/n - n^{-1/2}, T) at which u = 1/g runs through
    multiples of pi / per_half_period (so every extremum of sin(u) at
    (k + 1/2) pi is hit when per_half_period is even)."""
    u0, u1 = math.sqrt(n), float(n)
    k0 = math.ceil(u0 * per_half_period / math.pi)
    k1 = math.floor(u1 * per_half_period / math.pi)
    u = np.arange(k0, k1 + 1) * (math.pi / per_half_period)
    u = u[(u > u0) & (u < u1)]
    u = np.concatenate([[u0], u])
    t = T + 1.0 / n - 1.0 / u
    t = t[t < T]
    return np.unique(t)


def compensator_path(n: int, T: float = 1.0, per_half_period: int = 8) -> StepPath:
    """Grid sample of ``t -> Lambda(t)`` on [0, T) as a step path."""
    if per_half_period < 2 or per_half_period % 2:
        raise BadParameter("per_half_period must be an even integer >= 2")
    grid = _window_grid(n, T, per_half_period)
    t0 = T + 1.0 / n - n**-0.5
    bp = grid if grid[0] > 0 else grid[1:]
    bp = np.concatenate([[0.0], bp[bp > 0]])
    vals = _phi(_g(bp, n, T))
    if t0 <= 0:
        vals[0] = float(_phi(_g(0.0, n, T)))
    return StepPath(bp, vals[:, None], T)


class SingleJumpSample(NamedTuple):
    path: StepPath
    tau: float


def single_jump_martingale(n: int, T: float = 1.0, eps: float = 0.5, seed=0, per_half_period: int = 8) -> SingleJumpSample:
    """Martingale with at most one jump, at ``tau``, compensated by a
    continuous drift that oscillates ever faster towards T.

    The drift is sampled where ``u = 1/g`` hits multiples of
    ``pi / per_half_period``; near T this is a time step of about
    ``pi / (per_half_period n^2)``.
    """
    _sjm_check(n, T, eps)
    if per_half_period < 2 or per_half_period % 2:
        raise BadParameter("per_half_period must be an even integer >= 2")
    rng = as_seed(seed).stream("tau")
    u1, u2 = rng.random(2)
    tau = T if u1 < eps else T * u2
    grid = _window_grid(n, T, per_half_period)
    grid = grid[(grid > 0) & (grid < tau)]
    bp = [np.zeros(1), grid]
    if tau < T and tau > 0:
        bp.append(np.array([tau]))
    elif tau >= T:
        bp.append(np.array([T]))
    bp = np.concatenate(bp)
    vals = martingale_value(bp, tau, n, T, eps)
    return SingleJumpSample(StepPath(bp, vals[:, None], T), float(tau))


# ------------------------------------------------------------ exploding pair


class ExplodingSample(NamedTuple):
    H: StepPath
    X: StepPath
    Z: np.ndarray  # Z_0 .. Z_N


def exploding_pair(n: int, alpha: float = 1.5, epsilon: float = 0.25, x_min: float = 1.0, T: float = 1.0, seed=0,
                   c0: float = 1.0, c1: float = 1.0, return_internals: bool = False):
    """Single-delay moving average X of ``Z_k = xi_k W_k`` (W Pareto) and
    an adapted integrand H in ``{0, +-n^-eps}`` that switches exactly when
    consecutive innovations change sign.

    Cadlag convention: H holds ``h[k]`` on ``[k/n, (k+1)/n)``; the jump of
    X at ``k/n`` is integrated against ``h[k-1]``.
    """
    if not 1 < alpha < 2:
        raise BadParameter("need 1 < alpha < 2")
    if not (epsilon > 0 and 1 / alpha + epsilon < 1):
        raise BadParameter("need epsilon > 0 and 1/alpha + epsilon < 1")
    if not (x_min > 0 and c0 > 0 and c1 > 0 and T > 0):
        raise BadParameter("x_min, c0, c1 and T must be positive")
    if int(n) != n or n < 1:
        raise BadParameter("n must be a positive integer")
    n = int(n)
    s = as_seed(seed)
    N = int(math.floor(n * T))
    while N > 0 and N / n > T:
        N -= 1
    W = _pareto_from_uniform(s.stream("innovations").random(N + 1), alpha, x_min)
    Z = _signs(s.stream("signs"), N + 1) * W
    sg = np.sign(Z)
    a = float(n) ** (-epsilon)
    h = np.zeros(N + 1)
    for k in range(2, N + 1):
        if sg[k] != sg[k - 1]:
            h[k] = 0.0 if h[k - 1] == -a * sg[k - 1] else -a * sg[k]
        else:
            h[k] = h[k - 1]
    k = np.arange(N + 1, dtype=float)
    bp = k / n
    dx = float(n) ** (-1.0 / alpha) * (c0 * Z[1:] + c1 * Z[:-1]) / (c0 + c1)
    X = StepPath(bp, np.concatenate([[0.0], np.cumsum(dx)])[:, None], T)
    H = StepPath(bp, h[:, None], T)
    return ExplodingSample(H, X, Z) if return_internals else (H, X)


# ------------------------------------------------------------ crossing walk


class CrossingSample(NamedTuple):
    H: StepPath
    X: StepPath
    r: int
    cap: float
    last_start: int | None  # grid index of tau_{2r+1} if it precedes the cap


def crossing_pair(n: int, T: float = 1.0, seed=0, return_internals: bool = False):
    """Scaled simple random walk and the integrand that bets against the
    current excursion sign until the walk returns to 0, restarting one
    step later, up to the cap ``2 n^{-1/4}``.

    All stopping times other than the cap are grid times ``j/n``; the
    walk is tracked by integer index so zero hits are exact.
    """
    if int(n) != n or n < 16:
        raise BadParameter("need an integer n >= 16")
    n = int(n)
    cap = 2.0 * n**-0.25
    if not T >= cap:
        raise BadParameter("horizon must reach the cap 2 n^(-1/4)")
    N = int(math.floor(n * T))
    while N > 0 and N / n > T:
        N -= 1
    xi = _signs(as_seed(seed).stream("signs"), N).astype(np.int64)
    S = np.concatenate([[0], np.cumsum(xi)])
    bp = np.arange(N + 1, dtype=float) / n
    X = StepPath(bp, (S / math.sqrt(n))[:, None], T)

    # grid indices strictly before the cap, and the walk's zeros among them
    jcap = min(N, int(math.ceil(cap * n)))
    while jcap > 0 and jcap / n >= cap:
        jcap -= 1
    zeros = np.flatnonzero(S[: jcap + 1] == 0)
    times, vals = [0.0], [0.0]
    r = 0
    start = 1
    last_start = None
    while start / n < cap:
        sgn = 1.0 if S[start] > 0 else -1.0
        times.append(start / n)
        vals.append(-sgn)
        z = np.searchsorted(zeros, start, side="right")
        if z < zeros.size:
            j = int(zeros[z])
            r += 1
            times.append(j / n)
            vals.append(0.0)
            start = j + 1
        else:
            last_start = start
            times.append(cap)
            vals.append(0.0)
            break
    # merge a stop and an immediate restart falling on the same time
    t_arr, v_arr = [], []
    for t, v in zip(times, vals):
        if t_arr and t_arr[-1] == t:
            v_arr[-1] = v
        else:
            t_arr.append(t)
            v_arr.append(v)
    if t_arr[-1] > T:
        raise BadParameter("cap beyond horizon")
    H = StepPath(np.array(t_arr), np.array(v_arr)[:, None], T)
    if return_internals:
        return CrossingSample(H, X, r, cap, last_start)
    return H, X, r


# ------------------------------------------------------ deterministic paths


def _alternating(n: int, T: float = 1.0):
    m = int(math.floor(n * n * T))
    while m > 0 and m / (n * n) > T:
        m -= 1
    k = np.arange(1, m + 1)
    bp = np.concatenate([[0.0], k / (n * n)])
    vals = np.concatenate([[0.0], np.cumsum((-1.0) ** k / n)])
    return StepPath(bp, vals[:, None], T)


def _sawtooth(n: int, m: int = 3):
    """Ramp teeth ``n^{-1/4}(nt - i)`` on ``[i/n, (i+1)/n)`` as staircases
    of ``m`` (odd) sub-steps with levels ``j/(m-1)`` of the tooth height;
    the integrand is ``n^{-1/4}`` on ``[i/n, i/n + 1/(2n))``."""
    if m < 3 or m % 2 == 0:
        raise BadParameter("sub-steps per tooth must be odd and >= 3")
    a = n**-0.25
    i = np.repeat(np.arange(n), m)
    j = np.tile(np.arange(m), n)
    bp = np.concatenate([(m * i + j) / (m * n), [1.0]])
    xv = np.concatenate([a * j / (m - 1), [0.0]])
    X = StepPath(bp, xv[:, None], 1.0)
    hb = np.empty(2 * n)
    hb[0::2] = np.arange(n) / n
    hb[1::2] = (2 * np.arange(n) + 1) / (2 * n)
    hv = np.tile([a, 0.0], n)
    H = StepPath(hb, hv[:, None], 1.0)
    return H, X


def _fig6(n: int):
    if n == 2:  # the first H jump lands at time 0
        H = StepPath([0.0, 1.0], [[0.25], [0.75]], 2.0)
    else:
        H = StepPath([0.0, 1 - 2 / n, 1.0], [[0.0], [0.25], [0.75]], 2.0)
    X = StepPath([0.0, 1 - 1 / n, 1.0], [[0.0], [0.5], [1.0]], 2.0)
    return H, X


def _zigzag(n: int):
    x = StepPath([0.0, 1 - 1 / n, 1.0], [[0.0], [0.5], [1.0]], 2.0)
    y = indicator_path(1 - 2 / n, 2.0)
    return x, y


_DETERMINISTIC = {
    "alternating": lambda n, **kw: _alternating(n, **kw),
    "sawtooth": lambda n, **kw: _sawtooth(n, **kw),
    "fig6": lambda n: _fig6(n),
    "zigzag": lambda n: _zigzag(n),
}


def deterministic_example(id: str, n: int, **params):
    """Closed-form example paths.

    ``alternating``: ``sum_{k <= n^2 t} (-1)^k / n`` on [0, T] (single path).
    ``sawtooth``: (H, X) with ``int_0^1 H_- dX = sqrt(n)/2``.
    ``fig6``: (H, X) on [0, 2] whose integral is 1/4 for every n while
    the limit pair integrates to 0.
    ``zigzag``: the pair (x_n, y_n) on [0, 2] that converges coordinatewise
    in M1 but not jointly.
    """
    if id not in _DETERMINISTIC:
        raise UnknownId(f"unknown example {id!r}; known: {sorted(_DETERMINISTIC)}")
    if int(n) != n or n < 2:
        raise BadParameter("need an integer n >= 2")
    return _DETERMINISTIC[id](int(n), **params)


def deterministic_limit(id: str):
    """The n -> infinity limit of :func:`deterministic_example`."""
    if id == "alternating":
        return StepPath([0.0], [[0.0]], 1.0)
    if id == "sawtooth":
        z = StepPath([0.0], [[0.0]], 1.0)
        return z, z
    if id == "fig6":
        return indicator_path(1.0, 2.0, 0.75), indicator_path(1.0, 2.0)
    if id == "zigzag":
        x = indicator_path(1.0, 2.0)
        return x, x
    raise UnknownId(f"unknown example {id!r}")


# ------------------------------------------------- delayed-readout integrand


def delayed_readout_integrand(sample: CtrwSample, times, g: Callable | None = None, J: int = 0, x0minus=0.0) -> StepPath:
    """``H_t = g(t_i, X(Xi(t_i)))`` on ``[t_i, t_{i+1})``, where ``Xi(t_i)``
    is the epoch of the jump J places before the last jump at or before
    ``t_i``.  Without such a jump the sentinel value ``x0minus`` is read.
    H is 0 before the first ``t_i``; ``g=None`` reads the value itself.
    """
    if not isinstance(sample, CtrwSample):
        raise MissingInternals("the integrand needs jump epochs; pass a CtrwSample")
    if int(J) != J or J < 0:
        raise BadParameter("delay J must be a nonnegative integer")
    t = np.asarray(times, dtype=float).reshape(-1)
    T = sample.path.horizon
    if t.size == 0 or np.any(np.diff(t) <= 0) or t[0] < 0 or t[-1] > T:
        raise BadParameter("readout times must be strictly increasing within [0, T]")
    x = sample.path
    ep = sample.epochs
    k = np.searchsorted(ep, t, side="right")  # jumps at or before t_i
    idx = k - int(J)  # index of the read-out jump (1-based)
    d = x.dim
    sentinel = np.broadcast_to(np.asarray(x0minus, dtype=float), (d,))
    read = np.empty((t.size, d))
    for i in range(t.size):
        read[i] = x.values[idx[i]] if idx[i] >= 1 else sentinel
    if g is None:
        hv = read
    else:
        hv = np.array([np.atleast_1d(np.asarray(g(t[i], read[i]), dtype=float)) for i in range(t.size)])
    if t[0] > 0:
        bp = np.concatenate([[0.0], t])
        hv = np.vstack([np.zeros((1, hv.shape[1])), hv])
    else:
        bp = t
    return StepPath(bp, hv, T)


# ------------------------------------------------------ inverse subordinator


def inverse_subordinator_path(beta: float | None, n: int, T: float = 1.0, seed=0, x_min: float = 1.0) -> StepPath:
    """Right-continuous inverse ``E(t) = inf{s : D(s) > t}`` of the epoch
    path ``D(s) = L_{floor(ns)} / n^{1/beta}``.

    ``E(t) = k*/n`` with ``k* = min{k : L_k > t n^{1/beta}}``, so E rises
    by 1/n at each rescaled epoch.  ``beta=None`` uses unit waits and
    the scaling n, giving ``(floor(nt) + 1)/n``.
    """
    if beta is not None and not 0 < beta < 1:
        raise BadParameter("beta must lie in (0, 1)")
    if int(n) != n or n < 1 or not T > 0:
        raise BadParameter("need integer n >= 1 and T > 0")
    n = int(n)
    b = 1.0 if beta is None else beta
    scale = n ** (1.0 / b)
    target = T * scale
    if beta is None:
        L = np.arange(1, int(math.floor(target)) + 1, dtype=float)
    else:
        rng = as_seed(seed).stream("waits")
        chunk = max(64, int(2 * n) + 16)
        parts, total = [], 0.0
        while True:
            w = _pareto_from_uniform(rng.random(chunk), beta, x_min)
            parts.append(w)
            total += float(w.sum())
            if total > target:
                break
            chunk *= 2
        L = np.cumsum(np.concatenate(parts))
    times = L / scale
    times = times[times <= T]
    bp = np.concatenate([[0.0], times])
    vals = np.arange(1, bp.size + 1, dtype=float) / n
    return StepPath(bp, vals[:, None], T)


# ------------------------------------------------------------ registry


@dataclass(frozen=True)
class Construction:
    """Paths produced by one draw of a registered construction.

    ``paths`` maps roles (``"X"``, ``"H"``, ``"M"``, ``"A"``, ...) to
    StepPaths; ``extra`` carries scalar internals such as ``tau`` or
    ``r``; ``epochs`` are the jump epochs when the construction has them.
    """

    paths: dict
    extra: dict = field(default_factory=dict)
    epochs: np.ndarray | None = None


def _c_constant(n, seed, value=0.0, horizon=1.0):
    p = StepPath([0.0], [[float(value)]], horizon)
    zero = StepPath([0.0], [[0.0]], horizon)
    return Construction({"X": p, "H": p, "M": zero, "A": zero})


def _c_deterministic(id):
    def build(n, seed, **kw):
        out = deterministic_example(id, n, **kw)
        if isinstance(out, StepPath):
            zero = StepPath([0.0], [[0.0]], out.horizon)
            return Construction({"X": out, "A": out, "M": zero}, epochs=out.breakpoints[1:])
        H, X = out
        return Construction({"H": H, "X": X}, epochs=X.breakpoints[1:])
    return build


def _c_exploding(n, seed, alpha=1.5, epsilon=0.25, x_min=1.0, T=1.0, c0=1.0, c1=1.0):
    s = exploding_pair(n, alpha, epsilon, x_min, T, seed, c0, c1, return_internals=True)
    return Construction({"H": s.H, "X": s.X}, epochs=s.X.breakpoints[1:])


def _c_crossing(n, seed, T=1.0):
    s = crossing_pair(n, T, seed, return_internals=True)
    return Construction({"H": s.H, "X": s.X}, {"r": s.r, "cap": s.cap}, epochs=s.X.breakpoints[1:])


def _ctrw_config(n, kw) -> CtrwConfig:
    kw = dict(kw)
    if isinstance(kw.get("innovation"), dict):
        kw["innovation"] = InnovationModel.from_dict(kw["innovation"])
    if "coeffs" in kw:
        kw["coeffs"] = tuple(kw["coeffs"])
    return CtrwConfig(scale_n=n, **kw)


def _c_ctrw(n, seed, **kw):
    cfg = _ctrw_config(n, kw)
    s = ctrw_path(cfg, seed)
    paths = {"X": s.path, "N": s.count}
    extra = {}
    if all(c == 0.0 for c in cfg.coeffs[1:]):
        d = ctrw_decompose(cfg, s)
        paths.update(M=d.martingale, A=_add(d.large, d.drift), large=d.large, drift=d.drift)
        extra["drift_per_step"] = d.drift_per_step
    return Construction(paths, extra, epochs=s.epochs)


def _add(a: StepPath, b: StepPath) -> StepPath:
    return StepPath(a.breakpoints, a.values + b.values, a.horizon)


def _c_sjm(n, seed, T=1.0, eps=0.5, per_half_period=8):
    s = single_jump_martingale(n, T, eps, seed, per_half_period)
    return Construction({"X": s.path, "M": s.path}, {"tau": s.tau})


def _c_inverse(n, seed, beta=0.8, T=1.0, x_min=1.0):
    return Construction({"X": inverse_subordinator_path(beta, n, T, seed, x_min)})


CONSTRUCTIONS: dict[str, Callable[..., Construction]] = {
    "constant": _c_constant,
    "alternating": _c_deterministic("alternating"),
    "sawtooth": _c_deterministic("sawtooth"),
    "fig6": _c_deterministic("fig6"),
    "zigzag": _c_deterministic("zigzag"),
    "exploding-pair": _c_exploding,
    "crossing-pair": _c_crossing,
    "ctrw": _c_ctrw,
    "moving-average": _c_ctrw,
    "single-jump-martingale": _c_sjm,
    "inverse-subordinator": _c_inverse,
}


def construct(id: str, n: int, seed=0, **params) -> Construction:
    """Draw one sample of a registered construction."""
    if id not in CONSTRUCTIONS:
        raise UnknownConstruction(f"unknown construction {id!r}; known: {sorted(CONSTRUCTIONS)}")
    try:
        return CONSTRUCTIONS[id](n, seed, **params)
    except TypeError as e:
        raise BadParameter(f"bad parameters for {id!r}: {e}") from None
