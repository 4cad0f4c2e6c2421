"""Mean-field occupancy dynamics and the diffusion-scale change of variables.

The fluid state is the tail-occupancy vector q with 1 >= q_1 >= q_2 >= ...;
q_0 is identically 1.  With m(q) the smallest i >= 0 such that q_{i+1} < 1,
arrivals concentrate on levels m-1 and m:

    p_{m-1} = min((1 - q_{m+1}) / lam, 1),   p_m = 1 - p_{m-1}   (m >= 1)
    p_0 = 1                                                       (m = 0)

and dq_i/dt = lam * p_{i-1} - (q_i - q_{i+1}) for i >= 1.  The unique fixed
point for lam < 1 is (lam, 0, 0, ...).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "fluid_rhs",
    "fluid_integrate",
    "FluidPath",
    "default_levels",
    "bipartite_fluid_rhs",
    "bipartite_fluid_integrate",
    "BipartitePath",
    "bipartite_stop_time",
    "suboptimality_threshold",
    "diffusion_scale",
    "DiffusionPath",
]

_ONE_TOL = 1e-12


def default_levels(lam: float) -> int:
    """Truncation depth ample for loads up to lam (tail decays like lam^i)."""
    if not 0 < lam < 1:
        raise ValueError("need 0 < lam < 1")
    return 2 * math.ceil(1.0 / (1.0 - lam)) + 10


def fluid_rhs(q: np.ndarray, lam: float) -> np.ndarray:
    """Time derivative of the tail-occupancy vector (q_{K+1} treated as 0)."""
    q = np.asarray(q, np.float64)
    k = q.size
    dq = np.empty(k)
    m = 0
    while m < k and q[m] >= 1.0 - _ONE_TOL:
        m += 1
    # p[i] = fraction of arrivals joining a server with exactly i in queue
    p = np.zeros(k + 1)
    if m == 0:
        p[0] = 1.0
    else:
        q_mp1 = q[m] if m < k else 0.0
        share = min((1.0 - q_mp1) / lam, 1.0)
        p[m - 1] = share
        p[m] = 1.0 - share
    for i in range(k):
        nxt = q[i + 1] if i + 1 < k else 0.0
        dq[i] = lam * p[i] - (q[i] - nxt)
    return dq


@dataclass
class FluidPath:
    times: np.ndarray  # (S,)
    q: np.ndarray  # (S, K); column i-1 holds q_i
    lam: float

    @property
    def levels(self) -> int:
        return self.q.shape[1]

    def at(self, t: float) -> np.ndarray:
        """Linear interpolation of the path at time t."""
        return np.array([np.interp(t, self.times, self.q[:, j])
                         for j in range(self.levels)])

    def endpoint(self) -> np.ndarray:
        return self.q[-1].copy()

    def csv_text(self) -> str:
        cols = ["t"] + [f"q{i}" for i in range(1, self.levels + 1)]
        lines = [",".join(cols)]
        for s in range(self.times.size):
            row = [f"{self.times[s]:.12g}"]
            row += [f"{self.q[s, j]:.12g}" for j in range(self.levels)]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def _project(q: np.ndarray) -> np.ndarray:
    # the ODE preserves [0,1] and monotonicity exactly; re-impose both so that
    # fixed-step rounding can never let a violation compound
    q = np.clip(q, 0.0, 1.0)
    return np.minimum.accumulate(q)


def fluid_integrate(lam: float, horizon: float, dt: float = 1e-3,
                    q0: np.ndarray | None = None, levels: int | None = None,
                    sample_grid: float | None = None) -> FluidPath:
    """Classic RK4 with fixed step; records the path on a coarser grid.

    Starts from the empty state unless q0 is given.  The recorded grid
    defaults to every step when sample_grid is None.
    """
    if not 0 < lam < 1:
        raise ValueError("need 0 < lam < 1")
    if horizon <= 0 or dt <= 0:
        raise ValueError("horizon and dt must be positive")
    k = levels if levels is not None else default_levels(lam)
    if q0 is None:
        q = np.zeros(k)
    else:
        q = np.asarray(q0, np.float64).copy()
        if q.size != k:
            raise ValueError("q0 length must match level count")
        if q.min() < 0 or q.max() > 1 or np.any(np.diff(q) > 1e-12):
            raise ValueError("q0 must be in [0,1] and non-increasing")
    n_steps = int(round(horizon / dt))
    if abs(n_steps * dt - horizon) > 1e-9 * max(1.0, horizon):
        raise ValueError("horizon must be a multiple of dt")
    if sample_grid is None:
        keep_every = 1
    else:
        keep_every = max(1, int(round(sample_grid / dt)))
    times = [0.0]
    path = [q.copy()]
    for s in range(1, n_steps + 1):
        k1 = fluid_rhs(q, lam)
        k2 = fluid_rhs(_project(q + 0.5 * dt * k1), lam)
        k3 = fluid_rhs(_project(q + 0.5 * dt * k2), lam)
        k4 = fluid_rhs(_project(q + dt * k3), lam)
        q = _project(q + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
        if s % keep_every == 0 or s == n_steps:
            times.append(s * dt)
            path.append(q.copy())
    return FluidPath(np.array(times), np.vstack(path), lam)


# ---------------------------------------------------------------------------
# complete bipartite dynamics on the low-degree side

def bipartite_fluid_rhs(q1a: float, q1b: float, lam: float, c: float):
    """Busy-fraction derivatives for parts A (size cN) and B, while q_{1,A} < c.

    On the complete bipartite graph each vertex's neighborhood is the whole
    opposite part, so in the limit arrivals at B's vertices (total rate
    lam*(1-c)) join idle A servers and arrivals at A's vertices (rate lam*c)
    join idle B servers; busy fractions decay at unit rate.  Valid until A
    saturates at q_{1,A} = c.
    """
    return lam * (1.0 - c) - q1a, lam * c - q1b


def bipartite_stop_time(lam: float, c: float) -> float:
    """First time q_{1,A} reaches c from empty, +inf if it never does."""
    _check_bipartite(lam, c)
    cap = lam * (1.0 - c)
    if cap <= c:
        return math.inf
    return -math.log(1.0 - c / cap)


@dataclass
class BipartitePath:
    times: np.ndarray
    q1a: np.ndarray
    q1b: np.ndarray
    lam: float
    c: float
    stop_time: float  # +inf when q_{1,A} stays below c on the horizon

    def csv_text(self) -> str:
        lines = ["t,q1A,q1B"]
        for s in range(self.times.size):
            lines.append(f"{self.times[s]:.12g},{self.q1a[s]:.12g},{self.q1b[s]:.12g}")
        return "\n".join(lines) + "\n"


def _check_bipartite(lam: float, c: float) -> None:
    if not 0 < lam < 1:
        raise ValueError("need 0 < lam < 1")
    if not 0 < c < 0.5:
        raise ValueError("need 0 < c < 1/2")


def bipartite_fluid_integrate(lam: float, c: float, horizon: float,
                              dt: float = 1e-3) -> BipartitePath:
    """Integrate the two busy fractions from empty until saturation or horizon.

    The path is linear-exponential and the closed form is used per step;
    integration stops at the saturation time (interpolated exactly) after
    which the two-variable description no longer applies.
    """
    _check_bipartite(lam, c)
    if horizon <= 0 or dt <= 0:
        raise ValueError("horizon and dt must be positive")
    t_stop = bipartite_stop_time(lam, c)
    t_end = min(horizon, t_stop)
    n_steps = max(1, int(math.ceil(t_end / dt - 1e-9)))
    times = np.minimum(np.arange(n_steps + 1) * dt, t_end)
    ca = lam * (1.0 - c)
    cb = lam * c
    q1a = ca * (1.0 - np.exp(-times))
    q1b = cb * (1.0 - np.exp(-times))
    return BipartitePath(times, q1a, q1b, lam, c,
                         t_stop if t_stop <= horizon else math.inf)


def suboptimality_threshold(c: float) -> float:
    """Load above which part A stays saturated and length-2 queues persist.

    Once A is full, B's busy fraction settles at lam/(1+lam) and B's busy
    vertices divert their arrivals onto A at rate lam^2/(1+lam); A remains
    saturated iff that inflow covers A's service rate c.  The threshold is
    the positive root of lam^2 = c*(1+lam).  Below it A de-saturates and the
    stationary profile has no mass at level two; above it a positive fraction
    of queues reach length two despite total capacity exceeding the load.
    """
    if not 0 < c < 0.5:
        raise ValueError("need 0 < c < 1/2")
    return (c + math.sqrt(c * c + 4.0 * c)) / 2.0


# ---------------------------------------------------------------------------
# diffusion-scale change of variables

@dataclass
class DiffusionPath:
    times: np.ndarray
    qbar: np.ndarray  # (S, K): column 0 is the centered idle count, <= 0
    n: int
    beta: float

    @property
    def levels(self) -> int:
        return self.qbar.shape[1]

    def csv_text(self) -> str:
        cols = ["t"] + [f"qbar{i}" for i in range(1, self.levels + 1)]
        lines = [",".join(cols)]
        for s in range(self.times.size):
            row = [f"{self.times[s]:.12g}"]
            row += [f"{self.qbar[s, j]:.12g}" for j in range(self.levels)]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def diffusion_scale(times: np.ndarray, Q: np.ndarray, n: int,
                    lambda_total: float) -> DiffusionPath:
    """Center and scale raw occupancy counts by sqrt(N).

    Level 1 becomes -(N - Q_1)/sqrt(N) (minus the scaled idle count); higher
    levels become Q_i/sqrt(N).  beta = (N - lambda_total)/sqrt(N) measures
    the capacity slack.
    """
    Q = np.asarray(Q, np.float64)
    if Q.ndim != 2:
        raise ValueError("Q must be (samples, levels)")
    if n <= 0:
        raise ValueError("need n >= 1")
    root = math.sqrt(n)
    qbar = Q / root
    qbar[:, 0] = -(n - Q[:, 0]) / root
    beta = (n - lambda_total) / root
    return DiffusionPath(np.asarray(times, np.float64).copy(), qbar, n, beta)
