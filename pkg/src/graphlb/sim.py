"""Event-driven simulation of graph-constrained JSQ and its ranked companion.

The continuous-time dynamics: tasks arrive at each vertex as independent
Poisson streams of rate lambda, service is unit-mean exponential, and an
arrival at v joins the shortest queue in the closed neighborhood N[v] (ties
uniform).  With a finite buffer b, an arrival finding every queue in N[v] at
b is discarded.  The embedded jump chain is simulated: with B busy servers
the next event is Exp(lambda*N + B), an arrival with probability
lambda*N / (lambda*N + B) at a uniform vertex, else a departure at a
uniformly chosen busy server.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as K
from .graphs import Graph
from .rng import Stream, derive_seed, kernel_state

__all__ = [
    "OccupancyState",
    "SimConfig",
    "Trace",
    "CoupledTrace",
    "StationarySummary",
    "assign_graph_jsq",
    "assign_cjsq",
    "simulate",
    "simulate_coupled",
    "stationary_stats",
    "DISCARD",
]

DISCARD = K.DISCARD

_POLICIES = {"graph_jsq": K.POLICY_GRAPH_JSQ,
             "isolated": K.POLICY_ISOLATED,
             "cjsq": K.POLICY_CJSQ}

# queue lengths above this abort an infinite-buffer run rather than silently
# growing without bound
_DEFAULT_MAX_LEVELS = 256


@dataclass
class OccupancyState:
    """Per-server queue lengths with derived occupancy counts."""

    x: np.ndarray  # int64 queue lengths
    q_counts: np.ndarray  # q_counts[i] = #{k: x_k >= i}, index 0 unused
    n_servers: int
    busy: int
    buffer_b: int | None = None  # None = infinite

    @classmethod
    def from_lengths(cls, x, buffer_b: int | None = None) -> "OccupancyState":
        x = np.asarray(x, np.int64)
        if x.size == 0:
            raise ValueError("need at least one server")
        if x.min() < 0:
            raise ValueError("negative queue length")
        if buffer_b is not None and x.max() > buffer_b:
            raise ValueError("queue length exceeds buffer")
        top = int(x.max()) if x.size else 0
        q = np.zeros(top + 2, np.int64)
        for i in range(1, top + 1):
            q[i] = int((x >= i).sum())
        return cls(x, q, int(x.size), int(q[1]) if top >= 1 else 0, buffer_b)

    def validate(self) -> None:
        q_ref = np.array([int((self.x >= i).sum()) for i in range(self.q_counts.size)])
        q_ref[0] = self.q_counts[0]
        assert np.array_equal(q_ref, self.q_counts), "occupancy counts out of sync"
        assert all(self.q_counts[i] >= self.q_counts[i + 1]
                   for i in range(1, self.q_counts.size - 1))
        assert self.busy == (self.q_counts[1] if self.q_counts.size > 1 else 0)
        assert self.busy <= self.n_servers


@dataclass
class SimConfig:
    """Run parameters; ``lam`` is the arrival rate per server."""

    lam: float
    horizon: float
    seed: int = 0
    buffer_b: int | None = None  # None = infinite
    policy: str = "graph_jsq"  # graph_jsq | isolated | cjsq
    cjsq_n: int = 0
    sample_grid: float = 0.5
    initial_x: np.ndarray | None = None  # None = all empty
    record_levels: int = 8
    record_waits: bool = False
    subset: np.ndarray | None = None  # vertex ids whose occupancy is traced separately
    debug_checks: bool = False
    max_levels: int = _DEFAULT_MAX_LEVELS

    def validated(self, n: int) -> "SimConfig":
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.sample_grid <= 0:
            raise ValueError("sample_grid must be positive")
        if self.policy not in _POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}")
        if self.policy == "cjsq" and not 0 <= self.cjsq_n < n:
            raise ValueError("cjsq needs 0 <= n < N")
        if self.buffer_b is not None and self.buffer_b < 1:
            raise ValueError("buffer must be >= 1 (or None for infinite)")
        if self.initial_x is not None:
            x0 = np.asarray(self.initial_x, np.int64)
            if x0.shape != (n,):
                raise ValueError("initial_x length must equal vertex count")
            if x0.min() < 0:
                raise ValueError("negative initial queue length")
            if self.buffer_b is not None and x0.max() > self.buffer_b:
                raise ValueError("initial state exceeds buffer")
        return self


def _sample_times(horizon: float, grid: float) -> np.ndarray:
    k = int(math.floor(horizon / grid + 1e-9))
    times = np.arange(k + 1, dtype=np.float64) * grid
    if times[-1] < horizon - 1e-12:
        times = np.append(times, horizon)
    else:
        times[-1] = horizon
    return times


@dataclass
class Trace:
    """Sampled occupancy path plus exact time integrals of the Q_i."""

    times: np.ndarray  # float64 (S,)
    Q: np.ndarray  # int64 (S, K) raw counts, level i = column i-1
    int_Q: np.ndarray  # float64 (S, K) integral of Q_i over [0, t]
    total: np.ndarray  # int64 (S,) tasks in system
    int_total: np.ndarray  # float64 (S,)
    arrivals: np.ndarray  # int64 cumulative, sampled
    departures: np.ndarray
    discards: np.ndarray
    n: int
    lam: float
    label: str = ""
    subset_Q: np.ndarray | None = None
    wait_starts: np.ndarray | None = None  # service-start times of finished waits
    wait_values: np.ndarray | None = None
    final_arrivals: int = 0
    final_departures: int = 0
    final_discards: int = 0
    final_total: int = 0

    @property
    def q(self) -> np.ndarray:
        """Occupancy fractions q_i = Q_i / N."""
        return self.Q / self.n

    @property
    def levels(self) -> int:
        return self.Q.shape[1]

    def column(self, i: int) -> np.ndarray:
        """Raw Q_i series (1-based level index)."""
        return self.Q[:, i - 1]

    def csv_text(self, extra: dict[str, np.ndarray] | None = None) -> str:
        cols = ["t"] + [f"q{i}" for i in range(1, self.levels + 1)]
        cols += ["arrivals", "departures", "discards"]
        extra = extra or {}
        cols += list(extra)
        lines = [",".join(cols)]
        for s in range(self.times.size):
            row = [f"{self.times[s]:.12g}"]
            row += [f"{self.Q[s, i] / self.n:.12g}" for i in range(self.levels)]
            row += [str(int(self.arrivals[s])), str(int(self.departures[s])),
                    str(int(self.discards[s]))]
            for name in extra:
                v = extra[name][s]
                row.append(str(int(v)) if isinstance(v, (int, np.integer)) else f"{v:.12g}")
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


@dataclass
class CoupledTrace:
    """Joint path of the graph system and its ranked companion."""

    g_trace: Trace
    i_trace: Trace
    delta: np.ndarray  # int64 cumulative miss count, sampled
    resid: np.ndarray  # float64 sum_i |Q_i(G)-Q_i(I)| - 2*delta at samples
    bound_check_log: float  # max of the residual over every event
    final_delta: int

    def csv_text(self) -> str:
        return self.g_trace.csv_text(extra={"delta": self.delta, "bound_gap": self.resid})


def _run_state(seed: int, purpose: str) -> np.ndarray:
    return kernel_state(derive_seed(seed, purpose))


def _call_kernel(fn, *args):
    if K.USE_NUMBA:
        return fn(*args)
    # the fallback path executes the same source as plain Python; numpy warns
    # on (correctly wrapping) uint64 scalar overflow in the PRNG, so silence it
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return fn(*args)


def _level_setup(x0: np.ndarray, lmax: int, need_fenwick: bool):
    n = x0.size
    q = np.zeros(lmax + 2, np.int64)
    lc = np.zeros(lmax + 1, np.int64)
    for lvl, cnt in zip(*np.unique(x0, return_counts=True)):
        lc[lvl] = cnt
    for i in range(1, lmax + 2):
        q[i] = int((x0 >= i).sum())
    log2n = max(1, math.ceil(math.log2(n + 1)))
    if need_fenwick:
        fen = np.zeros((lmax + 1, n + 1), np.int64)
        for v in range(n):
            lvl = int(x0[v])
            i = v + 1
            while i <= n:
                fen[lvl, i] += 1
                i += i & (-i)
    else:
        fen = np.zeros((1, 1), np.int64)
    return q, lc, fen, log2n


def simulate(g: Graph, cfg: SimConfig) -> Trace:
    """Run one system on graph g; deterministic given (g, cfg)."""
    cfg = cfg.validated(g.n)
    n = g.n
    lam_total = cfg.lam * n
    if cfg.buffer_b is None:
        b_cap = -1
        lmax = cfg.max_levels
    else:
        b_cap = cfg.buffer_b
        lmax = cfg.buffer_b
    kq = max(1, min(cfg.record_levels, lmax))
    x = (np.zeros(n, np.int64) if cfg.initial_x is None
         else np.asarray(cfg.initial_x, np.int64).copy())
    need_fen = cfg.policy == "cjsq"
    q, lc, fen, log2n = _level_setup(x, lmax, need_fen)

    samples = _sample_times(cfg.horizon, cfg.sample_grid)
    S = samples.size
    trace_q = np.zeros((S, kq), np.int64)
    trace_intq = np.zeros((S, kq), np.float64)
    trace_total = np.zeros(S, np.int64)
    trace_inttotal = np.zeros(S, np.float64)
    trace_counts = np.zeros((S, 3), np.int64)

    track_subset = 0
    subset_mask = np.zeros(1, np.int8)
    qs_counts = np.zeros(1, np.int64)
    trace_qs = np.zeros((1, 1), np.int64)
    if cfg.subset is not None:
        track_subset = 1
        subset_mask = np.zeros(n, np.int8)
        subset_mask[np.asarray(cfg.subset, np.int64)] = 1
        qs_counts = np.zeros(lmax + 2, np.int64)
        sel = subset_mask.astype(bool)
        for i in range(1, lmax + 2):
            qs_counts[i] = int((x[sel] >= i).sum())
        trace_qs = np.zeros((S, kq), np.int64)

    busy_list = np.full(n, -1, np.int64)
    busy_pos = np.full(n, -1, np.int64)
    nb = 0
    for v in range(n):
        if x[v] > 0:
            busy_list[nb] = v
            busy_pos[v] = nb
            nb += 1

    if cfg.record_waits:
        mean_arr = lam_total * cfg.horizon
        wcap = int(mean_arr + 12.0 * math.sqrt(mean_arr + 1.0) + 100)
        ring = np.zeros((n, lmax + 1), np.float64)
        ring_head = np.zeros(n, np.int64)
        wait_t = np.zeros(wcap, np.float64)
        wait_v = np.zeros(wcap, np.float64)
    else:
        ring = np.zeros((1, 1), np.float64)
        ring_head = np.zeros(1, np.int64)
        wait_t = np.zeros(1, np.float64)
        wait_v = np.zeros(1, np.float64)

    sstate = _run_state(cfg.seed, "simulate")
    out = np.zeros(K.OUT_SIZE, np.int64)
    _call_kernel(
        K._simulate_loop,
        g.indptr, g.indices, n,
        _POLICIES[cfg.policy], cfg.cjsq_n,
        lam_total, b_cap, cfg.horizon,
        x, sstate,
        samples,
        q, lc,
        trace_q, trace_intq, trace_total, trace_inttotal, trace_counts,
        subset_mask, track_subset, qs_counts, trace_qs,
        busy_list, busy_pos,
        fen, log2n,
        ring, ring_head,
        wait_t, wait_v, 1 if cfg.record_waits else 0,
        10_000 if cfg.debug_checks else 0,
        out,
    )
    if out[K.OUT_ERROR] == K.ERR_LEVEL_OVERFLOW:
        raise RuntimeError(
            f"a queue exceeded {lmax} levels; raise max_levels or lower the load")
    if out[K.OUT_ERROR] == K.ERR_RECOUNT:
        raise RuntimeError("occupancy bookkeeping mismatch (internal error)")
    if cfg.record_waits and out[K.OUT_WAIT_OVERFLOW]:
        raise RuntimeError("waiting-time tally buffer overflow (internal error)")

    nw = int(out[K.OUT_NWAITS])
    return Trace(
        times=samples,
        Q=trace_q, int_Q=trace_intq,
        total=trace_total, int_total=trace_inttotal,
        arrivals=trace_counts[:, 0], departures=trace_counts[:, 1],
        discards=trace_counts[:, 2],
        n=n, lam=cfg.lam, label=g.label,
        subset_Q=trace_qs if track_subset else None,
        wait_starts=wait_t[:nw].copy() if cfg.record_waits else None,
        wait_values=wait_v[:nw].copy() if cfg.record_waits else None,
        final_arrivals=int(out[K.OUT_ARRIVALS]),
        final_departures=int(out[K.OUT_DEPARTURES]),
        final_discards=int(out[K.OUT_DISCARDS]),
        final_total=int(out[K.OUT_TOTAL]),
    )


def simulate_coupled(g: Graph, cfg: SimConfig, n: int,
                     tie_rule: str = "earliest") -> CoupledTrace:
    """Drive the graph system and its rank-n companion by one event stream.

    ``n`` bounds the companion's assignment set: every companion task goes to
    one of its n + 1 shortest queues.  Requires an infinite buffer; the
    graph-system marginal is the same chain as ``simulate`` because the rate-N
    ranked departure clocks thin to rate 1 per busy server.
    """
    cfg = cfg.validated(g.n)
    if cfg.buffer_b is not None:
        raise ValueError("coupled runs require an infinite buffer")
    if not 0 <= n < g.n:
        raise ValueError("need 0 <= n < N")
    if tie_rule not in ("earliest", "latest"):
        raise ValueError("tie_rule must be 'earliest' or 'latest'")
    nv = g.n
    lam_total = cfg.lam * nv
    lmax = cfg.max_levels
    kq = max(1, min(cfg.record_levels, lmax))
    x0 = (np.zeros(nv, np.int64) if cfg.initial_x is None
          else np.asarray(cfg.initial_x, np.int64).copy())
    xg = x0.copy()
    xi = x0.copy()
    qg, lcg, feng, log2n = _level_setup(xg, lmax, True)
    qi, lci, feni, _ = _level_setup(xi, lmax, True)

    samples = _sample_times(cfg.horizon, cfg.sample_grid)
    S = samples.size

    def _alloc():
        return (np.zeros((S, kq), np.int64), np.zeros((S, kq), np.float64),
                np.zeros(S, np.int64), np.zeros(S, np.float64))

    tq_g, tintq_g, ttot_g, tinttot_g = _alloc()
    tq_i, tintq_i, ttot_i, tinttot_i = _alloc()
    trace_counts = np.zeros((S, 3), np.int64)
    trace_delta = np.zeros(S, np.int64)
    trace_resid = np.zeros(S, np.float64)

    sstate = _run_state(cfg.seed, "couple")
    out = np.zeros(K.OUT_SIZE, np.int64)
    out_f = np.zeros(1, np.float64)
    _call_kernel(
        K._coupled_loop,
        g.indptr, g.indices, nv,
        n, 1 if tie_rule == "latest" else 0,
        lam_total, cfg.horizon,
        xg, xi, sstate,
        samples,
        qg, qi, lcg, lci,
        feng, feni, log2n,
        tq_g, tintq_g, ttot_g, tinttot_g,
        tq_i, tintq_i, ttot_i, tinttot_i,
        trace_counts, trace_delta, trace_resid,
        10_000 if cfg.debug_checks else 0,
        out_f,
        out,
    )
    if out[K.OUT_ERROR] == K.ERR_LEVEL_OVERFLOW:
        raise RuntimeError(
            f"a queue exceeded {lmax} levels; raise max_levels or lower the load")
    if out[K.OUT_ERROR] == K.ERR_RECOUNT:
        raise RuntimeError("occupancy bookkeeping mismatch (internal error)")

    def _mk(tq, tintq, ttot, tinttot, deps, final_deps, final_tot):
        return Trace(
            times=samples, Q=tq, int_Q=tintq, total=ttot, int_total=tinttot,
            arrivals=trace_counts[:, 0], departures=deps,
            discards=np.zeros(S, np.int64),
            n=nv, lam=cfg.lam, label=g.label,
            final_arrivals=int(out[K.OUT_ARRIVALS]),
            final_departures=final_deps, final_discards=0, final_total=final_tot,
        )

    g_trace = _mk(tq_g, tintq_g, ttot_g, tinttot_g, trace_counts[:, 1],
                  int(out[K.OUT_DEPARTURES]), int(out[K.OUT_TOTAL]))
    i_total = int(out[K.OUT_ARRIVALS]) - int(out[K.OUT_DEPARTURES_I]) + int(x0.sum())
    i_trace = _mk(tq_i, tintq_i, ttot_i, tinttot_i, trace_counts[:, 2],
                  int(out[K.OUT_DEPARTURES_I]), i_total)
    return CoupledTrace(
        g_trace=g_trace, i_trace=i_trace,
        delta=trace_delta, resid=trace_resid,
        bound_check_log=float(out_f[0]),
        final_delta=int(out[K.OUT_DELTA]),
    )


# ---------------------------------------------------------------------------
# single-call assignment operations (same sampling code as the event loop)

def assign_graph_jsq(g: Graph, state: OccupancyState, v: int, rng: Stream) -> int:
    """Target of one arrival at vertex v, or DISCARD when N[v] is full."""
    if not 0 <= v < g.n:
        raise ValueError("vertex out of range")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        tgt = int(K._jsq_pick(state.x, g.indptr, g.indices, np.int64(v), rng.state))
    if state.buffer_b is not None and state.x[tgt] >= state.buffer_b:
        return DISCARD
    return tgt


def assign_cjsq(state: OccupancyState, n: int, rng: Stream) -> int:
    """Uniform pick among the n + 1 servers with shortest queues (id ties)."""
    if not 0 <= n < state.n_servers:
        raise ValueError("need 0 <= n < N")
    r = rng.randbelow(n + 1)
    order = np.lexsort((np.arange(state.n_servers), state.x))
    return int(order[r])


def _batch_edges(n_samples: int, start: int, batches: int) -> np.ndarray:
    return np.linspace(start, n_samples - 1, batches + 1).round().astype(np.int64)


@dataclass
class StationarySummary:
    qbar: np.ndarray  # time-averaged fractions, level i at index i-1
    qbar_se: np.ndarray
    tail2: float  # time average of sum_{i>=2} q_i
    tail2_se: float
    w_littles: float  # tail2 / lam
    w_littles_se: float
    fcfs_mean: float | None
    fcfs_se: float | None
    warmup: float
    batches: int

    def tail_mean(self, m: int) -> tuple[float, float]:
        """Time average and SE of sum_{i>=m} q_i (needs m-1 < traced levels)."""
        return self._tails[m]

    _tails: dict[int, tuple[float, float]] = field(default_factory=dict, repr=False)


def stationary_stats(trace: Trace, warmup: float, batches: int = 20) -> StationarySummary:
    """Time-weighted averages over [warmup, horizon] with batch-means SEs.

    Exact time integrals recorded with the trace make every batch average an
    exact time average between two sample instants.
    """
    times = trace.times
    horizon = times[-1]
    if not 0 <= warmup < horizon:
        raise ValueError("warmup must lie inside the horizon")
    start = int(np.searchsorted(times, warmup - 1e-12))
    if times.size - 1 - start < batches:
        raise ValueError(
            f"only {times.size - 1 - start} sample intervals after warmup; "
            f"need at least {batches}")
    edges = _batch_edges(times.size, start, batches)
    t_edge = times[edges]
    dt_batch = np.diff(t_edge)
    span = t_edge[-1] - t_edge[0]
    n = trace.n
    kq = trace.levels

    qbar = (trace.int_Q[edges[-1]] - trace.int_Q[edges[0]]) / span / n
    per_batch_q = (np.diff(trace.int_Q[edges], axis=0) / dt_batch[:, None]) / n
    qbar_se = per_batch_q.std(axis=0, ddof=1) / math.sqrt(batches)

    int_tail = trace.int_total - trace.int_Q[:, 0]
    tail2 = float((int_tail[edges[-1]] - int_tail[edges[0]]) / span / n)
    per_batch_tail = np.diff(int_tail[edges]) / dt_batch / n
    tail2_se = float(per_batch_tail.std(ddof=1) / math.sqrt(batches))

    tails: dict[int, tuple[float, float]] = {}
    int_total_diff = np.diff(trace.int_total[edges])
    tails[1] = (float((trace.int_total[edges[-1]] - trace.int_total[edges[0]]) / span / n),
                float((int_total_diff / dt_batch / n).std(ddof=1) / math.sqrt(batches)))
    tails[2] = (tail2, tail2_se)
    for m in range(3, kq + 2):
        int_m = trace.int_total - trace.int_Q[:, :m - 1].sum(axis=1)
        val = float((int_m[edges[-1]] - int_m[edges[0]]) / span / n)
        se = float((np.diff(int_m[edges]) / dt_batch / n).std(ddof=1) / math.sqrt(batches))
        tails[m] = (val, se)

    fcfs_mean = fcfs_se = None
    if trace.wait_starts is not None and trace.wait_starts.size:
        sel = trace.wait_starts >= t_edge[0]
        vals = trace.wait_values[sel]
        starts = trace.wait_starts[sel]
        if vals.size:
            fcfs_mean = float(vals.mean())
            bins = np.clip(np.searchsorted(t_edge, starts, side="right") - 1,
                           0, batches - 1)
            bmeans = [vals[bins == b].mean() for b in range(batches) if (bins == b).any()]
            if len(bmeans) >= 2:
                fcfs_se = float(np.std(bmeans, ddof=1) / math.sqrt(len(bmeans)))

    lam = trace.lam
    summ = StationarySummary(
        qbar=qbar, qbar_se=qbar_se,
        tail2=tail2, tail2_se=tail2_se,
        w_littles=tail2 / lam, w_littles_se=tail2_se / lam,
        fcfs_mean=fcfs_mean, fcfs_se=fcfs_se,
        warmup=float(t_edge[0]), batches=batches,
    )
    summ._tails = tails
    return summ
