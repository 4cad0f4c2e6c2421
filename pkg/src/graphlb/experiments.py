"""Config-driven experiment suite with CSV outputs and pass/fail checks.

Seven named experiments reproduce the package's headline phenomena at desk
scale: fluid-limit agreement, diffusion-scale tightness, steady-state waiting
time sweeps, topology comparisons, load effects, sub-optimality
counterexamples, and a coupling audit.  Each experiment owns a derived seed
sub-stream, emits one or more CSV tables, and evaluates named checks against
tolerances fixed by pilot runs.  A failed experiment is retried once with a
fresh derived seed; the retry is noted in the report.

Outputs never contain timestamps or timings, so a rerun with the same config
and seed writes byte-identical files.
"""

from __future__ import annotations

import configparser
import math
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .fluid import (bipartite_fluid_integrate, bipartite_stop_time,
                    diffusion_scale, fluid_integrate)
from .graphs import (Graph, bipartite_part_size, gen_clique,
                     gen_complete_bipartite, gen_erdos_renyi, gen_ring,
                     gen_rgg_torus, gen_toric_grid, rgg_radius)
from .rng import derive_seed
from .sim import SimConfig, simulate, simulate_coupled, stationary_stats

__all__ = [
    "ExperimentSpec",
    "CheckOutcome",
    "ExperimentResult",
    "EXPERIMENT_NAMES",
    "run_experiment",
    "run_fig_fluid",
    "run_fig_diffusion",
    "run_fig_steady_sweep",
    "run_fig_topology_compare",
    "run_fig_load_effect",
    "run_counterexamples",
    "run_coupling_audit",
    "load_suite_config",
    "run_all",
]

_PROFILES = ("ci", "full")


@dataclass
class ExperimentSpec:
    """One named experiment at a profile, with optional tolerance overrides."""

    name: str
    profile: str = "ci"
    seed: int = 0
    tol_overrides: dict[str, float] = field(default_factory=dict)

    def validated(self) -> "ExperimentSpec":
        if self.name not in _RUNNERS:
            raise ValueError(f"unknown experiment {self.name!r}; "
                             f"known: {', '.join(EXPERIMENT_NAMES)}")
        if self.profile not in _PROFILES:
            raise ValueError(f"unknown profile {self.profile!r}")
        known = _STATIC_TOLS[self.name][self.profile]
        for key in self.tol_overrides:
            if key not in known:
                raise ValueError(
                    f"experiment {self.name!r} has no tolerance {key!r}; "
                    f"known: {', '.join(sorted(known))}")
        return self


@dataclass
class CheckOutcome:
    name: str
    measured: float
    tolerance: float
    passed: bool
    relation: str  # "<=" or ">="

    def line(self) -> str:
        word = "PASS" if self.passed else "FAIL"
        return (f"{word} {self.name}: measured {self.measured:.6g} "
                f"{self.relation} {self.tolerance:.6g}")


@dataclass
class ExperimentResult:
    name: str
    profile: str
    seed: int
    checks: list[CheckOutcome]
    tables: dict[str, str]  # file name -> csv text
    info: list[str] = field(default_factory=list)
    retried: bool = False

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _le(name: str, measured: float, tol: float) -> CheckOutcome:
    return CheckOutcome(name, float(measured), float(tol),
                        float(measured) <= float(tol), "<=")


def _ge(name: str, measured: float, tol: float) -> CheckOutcome:
    return CheckOutcome(name, float(measured), float(tol),
                        float(measured) >= float(tol), ">=")


def _tols(spec: ExperimentSpec) -> dict[str, float]:
    vals = dict(_STATIC_TOLS[spec.name][spec.profile])
    vals.update(spec.tol_overrides)
    return vals


def _z_above(w_lo: float, se_lo: float, w_hi: float, se_hi: float) -> float:
    """Separation of w_hi above w_lo in combined standard errors."""
    return (w_hi - w_lo) / max(math.hypot(se_lo, se_hi), 1e-12)


def _ols_t(x: np.ndarray, y: np.ndarray) -> float:
    """t-statistic of the slope in y = a + b*x + noise."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    xc = x - x.mean()
    sxx = float((xc * xc).sum())
    if sxx <= 0 or x.size < 3:
        return 0.0
    b = float((xc * y).sum()) / sxx
    resid = y - y.mean() - b * xc
    s2 = float((resid * resid).sum()) / (x.size - 2)
    return b / max(math.sqrt(s2 / sxx), 1e-300)


def _first_crossing(times: np.ndarray, series: np.ndarray, level: float) -> float:
    """First sample time at which series >= level; horizon*2 + 1 if never."""
    hit = np.flatnonzero(series >= level)
    if hit.size == 0:
        return float(times[-1]) * 2.0 + 1.0
    return float(times[hit[0]])


def _csv(header: list[str], rows: list[list]) -> str:
    out = [",".join(header)]
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, str):
                cells.append(v)
            elif isinstance(v, (int, np.integer)):
                cells.append(str(int(v)))
            else:
                cells.append(f"{float(v):.12g}")
        out.append(",".join(cells))
    return "\n".join(out) + "\n"


def _stationary_w(g: Graph, lam: float, horizon: float, warmup: float,
                  seed: int) -> tuple[float, float]:
    cfg = SimConfig(lam=lam, horizon=horizon, seed=seed,
                    sample_grid=0.5, record_levels=8)
    summ = stationary_stats(simulate(g, cfg), warmup)
    return summ.w_littles, summ.w_littles_se


# ---------------------------------------------------------------------------
# fig_fluid: finite system vs the mean-field ODE at lambda = 0.8

def run_fig_fluid(spec: ExperimentSpec) -> ExperimentResult:
    spec = spec.validated()
    tol = _tols(spec)
    n = 10_000 if spec.profile == "full" else 1_000
    p = 1.0 / math.sqrt(n)
    lam, horizon, grid = 0.8, 10.0, 0.1

    ge = gen_erdos_renyi(n, p, derive_seed(spec.seed, "graph"))
    gc = gen_clique(n)
    cfg = SimConfig(lam=lam, horizon=horizon, seed=derive_seed(spec.seed, "erdos"),
                    sample_grid=grid, record_levels=4)
    tr_e = simulate(ge, cfg)
    tr_c = simulate(gc, replace(cfg, seed=derive_seed(spec.seed, "clique")))
    fl = fluid_integrate(lam, horizon, dt=1e-3)

    def gaps(tr):
        f1 = np.interp(tr.times, fl.times, fl.q[:, 0])
        f2 = np.interp(tr.times, fl.times, fl.q[:, 1])
        g1 = float(np.abs(tr.q[:, 0] - f1).max())
        g2 = float(np.abs(tr.q[:, 1] - f2).max())
        return g1, g2, f1, f2

    e1, e2, fe1, fe2 = gaps(tr_e)
    c1, c2, _, _ = gaps(tr_c)
    checks = [
        _le("erdos_q1_gap", e1, tol["gap"]),
        _le("erdos_q2_gap", e2, tol["gap"]),
        _le("clique_q1_gap", c1, tol["gap"]),
        _le("clique_q2_gap", c2, tol["gap"]),
        _le("clique_excess", max(c1, c2) - max(e1, e2), tol["clique_excess"]),
    ]
    tables = {
        "fig_fluid_erdos.csv": _csv(
            ["t", "q1", "q2", "q1_fluid", "q2_fluid"],
            [[tr_e.times[s], tr_e.q[s, 0], tr_e.q[s, 1], fe1[s], fe2[s]]
             for s in range(tr_e.times.size)]),
        "fig_fluid_clique.csv": _csv(
            ["t", "q1", "q2", "q1_fluid", "q2_fluid"],
            [[tr_c.times[s], tr_c.q[s, 0], tr_c.q[s, 1], fe1[s], fe2[s]]
             for s in range(tr_c.times.size)]),
    }
    info = [f"erdos N={n} p={p:.6g} hash={ge.content_hash()[:12]}",
            f"clique N={n}",
            f"lambda={lam} horizon={horizon} grid={grid}"]
    return ExperimentResult(spec.name, spec.profile, spec.seed, checks, tables, info)


# ---------------------------------------------------------------------------
# fig_diffusion: heavy-traffic scaling N - sqrt(N), dense random graph

def run_fig_diffusion(spec: ExperimentSpec) -> ExperimentResult:
    spec = spec.validated()
    tol = _tols(spec)
    n = 10_000 if spec.profile == "full" else 2_500
    lam_total = n - math.sqrt(n)
    p_rule = math.log(n) ** 2 / math.sqrt(n)
    horizon, grid = 20.0, 0.05

    if p_rule >= 1.0:
        g = gen_clique(n)
        note = f"p rule {p_rule:.4g} >= 1 at N={n}: clique used"
    else:
        g = gen_erdos_renyi(n, p_rule, derive_seed(spec.seed, "graph"))
        note = f"erdos p={p_rule:.6g} hash={g.content_hash()[:12]}"

    # 5*sqrt(N) idles and 8*sqrt(N) doubly-busy servers: the centered state
    # starts at (-5, 8, 0, ...).  With idles plentiful no arrival lands on a
    # busy server, so the second component first decays at exactly unit rate,
    # which the mean-reversion regression then has a clean window to see
    root = math.ceil(math.sqrt(n))
    x0 = np.ones(n, np.int64)
    x0[:5 * root] = 0
    x0[5 * root:13 * root] = 2

    reps = 3
    step = max(1, int(round(0.25 / grid)))
    rows = []
    xs, ys = [], []
    band1 = band2 = band3 = 0.0
    beta = (n - lam_total) / math.sqrt(n)
    for rep in range(reps):
        cfg = SimConfig(lam=lam_total / n, horizon=horizon,
                        seed=derive_seed(spec.seed, "sim", rep),
                        sample_grid=grid, record_levels=4, initial_x=x0)
        tr = simulate(g, cfg)
        dp = diffusion_scale(tr.times, tr.Q[:, :3], n, lam_total)
        q1b, q2b, q3b = dp.qbar[:, 0], dp.qbar[:, 1], dp.qbar[:, 2]
        beta = dp.beta
        band1 = max(band1, float(np.abs(q1b).max()))
        band2 = max(band2, float(q2b.max()))
        band3 = max(band3, float(q3b.max()))
        coarse = q2b[::step]
        xs.append(coarse[:-1])
        ys.append(np.diff(coarse))
        rows += [[rep, dp.times[s], q1b[s], q2b[s], q3b[s]]
                 for s in range(dp.times.size)]

    # mean reversion of the second component: regress increments on the
    # level, pooled over replications
    t_stat = _ols_t(np.concatenate(xs), np.concatenate(ys))
    checks = [
        _le("qbar3_max", band3, tol["qbar3_max"]),
        _le("qbar1_band", band1, tol["band"]),
        _le("qbar2_band", band2, tol["band"]),
        _le("qbar2_reversion_t", t_stat, tol["reversion_t"]),
    ]
    tables = {"fig_diffusion.csv": _csv(
        ["rep", "t", "qbar1", "qbar2", "qbar3"], rows)}
    info = [note, f"N={n} lambda_total={lam_total:.6g} beta={beta:.6g}",
            f"horizon={horizon} grid={grid} reps={reps}"]
    return ExperimentResult(spec.name, spec.profile, spec.seed, checks, tables, info)


# ---------------------------------------------------------------------------
# fig_steady_sweep: waiting time vs N for edge-probability rules c(N)/N

_SWEEP_RULES = (
    ("c2", lambda n: 2.0),
    ("c3", lambda n: 3.0),
    ("clogN", lambda n: math.log(n)),
    ("csqrtN", lambda n: math.sqrt(n)),
    ("clique", None),
)


def run_fig_steady_sweep(spec: ExperimentSpec) -> ExperimentResult:
    spec = spec.validated()
    tol = _tols(spec)
    grid_n = ([100, 200, 500, 1000, 2000] if spec.profile == "full"
              else [100, 200, 500])
    lam, horizon, warmup = 0.9, 250.0, 50.0

    rows = []
    w_by = {}
    hashes = []
    for rule, cfun in _SWEEP_RULES:
        for n in grid_n:
            if cfun is None:
                g = gen_clique(n)
                c = float(n - 1)
            else:
                c = float(cfun(n))
                g = gen_erdos_renyi(n, min(c / n, 1.0),
                                    derive_seed(spec.seed, "graph", rule, n))
                hashes.append(f"{rule} N={n} hash={g.content_hash()[:12]}")
            w, se = _stationary_w(g, lam, horizon, warmup,
                                  derive_seed(spec.seed, "sim", rule, n))
            w_by[rule, n] = (w, se)
            rows.append([rule, n, c, w, se])

    n_lo, n_hi = grid_n[0], grid_n[-1]
    checks = [
        _le("sqrtN_w_shrinks", w_by["csqrtN", n_hi][0],
            tol["sqrtN_shrink_factor"] * w_by["csqrtN", n_lo][0]),
        _ge("c2_w_floor", w_by["c2", n_hi][0], tol["c2_floor"]),
        _le("clique_w_small", w_by["clique", n_hi][0], tol["clique_w"]),
    ]
    tables = {"fig_steady_sweep.csv": _csv(
        ["rule", "N", "c", "W", "W_se"], rows)}
    info = [f"lambda={lam} horizon={horizon} warmup={warmup}",
            f"N grid: {grid_n}"] + hashes
    return ExperimentResult(spec.name, spec.profile, spec.seed, checks, tables, info)


# ---------------------------------------------------------------------------
# fig_topology_compare: structured vs random graphs at matched degree

def run_fig_topology_compare(spec: ExperimentSpec) -> ExperimentResult:
    spec = spec.validated()
    tol = _tols(spec)
    if spec.profile == "full":
        n, side, horizon, warmup = 900, 30, 250.0, 50.0
    else:
        n, side, horizon, warmup = 400, 20, 150.0, 30.0
    lam = 0.9

    builds = [
        ("deg2", "ring", lambda s: gen_ring(n)),
        ("deg2", "errg", lambda s: gen_erdos_renyi(n, 2.0 / n, s)),
        ("deg2", "rgg", lambda s: gen_rgg_torus(n, rgg_radius(n, 2.0), s)),
        ("deg4", "grid", lambda s: gen_toric_grid(side, side)),
        ("deg4", "errg", lambda s: gen_erdos_renyi(n, 4.0 / n, s)),
        ("deg4", "rgg", lambda s: gen_rgg_torus(n, rgg_radius(n, 4.0), s)),
    ]
    w = {}
    rows = []
    info = [f"N={n} lambda={lam} horizon={horizon} warmup={warmup}"]
    for fam, kind, build in builds:
        g = build(derive_seed(spec.seed, "graph", fam, kind))
        val, se = _stationary_w(g, lam, horizon, warmup,
                                derive_seed(spec.seed, "sim", fam, kind))
        w[fam, kind] = (val, se)
        rows.append([fam, kind, n, val, se])
        info.append(f"{fam}/{kind} hash={g.content_hash()[:12]}")

    def z(fam, lo, hi):
        return _z_above(*w[fam, lo], *w[fam, hi])

    checks = [
        _ge("deg2_ring_below_errg_z", z("deg2", "ring", "errg"), tol["ring_sep_z"]),
        _ge("deg2_ring_below_rgg_z", z("deg2", "ring", "rgg"), tol["ring_sep_z"]),
        _ge("deg2_rgg_worst",
            w["deg2", "rgg"][0] - max(w["deg2", "ring"][0], w["deg2", "errg"][0]),
            0.0),
        _ge("deg4_rgg_worst",
            w["deg4", "rgg"][0] - max(w["deg4", "grid"][0], w["deg4", "errg"][0]),
            0.0),
        _ge("all_w_positive",
            min(v - 3.0 * se for v, se in w.values()), 0.0),
    ]
    tables = {"fig_topology_compare.csv": _csv(
        ["family", "graph", "N", "W", "W_se"], rows)}
    return ExperimentResult(spec.name, spec.profile, spec.seed, checks, tables, info)


# ---------------------------------------------------------------------------
# fig_load_effect: convergence speed of W(N) across loads

def run_fig_load_effect(spec: ExperimentSpec) -> ExperimentResult:
    spec = spec.validated()
    tol = _tols(spec)
    grid_n = ([100, 200, 500, 1000, 2000] if spec.profile == "full"
              else [100, 200, 500])
    lams = (0.65, 0.75, 0.9)
    horizon, warmup = 250.0, 50.0

    w = {}
    rows = []
    hashes = []
    for n in grid_n:
        g = gen_erdos_renyi(n, math.log(n) / n, derive_seed(spec.seed, "graph", n))
        hashes.append(f"N={n} hash={g.content_hash()[:12]}")
        for lam in lams:
            val, se = _stationary_w(g, lam, horizon, warmup,
                                    derive_seed(spec.seed, "sim", n, round(lam * 100)))
            w[lam, n] = (val, se)
            rows.append([lam, n, val, se])

    n_lo, n_hi = grid_n[0], grid_n[-1]
    ratio = {lam: w[lam, n_hi][0] / max(w[lam, n_lo][0], 1e-12) for lam in lams}
    checks = [
        _ge("w_monotone_in_lam_mid_z",
            _z_above(*w[0.65, n_hi], *w[0.75, n_hi]), tol["mono_z"]),
        _ge("w_monotone_in_lam_high_z",
            _z_above(*w[0.75, n_hi], *w[0.9, n_hi]), tol["mono_z"]),
        _le("low_load_shrink_ratio", ratio[0.65], tol["low_ratio"]),
        _ge("high_load_slower", ratio[0.9] - ratio[0.65], 0.0),
    ]
    tables = {"fig_load_effect.csv": _csv(["lambda", "N", "W", "W_se"], rows)}
    info = [f"p=log(N)/N, lambdas={list(lams)}, horizon={horizon} warmup={warmup}",
            f"N grid: {grid_n}"] + hashes
    return ExperimentResult(spec.name, spec.profile, spec.seed, checks, tables, info)


# ---------------------------------------------------------------------------
# counterexamples: ring and complete bipartite sub-optimality

def run_counterexamples(spec: ExperimentSpec) -> ExperimentResult:
    spec = spec.validated()
    tol = _tols(spec)
    full = spec.profile == "full"
    n_ring = 2000 if full else 500
    n_bip = 2000 if full else 600
    c, lam_hi, lam_lo = 0.3, 0.9, 0.6
    horizon_s, warmup = (250.0, 50.0) if full else (150.0, 30.0)

    # (a) ring keeps a macroscopic fraction of queues at length >= 2
    g_ring = gen_ring(n_ring)
    tr_ring = simulate(g_ring, SimConfig(
        lam=lam_hi, horizon=horizon_s, seed=derive_seed(spec.seed, "ring"),
        sample_grid=0.5, record_levels=8))
    ring_tail2 = stationary_stats(tr_ring, warmup).tail2

    # (b) bipartite above threshold: transient blow-up on the small side
    g_bip = gen_complete_bipartite(n_bip, c)
    na = bipartite_part_size(n_bip, c)
    cfg_hi = SimConfig(lam=lam_hi, horizon=20.0,
                       seed=derive_seed(spec.seed, "bip-high"), sample_grid=0.05,
                       record_levels=4, subset=np.arange(na))
    tr_hi = simulate(g_bip, cfg_hi)
    q2 = tr_hi.q[:, 1]
    q1a = tr_hi.subset_Q[:, 0] / n_bip
    t_cross = _first_crossing(tr_hi.times, q2, 0.05)
    t_stop = bipartite_stop_time(lam_hi, c)
    bp = bipartite_fluid_integrate(lam_hi, c, 20.0)
    pre = tr_hi.times <= t_stop - 0.05
    fluid_at = np.interp(tr_hi.times[pre], bp.times, bp.q1a)
    fluid_gap = float(np.abs(q1a[pre] - fluid_at).max())
    t_sat = _first_crossing(tr_hi.times, q1a, c - 0.005)

    # (c) below threshold the small side de-saturates; no mass at level two
    tr_lo = simulate(g_bip, SimConfig(
        lam=lam_lo, horizon=horizon_s, seed=derive_seed(spec.seed, "bip-low"),
        sample_grid=0.5, record_levels=4))
    low_q2 = float(stationary_stats(tr_lo, warmup).qbar[1])

    checks = [
        _ge("ring_tail2", ring_tail2, tol["ring_tail2"]),
        _le("bip_q2_crossing_time", t_cross, tol["q2_cross_by"]),
        _le("bip_fluid_gap", fluid_gap, tol["fluid_gap"]),
        _le("bip_saturation_time_err", abs(t_sat - t_stop), tol["sat_time_err"]),
        _le("bip_low_load_q2", low_q2, tol["low_q2"]),
    ]
    tables = {
        "counterexample_ring.csv": tr_ring.csv_text(),
        "counterexample_bipartite.csv": _csv(
            ["t", "q1", "q2", "q1A", "q2A"],
            [[tr_hi.times[s], tr_hi.q[s, 0], q2[s], q1a[s],
              tr_hi.subset_Q[s, 1] / n_bip] for s in range(tr_hi.times.size)]),
        "counterexample_bipartite_fluid.csv": bp.csv_text(),
        "counterexample_bipartite_low.csv": tr_lo.csv_text(),
    }
    info = [f"ring N={n_ring}, bipartite N={n_bip} c={c} (|A|={na})",
            f"lambda high={lam_hi} low={lam_lo}, stop time {t_stop:.6g}",
            f"stationary horizon={horizon_s} warmup={warmup}"]
    return ExperimentResult(spec.name, spec.profile, spec.seed, checks, tables, info)


# ---------------------------------------------------------------------------
# coupling_audit: miss counts and the pathwise bound across densities

_AUDIT_RULES = (
    ("d2", lambda n: 2.0),
    ("dlogN", lambda n: math.log(n)),
    ("dsqrtNlogN", lambda n: math.sqrt(n) * math.log(n)),
)


def run_coupling_audit(spec: ExperimentSpec) -> ExperimentResult:
    spec = spec.validated()
    tol = _tols(spec)
    full = spec.profile == "full"
    grid_n = [200, 800, 3200] if full else [100, 200, 400]
    reps = 5 if full else 3
    lam, horizon = 0.8, 10.0

    rows = []
    worst_resid = -math.inf
    avg = {}
    for rule, dfun in _AUDIT_RULES:
        for n in grid_n:
            d = float(dfun(n))
            n_rank = math.ceil(n / math.sqrt(d))
            vals = []
            for rep in range(reps):
                g = gen_erdos_renyi(n, min(d / n, 1.0),
                                    derive_seed(spec.seed, "graph", rule, n, rep))
                ct = simulate_coupled(
                    g, SimConfig(lam=lam, horizon=horizon,
                                 seed=derive_seed(spec.seed, "sim", rule, n, rep),
                                 sample_grid=0.5, record_levels=4),
                    n=min(n_rank, n - 1))
                dn = ct.final_delta / n
                vals.append(dn)
                worst_resid = max(worst_resid, ct.bound_check_log)
                rows.append([rule, n, rep, min(n_rank, n - 1), dn,
                             ct.bound_check_log])
            avg[rule, n] = sum(vals) / reps

    trend = [avg["dsqrtNlogN", n] for n in grid_n]
    worst_increase = max(trend[i + 1] - trend[i] for i in range(len(trend) - 1))
    checks = [
        _le("bound_residual_max", worst_resid, 0.0),
        _ge("d2_delta_floor", avg["d2", grid_n[-1]], tol["d2_floor"]),
        _le("sqrtNlogN_trend_increase", worst_increase, 0.0),
    ]
    tables = {"coupling_audit.csv": _csv(
        ["rule", "N", "rep", "n", "delta_over_N", "max_residual"], rows)}
    info = [f"lambda={lam} horizon={horizon} reps={reps}",
            f"N grid: {grid_n}; n(N)=ceil(N/sqrt(d))"]
    return ExperimentResult(spec.name, spec.profile, spec.seed, checks, tables, info)


# ---------------------------------------------------------------------------
# registry, static tolerances, config handling, suite driver

_RUNNERS = {
    "fig_fluid": run_fig_fluid,
    "fig_diffusion": run_fig_diffusion,
    "fig_steady_sweep": run_fig_steady_sweep,
    "fig_topology_compare": run_fig_topology_compare,
    "fig_load_effect": run_fig_load_effect,
    "counterexamples": run_counterexamples,
    "coupling_audit": run_coupling_audit,
}
EXPERIMENT_NAMES = tuple(_RUNNERS)

# pilot-calibrated pass thresholds, fixed per profile; config files may
# override any key via "tol_<name> = value" in the experiment's section
_STATIC_TOLS: dict[str, dict[str, dict[str, float]]] = {
    "fig_fluid": {
        "full": {"gap": 0.02, "clique_excess": 0.01},
        "ci": {"gap": 0.1, "clique_excess": 0.04},
    },
    "fig_diffusion": {
        "full": {"qbar3_max": 0.5, "band": 15.0, "reversion_t": -2.0},
        "ci": {"qbar3_max": 0.5, "band": 15.0, "reversion_t": -2.0},
    },
    "fig_steady_sweep": {
        "full": {"sqrtN_shrink_factor": 0.5, "c2_floor": 0.05, "clique_w": 0.02},
        "ci": {"sqrtN_shrink_factor": 0.75, "c2_floor": 0.05, "clique_w": 0.02},
    },
    "fig_topology_compare": {
        "full": {"ring_sep_z": 3.0},
        "ci": {"ring_sep_z": 3.0},
    },
    # low_ratio: with mean degree log(N) the low-load W shrinks by a constant
    # factor per decade of N, not to zero; measured W(Nmax)/W(Nmin) is ~0.41
    # over 100..2000 and ~0.62 over 100..500.
    "fig_load_effect": {
        "full": {"mono_z": 3.0, "low_ratio": 0.55},
        "ci": {"mono_z": 3.0, "low_ratio": 0.8},
    },
    # low_q2: the below-threshold system keeps a small but positive level-2
    # mass (~0.05, N-independent) because arrivals tie with the saturated
    # part's level-1 servers whenever its idle count touches zero; 0.08 is
    # the pilot-calibrated regression threshold for "bounded, no blow-up"
    "counterexamples": {
        "full": {"ring_tail2": 0.05, "q2_cross_by": 20.0, "fluid_gap": 0.03,
                 "sat_time_err": 0.1, "low_q2": 0.08},
        "ci": {"ring_tail2": 0.05, "q2_cross_by": 20.0, "fluid_gap": 0.03,
               "sat_time_err": 0.1, "low_q2": 0.08},
    },
    "coupling_audit": {
        "full": {"d2_floor": 0.02},
        "ci": {"d2_floor": 0.02},
    },
}


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    """Run one experiment; retry once with a derived seed if a check fails."""
    spec = spec.validated()
    result = _RUNNERS[spec.name](spec)
    if result.all_passed:
        return result
    retry = replace(spec, seed=derive_seed(spec.seed, "retry"))
    second = _RUNNERS[spec.name](retry)
    if second.all_passed:
        second.retried = True
        return second
    result.retried = True  # both attempts failed; report the first
    return result


@dataclass
class SuiteConfig:
    base_seed: int
    budget_seconds: float | None
    specs: list[ExperimentSpec]


def load_suite_config(text: str, profile: str) -> SuiteConfig:
    """Parse the flat key = value suite file; every error fires before any run."""
    if profile not in _PROFILES:
        raise ValueError(f"unknown profile {profile!r}")
    parser = configparser.ConfigParser()
    parser.optionxform = str  # tolerance names are case sensitive
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ValueError(f"bad suite config: {exc}") from exc

    base_seed = 0
    budget = None
    if parser.has_section("suite"):
        for key, val in parser.items("suite"):
            if key == "base_seed":
                base_seed = int(val)
            elif key == "budget_seconds":
                budget = float(val)
            else:
                raise ValueError(f"unknown [suite] key {key!r}")

    specs = []
    for section in parser.sections():
        if section == "suite":
            continue
        if section not in _RUNNERS:
            raise ValueError(f"unknown experiment {section!r}; "
                             f"known: {', '.join(EXPERIMENT_NAMES)}")
        seed = None
        tols: dict[str, float] = {}
        for key, val in parser.items(section):
            if key == "seed":
                seed = int(val)
            elif key.startswith("tol_"):
                tols[key[4:]] = float(val)
            else:
                raise ValueError(f"unknown key {key!r} in [{section}]")
        spec = ExperimentSpec(
            name=section, profile=profile,
            seed=seed if seed is not None else derive_seed(base_seed, section),
            tol_overrides=tols,
        ).validated()
        specs.append(spec)
    return SuiteConfig(base_seed, budget, specs)


def _summary_text(profile: str, base_seed: int,
                  results: list[ExperimentResult]) -> str:
    from . import __version__
    lines = [f"graphlb {__version__} experiment suite",
             f"profile: {profile}",
             f"base seed: {base_seed}",
             ""]
    total = passed = 0
    for r in results:
        lines.append(f"== {r.name} (seed {r.seed}) ==")
        lines.extend(f"  {s}" for s in r.info)
        if r.retried:
            lines.append("  note: retried once with a fresh derived seed")
        for c in r.checks:
            lines.append("  " + c.line())
            total += 1
            passed += c.passed
        ok = "PASS" if r.all_passed else "FAIL"
        lines.append(f"  result: {ok}")
        lines.append("")
    verdict = "PASS" if passed == total else "FAIL"
    lines.append(f"overall: {verdict} ({passed}/{total} checks)")
    return "\n".join(lines) + "\n"


def _checks_csv(results: list[ExperimentResult]) -> str:
    rows = [["check", "measured", "tolerance", "pass"]]
    for r in results:
        for c in r.checks:
            rows.append([f"{r.name}.{c.name}", f"{c.measured:.6g}",
                         f"{c.tolerance:.6g}", "true" if c.passed else "false"])
    return "\n".join(",".join(row) for row in rows) + "\n"


def run_all(config_text: str, profile: str, outdir: str | Path,
            log=None) -> int:
    """Run every experiment named in the config; 0 exit iff all checks pass.

    Writes per-experiment CSVs plus summary.txt and checks.csv into outdir.
    Timing never enters the output files; a configured budget overrun is
    reported on the log stream only.
    """
    suite = load_suite_config(config_text, profile)
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    log = log if log is not None else sys.stderr

    t0 = time.monotonic()
    results = []
    for spec in suite.specs:
        print(f"[graphlb] running {spec.name} ({profile})", file=log, flush=True)
        results.append(run_experiment(spec))
    elapsed = time.monotonic() - t0
    if suite.budget_seconds is not None and elapsed > suite.budget_seconds:
        print(f"[graphlb] warning: suite took {elapsed:.1f}s, over the "
              f"{suite.budget_seconds:.1f}s budget", file=log, flush=True)

    for r in results:
        for fname, text in r.tables.items():
            (out / fname).write_text(text)
    (out / "summary.txt").write_text(_summary_text(profile, suite.base_seed, results))
    (out / "checks.csv").write_text(_checks_csv(results))
    return 0 if all(r.all_passed for r in results) else 1
