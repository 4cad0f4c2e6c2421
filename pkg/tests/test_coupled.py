import math
import random

import numpy as np
import pytest

from graphlb import (SimConfig, derive_seed, gen_clique, gen_erased_regular,
                     gen_erdos_renyi, gen_isolated, gen_ring, gen_rgg_torus,
                     rgg_radius, simulate, simulate_coupled, stationary_stats)
from helpers import retry_once


def test_clique_degenerate_coupling():
    # on a clique the constrained choice always reaches the global minimum,
    # so the representative system never diverges
    g = gen_clique(40)
    for seed in range(5):
        for n in (0, 3, 39):
            co = simulate_coupled(
                g, SimConfig(lam=0.9, horizon=30.0, seed=seed), n=n)
            assert co.final_delta == 0
            assert np.all(co.delta == 0)
            assert np.array_equal(co.g_trace.Q, co.i_trace.Q)
            assert co.bound_check_log <= 0.0


def test_ring_bound_holds_pathwise():
    g = gen_ring(50)
    co = simulate_coupled(
        g, SimConfig(lam=0.9, horizon=100.0, seed=3, sample_grid=0.5), n=5)
    assert co.final_delta > 0
    assert co.bound_check_log <= 0.0
    assert np.all(co.resid <= 0.0)
    # delta only accumulates
    assert np.all(np.diff(co.delta) >= 0)
    assert co.final_delta == co.delta[-1]


def test_isolated_diverges():
    g = gen_isolated(20)
    co = simulate_coupled(g, SimConfig(lam=0.9, horizon=200.0, seed=8), n=0)
    assert co.final_delta / co.g_trace.final_arrivals > 0.1


def test_bound_on_random_configurations():
    # twenty random (graph, n, lambda, seed) draws, zero violations allowed
    rng = random.Random(2024)
    for trial in range(20):
        kind = rng.choice(["erdos", "ring", "erased", "rgg", "isolated"])
        n_v = rng.randint(10, 200)
        if kind == "erdos":
            g = gen_erdos_renyi(n_v, rng.uniform(0.02, 0.5), seed=rng.getrandbits(32))
        elif kind == "ring":
            g = gen_ring(n_v)
        elif kind == "erased":
            # even degree keeps n * d even for any n
            g = gen_erased_regular(n_v, rng.choice([2, 4, 6, 8]),
                                   seed=rng.getrandbits(32))
        elif kind == "rgg":
            g = gen_rgg_torus(n_v, rgg_radius(n_v, rng.uniform(1.0, 6.0)),
                              seed=rng.getrandbits(32))
        else:
            g = gen_isolated(n_v)
        n_rank = rng.randint(0, n_v - 1)
        lam = rng.uniform(0.4, 1.2)
        co = simulate_coupled(
            g, SimConfig(lam=lam, horizon=20.0, seed=rng.getrandbits(32),
                         sample_grid=0.25), n=n_rank)
        assert co.bound_check_log <= 0.0, (trial, kind, n_v, n_rank, lam)
        assert np.all(co.resid <= 0.0), (trial, kind)


def test_tie_rule_latest_is_pessimistic():
    g = gen_ring(50)
    cfg = SimConfig(lam=0.9, horizon=100.0, seed=77, sample_grid=0.5)
    early = simulate_coupled(g, cfg, n=5, tie_rule="earliest")
    late = simulate_coupled(g, cfg, n=5, tie_rule="latest")
    # same event stream: the late placement can only fail the rank check
    # more often, and the bound survives either way
    assert late.final_delta >= early.final_delta
    assert late.bound_check_log <= 0.0
    with pytest.raises(ValueError):
        simulate_coupled(g, cfg, n=5, tie_rule="sideways")


def test_coupled_marginal_matches_plain_simulation():
    def body(seed):
        g = gen_ring(50)
        plain = stationary_stats(
            simulate(g, SimConfig(lam=0.8, horizon=400.0, seed=seed)),
            warmup=100.0)
        co = simulate_coupled(
            g, SimConfig(lam=0.8, horizon=400.0, seed=seed + 1), n=5)
        coupled = stationary_stats(co.g_trace, warmup=100.0)
        for i in (0, 1):
            se = 3 * (plain.qbar_se[i] + coupled.qbar_se[i])
            assert abs(plain.qbar[i] - coupled.qbar[i]) <= max(se, 0.01), i
    retry_once(body, 65)


def test_divergence_shrinks_with_growing_degree():
    # ERRG at degree ceil(log N) with rank window ceil(sqrt N): the per-server
    # divergence count drops clearly as N grows
    def body(base):
        avgs = []
        for n_v in (200, 800, 3200):
            d = math.ceil(math.log(n_v))
            vals = []
            for rep in range(5):
                g = gen_erdos_renyi(n_v, d / n_v,
                                    derive_seed(base, "trend-g", n_v, rep))
                co = simulate_coupled(
                    g, SimConfig(lam=0.8, horizon=10.0,
                                 seed=derive_seed(base, "trend-s", n_v, rep)),
                    n=math.ceil(math.sqrt(n_v)))
                vals.append(co.final_delta / n_v)
            avgs.append(sum(vals) / len(vals))
        assert avgs[-1] <= 0.8 * avgs[0], avgs
        assert avgs[-1] < avgs[0]
    retry_once(body, 0)


def test_coupled_requires_infinite_buffer():
    g = gen_ring(20)
    with pytest.raises(ValueError):
        simulate_coupled(g, SimConfig(lam=0.8, horizon=10.0, buffer_b=2), n=2)
    with pytest.raises(ValueError):
        simulate_coupled(g, SimConfig(lam=0.8, horizon=10.0), n=20)
