import math

import numpy as np
import pytest

from graphlb import (bipartite_fluid_integrate, bipartite_fluid_rhs,
                     bipartite_stop_time, default_levels, diffusion_scale,
                     fluid_integrate, fluid_rhs, suboptimality_threshold)


def test_rhs_from_empty():
    q = np.zeros(8)
    dq = fluid_rhs(q, 0.8)
    assert dq[0] == pytest.approx(0.8)
    assert np.allclose(dq[1:], 0.0)


def test_rhs_fixed_point():
    for lam in (0.5, 0.8, 0.95):
        q = np.zeros(10)
        q[0] = lam
        assert np.allclose(fluid_rhs(q, lam), 0.0, atol=1e-15)


def test_rhs_saturated_first_level():
    # q1 pinned at 1: inflow spills into level 2, dq1 = 1 - q1 = 0 and
    # dq2 = lam - 1 + q3
    q = np.zeros(6)
    q[0], q[1] = 1.0, 0.3
    dq = fluid_rhs(q, 0.9)
    assert dq[0] == pytest.approx(0.0, abs=1e-15)
    assert dq[1] == pytest.approx(-0.1)
    assert np.allclose(dq[2:], 0.0)


def test_closed_form_first_level():
    lam = 0.8
    path = fluid_integrate(lam, 10.0, dt=1e-3, sample_grid=0.1)
    expect = lam * (1.0 - np.exp(-path.times))
    assert np.max(np.abs(path.q[:, 0] - expect)) < 1e-6
    # nothing ever reaches level 2 while q1 < 1
    assert np.max(path.q[:, 1]) < 1e-12


def test_endpoint_reaches_fixed_point():
    for lam in (0.5, 0.8, 0.95):
        path = fluid_integrate(lam, 50.0, dt=1e-3)
        end = path.endpoint()
        assert abs(end[0] - lam) < 1e-4
        assert np.max(np.abs(end[1:])) < 1e-4


def test_integrator_order():
    # smooth regime: two step sizes against a fine reference; fourth-order
    # stepping gains at least ~8x accuracy per halving
    ref = fluid_integrate(0.95, 2.0, dt=1.25e-4).endpoint()
    err = []
    for dt in (0.01, 0.005):
        err.append(np.max(np.abs(fluid_integrate(0.95, 2.0, dt=dt).endpoint() - ref)))
    assert err[1] < err[0] / 8 or err[1] < 1e-13


def test_path_monotone_levels():
    path = fluid_integrate(0.9, 20.0, dt=1e-3, sample_grid=0.5)
    assert np.all(np.diff(path.q, axis=1) <= 1e-12)
    assert np.all(path.q >= 0) and np.all(path.q <= 1)


def test_path_interpolation_and_csv():
    path = fluid_integrate(0.8, 5.0, dt=1e-3, sample_grid=0.5)
    mid = path.at(2.25)
    lo, hi = path.at(2.0)[0], path.at(2.5)[0]
    assert lo < mid[0] < hi
    header = path.csv_text().splitlines()[0]
    assert header.startswith("t,q1,q2")


def test_integrate_argument_errors():
    with pytest.raises(ValueError):
        fluid_integrate(0.0, 1.0)
    with pytest.raises(ValueError):
        fluid_integrate(0.8, -1.0)
    with pytest.raises(ValueError):
        fluid_integrate(0.8, 1.0, dt=0.3)  # horizon not a multiple of dt


def test_default_levels_values():
    # ceil(1/(1-lam)) can land one notch above the exact reciprocal when
    # 1-lam is not a binary fraction; the extra slack is harmless
    assert default_levels(0.5) == 14
    assert default_levels(0.8) == 22
    assert default_levels(0.9) == 32


def test_bipartite_rhs():
    assert bipartite_fluid_rhs(0.0, 0.0, 0.9, 0.3) == pytest.approx((0.63, 0.27))
    # saturated small part stops absorbing
    da, db = bipartite_fluid_rhs(0.3, 0.2, 0.9, 0.3)
    assert da == pytest.approx(0.33)
    assert db == pytest.approx(0.07)


def test_bipartite_stop_time():
    assert bipartite_stop_time(0.9, 0.3) == pytest.approx(
        0.6466271649250525, abs=1e-15)
    assert bipartite_stop_time(0.9, 0.3) == pytest.approx(
        -math.log(1.0 - 0.3 / (0.9 * 0.7)))
    # capacity below c: the small part never saturates
    assert bipartite_stop_time(0.5, 0.4) == math.inf


def test_bipartite_path_matches_closed_form():
    lam, c = 0.9, 0.3
    p = bipartite_fluid_integrate(lam, c, horizon=5.0, dt=1e-3)
    assert p.times[-1] == pytest.approx(p.stop_time, abs=1e-12)
    assert p.q1a[-1] == pytest.approx(c, abs=1e-9)
    ea = lam * (1 - c) * (1.0 - np.exp(-p.times))
    eb = lam * c * (1.0 - np.exp(-p.times))
    assert np.max(np.abs(p.q1a - ea)) < 1e-9
    assert np.max(np.abs(p.q1b - eb)) < 1e-9

    free = bipartite_fluid_integrate(0.5, 0.4, horizon=2.0, dt=1e-3)
    assert free.stop_time == math.inf
    assert free.times[-1] == pytest.approx(2.0)
    assert free.q1a[-1] == pytest.approx(0.3 * (1.0 - math.exp(-2.0)), abs=1e-9)


def test_suboptimality_threshold():
    lam_c = suboptimality_threshold(0.3)
    assert lam_c == pytest.approx(0.7178908345800273, abs=1e-15)
    # defining balance: lam^2 = c (1 + lam)
    assert lam_c ** 2 == pytest.approx(0.3 * (1.0 + lam_c), abs=1e-12)
    lam_49 = suboptimality_threshold(0.49)
    assert lam_49 == pytest.approx(0.9866367035145982, abs=1e-12)
    assert lam_49 < 1.0
    for bad in (0.0, 0.5, 0.6, -0.1):
        with pytest.raises(ValueError):
            suboptimality_threshold(bad)


def test_threshold_monotone_in_c():
    vals = [suboptimality_threshold(c) for c in (0.05, 0.1, 0.2, 0.3, 0.4, 0.49)]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_diffusion_scale():
    times = np.array([0.0, 1.0])
    Q = np.array([[10000, 300, 0], [9900, 0, 0]])
    d = diffusion_scale(times, Q, n=10000, lambda_total=9900.0)
    assert d.beta == pytest.approx(1.0)
    # first component is the centered idle count, negative when below full
    assert d.qbar[0, 0] == pytest.approx(0.0)
    assert d.qbar[1, 0] == pytest.approx(-1.0)
    assert d.qbar[0, 1] == pytest.approx(3.0)
    header = d.csv_text().splitlines()[0]
    assert header == "t,qbar1,qbar2,qbar3"
