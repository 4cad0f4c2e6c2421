"""Event-loop kernels for the queue simulators.

Every function here is written as a plain Python function over numpy arrays
and compiled with numba's ``@njit`` at import time when numba is available.
Setting the environment variable ``GRAPHLB_NO_NUMBA=1`` before import selects
the uncompiled fallback path instead; both paths execute the identical source
and consume the identical random stream, so results agree draw for draw.

The random core is xoshiro256** (public-domain reference algorithm by
Blackman and Vigna), seeded via splitmix64.  It is implemented here rather
than taken from numpy because the event loop needs a generator whose state is
a plain uint64 array usable inside compiled code and in the fallback alike.
"""

from __future__ import annotations

import os

import numpy as np

NUMBA_ENV_FLAG = "GRAPHLB_NO_NUMBA"

USE_NUMBA = os.environ.get(NUMBA_ENV_FLAG, "0").lower() not in ("1", "true", "yes")
if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is an install requirement
        USE_NUMBA = False

if USE_NUMBA:
    def accel(fn):
        return njit(cache=True)(fn)
else:
    def accel(fn):
        return fn


U64 = np.uint64
# splitmix64 constants
_SM_GAMMA = U64(0x9E3779B97F4A7C15)
_SM_MIX1 = U64(0xBF58476D1CE4E5B9)
_SM_MIX2 = U64(0x94D049BB133111EB)
_DNORM = 1.0 / 9007199254740992.0  # 2**-53

DISCARD = -1


@accel
def _splitmix64(state):
    # state: uint64[1], advanced in place
    state[0] = state[0] + _SM_GAMMA
    z = state[0]
    z = (z ^ (z >> U64(30))) * _SM_MIX1
    z = (z ^ (z >> U64(27))) * _SM_MIX2
    return z ^ (z >> U64(31))


@accel
def _rotl64(x, k):
    return (x << U64(k)) | (x >> (U64(64) - U64(k)))


@accel
def _next_u64(s):
    # xoshiro256**; s: uint64[4], advanced in place
    result = _rotl64(s[1] * U64(5), 7) * U64(9)
    t = s[1] << U64(17)
    s[2] = s[2] ^ s[0]
    s[3] = s[3] ^ s[1]
    s[1] = s[1] ^ s[2]
    s[0] = s[0] ^ s[3]
    s[2] = s[2] ^ t
    s[3] = _rotl64(s[3], 45)
    return result


@accel
def _rand_u53(s):
    # uniform double in [0, 1), 53 random bits
    return np.float64(_next_u64(s) >> U64(11)) * _DNORM


@accel
def _randbelow(s, n):
    # uniform integer in [0, n); masked rejection keeps it exactly uniform
    if n <= 1:
        return 0
    m = U64(n - 1)
    m |= m >> U64(1)
    m |= m >> U64(2)
    m |= m >> U64(4)
    m |= m >> U64(8)
    m |= m >> U64(16)
    m |= m >> U64(32)
    while True:
        r = _next_u64(s) & m
        if r < U64(n):
            return np.int64(r)


@accel
def _seed_state(seed_u64, out_state):
    # xoshiro256** state from one 64-bit seed, via four splitmix64 outputs
    sm = np.empty(1, np.uint64)
    sm[0] = seed_u64
    for i in range(4):
        out_state[i] = _splitmix64(sm)


# ---------------------------------------------------------------------------
# Fenwick tree over server ids, one tree per queue-length level.  Supports the
# ordered-server queries (k-th smallest id within a level) in O(log N).

@accel
def _fen_add(tree, pos, delta):
    # pos is 1-based; tree[0] unused
    n = tree.shape[0] - 1
    i = pos
    while i <= n:
        tree[i] += delta
        i += i & (-i)


@accel
def _fen_kth(tree, k, log2n):
    # smallest 1-based pos with prefix sum >= k; caller guarantees existence
    pos = 0
    rem = k
    step = np.int64(1) << log2n
    n = tree.shape[0] - 1
    while step > 0:
        nxt = pos + step
        if nxt <= n and tree[nxt] < rem:
            pos = nxt
            rem -= tree[nxt]
        step >>= 1
    return pos + 1


@accel
def _kth_ordered(level_count, fenwick, log2n, k, lmax):
    # server holding rank k in the (queue length, id) lexicographic order
    cum = 0
    for lvl in range(lmax + 1):
        c = level_count[lvl]
        if cum + c >= k:
            return _fen_kth(fenwick[lvl], k - cum, log2n) - 1, lvl
        cum += c
    return -1, -1


@accel
def _jsq_pick(x, indptr, indices, v, s):
    """Shortest queue in the closed neighborhood of v, uniform tie-break.

    Two passes: find the minimum and the tie count, then draw one uniform
    index so exactly one random number is consumed per call.
    """
    best = x[v]
    cnt = 1
    lo = indptr[v]
    hi = indptr[v + 1]
    for idx in range(lo, hi):
        xu = x[indices[idx]]
        if xu < best:
            best = xu
            cnt = 1
        elif xu == best:
            cnt += 1
    r = _randbelow(s, cnt)
    if x[v] == best:
        if r == 0:
            return v
        r -= 1
    for idx in range(lo, hi):
        u = indices[idx]
        if x[u] == best:
            if r == 0:
                return u
            r -= 1
    return -1  # unreachable for a valid state


@accel
def _recount_ok(x, q_counts, level_count, lmax):
    # full recount of the occupancy bookkeeping from the raw queue lengths
    n = x.shape[0]
    for i in range(1, lmax + 2):
        cnt = 0
        for k in range(n):
            if x[k] >= i:
                cnt += 1
        if q_counts[i] != cnt:
            return False
    for lvl in range(lmax + 1):
        cnt = 0
        for k in range(n):
            if x[k] == lvl:
                cnt += 1
        if level_count[lvl] != cnt:
            return False
    return True


# out-array slots shared by both simulation kernels
OUT_ARRIVALS = 0
OUT_DEPARTURES = 1
OUT_DISCARDS = 2
OUT_NWAITS = 3
OUT_ERROR = 4
OUT_EVENTS = 5
OUT_TOTAL = 6
OUT_WAIT_OVERFLOW = 7
OUT_DEPARTURES_I = 8
OUT_DELTA = 9
OUT_SIZE = 10

ERR_LEVEL_OVERFLOW = 1
ERR_RECOUNT = 2

POLICY_GRAPH_JSQ = 0
POLICY_ISOLATED = 1
POLICY_CJSQ = 2


@accel
def _simulate_loop(
    indptr, indices, n,
    policy, cjsq_n,
    lam_total, b_cap, horizon,
    x, sstate,
    samples,
    q_counts, level_count,
    trace_q, trace_intq, trace_total, trace_inttotal, trace_counts,
    subset_mask, track_subset, qs_counts, trace_qs,
    busy_list, busy_pos,
    fenwick, log2n,
    ring_arr, ring_head,
    wait_t, wait_v, record_waits,
    debug_every,
    out,
):
    """Embedded-jump-chain event loop for one system.

    At a state with B busy servers the next event is Exp(lam_total + B); it is
    an arrival with probability lam_total / (lam_total + B), with the arrival
    vertex uniform on V, else a departure at a uniformly chosen busy server.
    b_cap < 0 means an infinite buffer.  Trace rows are the pre-event state at
    each sample time; int columns carry exact time integrals of Q_i.
    """
    lmax = q_counts.shape[0] - 2
    K = trace_q.shape[1]
    S = samples.shape[0]
    ring_sz = ring_arr.shape[1]

    total = np.int64(0)
    for k in range(n):
        total += x[k]
    int_total = 0.0
    int_q = np.zeros(K + 1, np.float64)

    arrivals = np.int64(0)
    departures = np.int64(0)
    discards = np.int64(0)
    nwaits = np.int64(0)
    events = np.int64(0)
    err = np.int64(0)
    overflow = np.int64(0)
    sidx = 0
    t = 0.0
    last_t = 0.0

    while True:
        B = q_counts[1]
        rate = lam_total + B
        u = _rand_u53(sstate)
        te = t + (-np.log1p(-u) / rate)

        while sidx < S and samples[sidx] < te:
            ts = samples[sidx]
            d = ts - last_t
            for i in range(1, K + 1):
                int_q[i] += q_counts[i] * d
            int_total += total * d
            last_t = ts
            for i in range(K):
                trace_q[sidx, i] = q_counts[i + 1]
                trace_intq[sidx, i] = int_q[i + 1]
            trace_total[sidx] = total
            trace_inttotal[sidx] = int_total
            trace_counts[sidx, 0] = arrivals
            trace_counts[sidx, 1] = departures
            trace_counts[sidx, 2] = discards
            if track_subset == 1:
                for i in range(K):
                    trace_qs[sidx, i] = qs_counts[i + 1]
            sidx += 1

        if te > horizon or sidx >= S:
            break

        d = te - last_t
        for i in range(1, K + 1):
            int_q[i] += q_counts[i] * d
        int_total += total * d
        last_t = te
        t = te
        events += 1

        if debug_every > 0 and events % debug_every == 0:
            if not _recount_ok(x, q_counts, level_count, lmax):
                err = ERR_RECOUNT
                break

        if _rand_u53(sstate) * rate < lam_total:
            # arrival
            arrivals += 1
            v = _randbelow(sstate, n)
            if policy == POLICY_GRAPH_JSQ:
                tgt = _jsq_pick(x, indptr, indices, v, sstate)
            elif policy == POLICY_ISOLATED:
                tgt = v
            else:
                r = _randbelow(sstate, cjsq_n + 1)
                tgt, _lvl = _kth_ordered(level_count, fenwick, log2n, r + 1, lmax)
            lvl = x[tgt]
            if b_cap >= 0 and lvl >= b_cap:
                discards += 1
            else:
                if lvl + 1 > lmax:
                    err = ERR_LEVEL_OVERFLOW
                    break
                x[tgt] = lvl + 1
                q_counts[lvl + 1] += 1
                level_count[lvl] -= 1
                level_count[lvl + 1] += 1
                total += 1
                if track_subset == 1 and subset_mask[tgt] == 1:
                    qs_counts[lvl + 1] += 1
                if lvl == 0:
                    busy_list[q_counts[1] - 1] = tgt
                    busy_pos[tgt] = q_counts[1] - 1
                if policy == POLICY_CJSQ:
                    _fen_add(fenwick[lvl], tgt + 1, -1)
                    _fen_add(fenwick[lvl + 1], tgt + 1, 1)
                if record_waits == 1:
                    if lvl == 0:
                        if nwaits < wait_t.shape[0]:
                            wait_t[nwaits] = t
                            wait_v[nwaits] = 0.0
                            nwaits += 1
                        else:
                            overflow = 1
                    ring_arr[tgt, (ring_head[tgt] + lvl) % ring_sz] = t
        else:
            # departure at a uniformly chosen busy server
            departures += 1
            j = _randbelow(sstate, q_counts[1])
            k = busy_list[j]
            lvl = x[k]
            x[k] = lvl - 1
            q_counts[lvl] -= 1
            level_count[lvl] -= 1
            level_count[lvl - 1] += 1
            total -= 1
            if track_subset == 1 and subset_mask[k] == 1:
                qs_counts[lvl] -= 1
            if lvl == 1:
                b2 = q_counts[1]
                last = busy_list[b2]
                pos = busy_pos[k]
                busy_list[pos] = last
                busy_pos[last] = pos
                busy_pos[k] = -1
            if policy == POLICY_CJSQ:
                _fen_add(fenwick[lvl], k + 1, -1)
                _fen_add(fenwick[lvl - 1], k + 1, 1)
            if record_waits == 1:
                h = ring_head[k]
                ring_head[k] = (h + 1) % ring_sz
                if lvl - 1 > 0:
                    # next task in FCFS order starts service now
                    if nwaits < wait_t.shape[0]:
                        wait_t[nwaits] = t
                        wait_v[nwaits] = t - ring_arr[k, (h + 1) % ring_sz]
                        nwaits += 1
                    else:
                        overflow = 1

    out[OUT_ARRIVALS] = arrivals
    out[OUT_DEPARTURES] = departures
    out[OUT_DISCARDS] = discards
    out[OUT_NWAITS] = nwaits
    out[OUT_ERROR] = err
    out[OUT_EVENTS] = events
    out[OUT_TOTAL] = total
    out[OUT_WAIT_OVERFLOW] = overflow


@accel
def _apply_arrival(x, q_counts, level_count, fenwick, tgt, lmax):
    # infinite-buffer arrival bookkeeping for one coupled subsystem
    lvl = x[tgt]
    if lvl + 1 > lmax:
        return False
    x[tgt] = lvl + 1
    q_counts[lvl + 1] += 1
    level_count[lvl] -= 1
    level_count[lvl + 1] += 1
    _fen_add(fenwick[lvl], tgt + 1, -1)
    _fen_add(fenwick[lvl + 1], tgt + 1, 1)
    return True


@accel
def _apply_rank_departure(x, q_counts, level_count, fenwick, log2n, k, lmax):
    # departure at the rank-k ordered server; no-op when that server is idle
    sid, lvl = _kth_ordered(level_count, fenwick, log2n, k, lmax)
    if lvl <= 0:
        return False
    x[sid] = lvl - 1
    q_counts[lvl] -= 1
    level_count[lvl] -= 1
    level_count[lvl - 1] += 1
    _fen_add(fenwick[lvl], sid + 1, -1)
    _fen_add(fenwick[lvl - 1], sid + 1, 1)
    return True


@accel
def _coupled_loop(
    indptr, indices, n,
    cjsq_n, tie_latest,
    lam_total, horizon,
    xg, xi, sstate,
    samples,
    qg, qi, lcg, lci,
    feng, feni, log2n,
    tq_g, tintq_g, ttot_g, tinttot_g,
    tq_i, tintq_i, ttot_i, tinttot_i,
    trace_counts, trace_delta, trace_resid,
    debug_every,
    out_f,
    out,
):
    """One event stream driving the graph system and its ranked companion.

    Arrivals (rate lam_total) synchronize per vertex: the graph system assigns
    by JSQ over the closed neighborhood; the companion receives the task at
    the rank the graph assignment occupies (servers with strictly shorter
    queues first), or, when that rank exceeds cjsq_n + 1, at a uniformly
    random rank among its cjsq_n + 1 shortest queues while the miss counter
    delta is incremented.  Departures (rate n) pick a rank k uniformly; each
    system serves its own rank-k server when busy.  Infinite buffers only.
    """
    lmax = qg.shape[0] - 2
    K = tq_g.shape[1]
    S = samples.shape[0]

    total_g = np.int64(0)
    total_i = np.int64(0)
    for k in range(n):
        total_g += xg[k]
        total_i += xi[k]
    int_total_g = 0.0
    int_total_i = 0.0
    int_qg = np.zeros(K + 1, np.float64)
    int_qi = np.zeros(K + 1, np.float64)

    arrivals = np.int64(0)
    departures_g = np.int64(0)
    departures_i = np.int64(0)
    delta = np.int64(0)
    events = np.int64(0)
    err = np.int64(0)
    dsum0 = np.int64(0)
    for i in range(1, lmax + 2):
        dsum0 += abs(qg[i] - qi[i])
    max_resid = np.float64(dsum0)
    sidx = 0
    t = 0.0
    last_t = 0.0
    rate = lam_total + n

    while True:
        u = _rand_u53(sstate)
        te = t + (-np.log1p(-u) / rate)

        while sidx < S and samples[sidx] < te:
            ts = samples[sidx]
            d = ts - last_t
            for i in range(1, K + 1):
                int_qg[i] += qg[i] * d
                int_qi[i] += qi[i] * d
            int_total_g += total_g * d
            int_total_i += total_i * d
            last_t = ts
            for i in range(K):
                tq_g[sidx, i] = qg[i + 1]
                tintq_g[sidx, i] = int_qg[i + 1]
                tq_i[sidx, i] = qi[i + 1]
                tintq_i[sidx, i] = int_qi[i + 1]
            ttot_g[sidx] = total_g
            tinttot_g[sidx] = int_total_g
            ttot_i[sidx] = total_i
            tinttot_i[sidx] = int_total_i
            trace_counts[sidx, 0] = arrivals
            trace_counts[sidx, 1] = departures_g
            trace_counts[sidx, 2] = departures_i
            dsum = np.int64(0)
            for i in range(1, lmax + 2):
                dsum += abs(qg[i] - qi[i])
            trace_delta[sidx] = delta
            trace_resid[sidx] = np.float64(dsum) - 2.0 * np.float64(delta)
            sidx += 1

        if te > horizon or sidx >= S:
            break

        d = te - last_t
        for i in range(1, K + 1):
            int_qg[i] += qg[i] * d
            int_qi[i] += qi[i] * d
        int_total_g += total_g * d
        int_total_i += total_i * d
        last_t = te
        t = te
        events += 1

        if debug_every > 0 and events % debug_every == 0:
            if not _recount_ok(xg, qg, lcg, lmax):
                err = ERR_RECOUNT
                break
            if not _recount_ok(xi, qi, lci, lmax):
                err = ERR_RECOUNT
                break

        if _rand_u53(sstate) * rate < lam_total:
            arrivals += 1
            v = _randbelow(sstate, n)
            tgt_g = _jsq_pick(xg, indptr, indices, v, sstate)
            lvl_g = xg[tgt_g]
            # rank of the graph assignment, shorter queues first; the default
            # tie rule places it before its equals, the alternative after them
            kpos = np.int64(1)
            for lvl in range(lvl_g):
                kpos += lcg[lvl]
            if tie_latest == 1:
                kpos += lcg[lvl_g] - 1
            if kpos <= cjsq_n + 1:
                tgt_i, _l = _kth_ordered(lci, feni, log2n, kpos, lmax)
            else:
                delta += 1
                r = _randbelow(sstate, cjsq_n + 1)
                tgt_i, _l = _kth_ordered(lci, feni, log2n, r + 1, lmax)
            if not _apply_arrival(xg, qg, lcg, feng, tgt_g, lmax):
                err = ERR_LEVEL_OVERFLOW
                break
            total_g += 1
            if not _apply_arrival(xi, qi, lci, feni, tgt_i, lmax):
                err = ERR_LEVEL_OVERFLOW
                break
            total_i += 1
        else:
            k = _randbelow(sstate, n) + 1
            if _apply_rank_departure(xg, qg, lcg, feng, log2n, k, lmax):
                departures_g += 1
                total_g -= 1
            if _apply_rank_departure(xi, qi, lci, feni, log2n, k, lmax):
                departures_i += 1
                total_i -= 1

        dsum = np.int64(0)
        for i in range(1, lmax + 2):
            dsum += abs(qg[i] - qi[i])
        resid = np.float64(dsum) - 2.0 * np.float64(delta)
        if resid > max_resid:
            max_resid = resid

    out_f[0] = max_resid
    out[OUT_ARRIVALS] = arrivals
    out[OUT_DEPARTURES] = departures_g
    out[OUT_DISCARDS] = 0
    out[OUT_ERROR] = err
    out[OUT_EVENTS] = events
    out[OUT_TOTAL] = total_g
    out[OUT_DEPARTURES_I] = departures_i
    out[OUT_DELTA] = delta
