"""Compiled event loop shared by every engine variant.

One pending jump and one pending recuperation tick per particle live in an
indexed 4-ary heap keyed by ``(time, event id)`` with event id ``2*p`` for
jumps and ``2*p + 1`` for ticks, so ties resolve by particle id and a jump
precedes a tick of the same particle.  Irrelevant events sit at ``inf``.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from .randomness import direction_index, exp_gap, geometric_steps, next_tick, walk_uniforms

TYPE_A = 0
TYPE_B = 1
TYPE_IMMUNE = 2

EV_JUMP = 0
EV_INFECTION = 1
EV_TICK = 2
EV_RECOVERY = 3

STATUS_DONE = 0
STATUS_LOG_FULL = 1
STATUS_EXTINCT = 2

# integer parameter slots
P_D, P_W, P_L, P_BOUNDARY, P_COINC, P_FROG, P_REMOVAL, P_RECUP, P_NDISC, P_STOP, P_LOG, P_JON = range(12)
# integer statistics slots
S_NB, S_MAXB, S_LLEN, S_JMAX, S_CP, S_NEV = range(6)
# float statistics slots
F_T, F_EXT, F_RAD = range(3)


@njit(cache=True)
def _sift_up(i, t, e, heap, hkey, hpos):
    while i > 0:
        par = (i - 1) >> 2
        kp = hkey[par]
        ep = heap[par]
        if t < kp or (t == kp and e < ep):
            heap[i] = ep
            hkey[i] = kp
            hpos[ep] = i
            i = par
        else:
            break
    heap[i] = e
    hkey[i] = t
    hpos[e] = i


@njit(cache=True)
def _sift_down(i, t, e, heap, hkey, hpos):
    # 4-ary heap with keys stored inline for cache locality
    n = heap.shape[0]
    while True:
        c = 4 * i + 1
        if c >= n:
            break
        best = c
        bk = hkey[c]
        be = heap[c]
        end = min(c + 4, n)
        for j in range(c + 1, end):
            kj = hkey[j]
            if kj < bk or (kj == bk and heap[j] < be):
                best = j
                bk = kj
                be = heap[j]
        if bk < t or (bk == t and be < e):
            heap[i] = be
            hkey[i] = bk
            hpos[be] = i
            i = best
        else:
            break
    heap[i] = e
    hkey[i] = t
    hpos[e] = i


@njit(cache=True)
def _set_time(e, t, heap, hkey, hpos, evt):
    old = evt[e]
    evt[e] = t
    if t < old:
        _sift_up(hpos[e], t, e, heap, hkey, hpos)
    elif t > old:
        _sift_down(hpos[e], t, e, heap, hkey, hpos)


@njit(cache=True)
def _unlink(p, s, head, nxt, prv):
    a = prv[p]
    b = nxt[p]
    if a >= 0:
        nxt[a] = b
    else:
        head[s] = b
    if b >= 0:
        prv[b] = a
    nxt[p] = -1
    prv[p] = -1


@njit(cache=True)
def _link(p, s, head, nxt, prv):
    # keep each site list sorted by particle index so scans are deterministic
    q = head[s]
    last = -1
    while q >= 0 and q < p:
        last = q
        q = nxt[q]
    prv[p] = last
    nxt[p] = q
    if last >= 0:
        nxt[last] = p
    else:
        head[s] = p
    if q >= 0:
        prv[q] = p


@njit(cache=True)
def _radius(s, d, W, L, pw):
    r = 0
    for a in range(d):
        c = (s // pw[a]) % W - L
        if c < 0:
            c = -c
        if c > r:
            r = c
    return r


@njit(cache=True)
def _neighbor(s, k, d, W, L, pw, boundary):
    a = k // 2
    step = 1 if k % 2 else -1
    c = (s // pw[a]) % W - L
    c2 = c + step
    if c2 > L or c2 < -L:
        if boundary == 0:
            c2 = L if c2 < -L else -L
        else:
            c2 = c - step
    return s + (c2 - c) * pw[a]


@njit(cache=True)
def _schedule_walk(p, t, counter, ip, fp, seed, uid, jstep, evt, heap, hkey, hpos):
    ug, _ = walk_uniforms(seed, uid[p], counter)
    nd = ip[P_NDISC]
    if nd > 0:
        g = geometric_steps(ug, fp[0] / nd)
        jstep[p] += g
        _set_time(2 * p, jstep[p] / nd, heap, hkey, hpos, evt)
    else:
        _set_time(2 * p, t + exp_gap(ug, fp[0]), heap, hkey, hpos, evt)


@njit(cache=True)
def _schedule_tick(p, t, t_end, fp, seed, uid, evt, heap, hkey, hpos):
    nt = next_tick(seed, uid[p], fp[2], fp[1], t, False, t_end)
    _set_time(2 * p + 1, nt, heap, hkey, hpos, evt)


@njit(cache=True)
def _log(kind, t, actor, partner, src, dst, st, lt, lk, la, lp, lf, ld):
    n = st[S_LLEN]
    lt[n] = t
    lk[n] = kind
    la[n] = actor
    lp[n] = partner
    lf[n] = src
    ld[n] = dst
    st[S_LLEN] = n + 1


@njit(cache=True)
def run(ip, fp, seed, t_end,
        uid, site, ptype, jcount, jstep, V,
        evt, heap, hkey, hpos,
        head, nxt, prv, cnt, nb, pw,
        lt, lk, la, lp, lf, ld,
        checkpoints, jout, st, sf):
    d = ip[P_D]
    W = ip[P_W]
    L = ip[P_L]
    boundary = ip[P_BOUNDARY]
    coinc = ip[P_COINC] != 0
    frog = ip[P_FROG] != 0
    removal = ip[P_REMOVAL] != 0
    recup = ip[P_RECUP] != 0
    nd = ip[P_NDISC]
    log_on = ip[P_LOG] != 0
    j_on = ip[P_JON] != 0
    lcap = lt.shape[0]
    ncp = checkpoints.shape[0]
    N = uid.shape[0]
    t_now = sf[F_T]

    # ticks beyond the previous horizon were parked at inf; re-arm them
    if recup:
        for p in range(N):
            if ptype[p] == TYPE_B and evt[2 * p + 1] == np.inf:
                if (not coinc) or cnt[site[p]] == 1:
                    _schedule_tick(p, t_now, t_end, fp, seed, uid, evt, heap, hkey, hpos)

    while True:
        if N == 0:
            break
        e = heap[0]
        t = hkey[0]
        if t > t_end:
            break
        if j_on:
            while st[S_CP] < ncp and checkpoints[st[S_CP]] < t:
                jout[st[S_CP]] = st[S_JMAX]
                st[S_CP] += 1
        p = e >> 1
        if e & 1 == 0:
            # ---------------- jump
            x = site[p]
            ug, ud = walk_uniforms(seed, uid[p], jcount[p])
            k = direction_index(ud, d)
            y = _neighbor(x, k, d, W, L, pw, boundary)
            if log_on and lcap - st[S_LLEN] < 2 + cnt[y]:
                sf[F_T] = t_now
                return STATUS_LOG_FULL
            t_now = t
            st[S_NEV] += 1
            _unlink(p, x, head, nxt, prv)
            cnt[x] -= 1
            if ptype[p] == TYPE_B:
                nb[x] -= 1
            if coinc and recup and cnt[x] == 1:
                q = head[x]
                if ptype[q] == TYPE_B:
                    _schedule_tick(q, t, t_end, fp, seed, uid, evt, heap, hkey, hpos)
            if coinc and cnt[y] == 1:
                q = head[y]
                if ptype[q] == TYPE_B:
                    _set_time(2 * q + 1, np.inf, heap, hkey, hpos, evt)
            _link(p, y, head, nxt, prv)
            site[p] = y
            cnt[y] += 1
            if ptype[p] == TYPE_B:
                nb[y] += 1
            if log_on:
                _log(EV_JUMP, t, p, -1, x, y, st, lt, lk, la, lp, lf, ld)
            if j_on:
                if V[p] >= 0:
                    V[p] += 1
                m = -1
                q = head[y]
                while q >= 0:
                    if V[q] > m:
                        m = V[q]
                    q = nxt[q]
                if m >= 0:
                    q = head[y]
                    while q >= 0:
                        V[q] = m
                        q = nxt[q]
                    if m > st[S_JMAX]:
                        st[S_JMAX] = m
            infected_here = False
            if ptype[p] == TYPE_B:
                q = head[y]
                while q >= 0:
                    if q != p and ptype[q] == TYPE_A:
                        ptype[q] = TYPE_B
                        nb[y] += 1
                        st[S_NB] += 1
                        infected_here = True
                        if log_on:
                            _log(EV_INFECTION, t, q, p, y, y, st, lt, lk, la, lp, lf, ld)
                        if recup and not coinc:
                            _schedule_tick(q, t, t_end, fp, seed, uid, evt, heap, hkey, hpos)
                        if frog:
                            if nd > 0:
                                jstep[q] = np.int64(np.round(t * nd))
                            _schedule_walk(q, t, jcount[q], ip, fp, seed, uid, jstep, evt, heap, hkey, hpos)
                    q = nxt[q]
                if coinc and recup:
                    if cnt[y] == 1:
                        _schedule_tick(p, t, t_end, fp, seed, uid, evt, heap, hkey, hpos)
                    else:
                        _set_time(2 * p + 1, np.inf, heap, hkey, hpos, evt)
            elif ptype[p] == TYPE_A and nb[y] > 0:
                partner = -1
                q = head[y]
                while q >= 0:
                    if ptype[q] == TYPE_B:
                        partner = q
                        break
                    q = nxt[q]
                ptype[p] = TYPE_B
                nb[y] += 1
                st[S_NB] += 1
                infected_here = True
                if log_on:
                    _log(EV_INFECTION, t, p, partner, y, y, st, lt, lk, la, lp, lf, ld)
                if recup and not coinc:
                    _schedule_tick(p, t, t_end, fp, seed, uid, evt, heap, hkey, hpos)
            if infected_here:
                if st[S_NB] > st[S_MAXB]:
                    st[S_MAXB] = st[S_NB]
            if ptype[p] == TYPE_B:
                r = _radius(y, d, W, L, pw)
                if r > sf[F_RAD]:
                    sf[F_RAD] = r
            # next jump of p
            jcount[p] += 1
            if ptype[p] == TYPE_IMMUNE or (frog and ptype[p] == TYPE_A):
                _set_time(2 * p, np.inf, heap, hkey, hpos, evt)
            else:
                _schedule_walk(p, t, jcount[p], ip, fp, seed, uid, jstep, evt, heap, hkey, hpos)
        else:
            # ---------------- recuperation tick (scheduled only when effective)
            if log_on and lcap - st[S_LLEN] < 1:
                sf[F_T] = t_now
                return STATUS_LOG_FULL
            t_now = t
            st[S_NEV] += 1
            x = site[p]
            nb[x] -= 1
            st[S_NB] -= 1
            if removal:
                ptype[p] = TYPE_IMMUNE
                _set_time(2 * p, np.inf, heap, hkey, hpos, evt)
            else:
                ptype[p] = TYPE_A
                if frog:
                    _set_time(2 * p, np.inf, heap, hkey, hpos, evt)
            _set_time(2 * p + 1, np.inf, heap, hkey, hpos, evt)
            if log_on:
                _log(EV_RECOVERY, t, p, -1, x, x, st, lt, lk, la, lp, lf, ld)
            if st[S_NB] == 0:
                if sf[F_EXT] < 0:
                    sf[F_EXT] = t
                if ip[P_STOP] != 0:
                    sf[F_T] = t
                    if j_on:
                        while st[S_CP] < ncp and checkpoints[st[S_CP]] <= t:
                            jout[st[S_CP]] = st[S_JMAX]
                            st[S_CP] += 1
                    return STATUS_EXTINCT
    if j_on:
        while st[S_CP] < ncp and checkpoints[st[S_CP]] <= t_end:
            jout[st[S_CP]] = st[S_JMAX]
            st[S_CP] += 1
    sf[F_T] = t_end
    return STATUS_DONE
