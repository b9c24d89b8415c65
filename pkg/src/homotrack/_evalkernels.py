"""Compiled stages of homotopy evaluation.

All arrays are ``(rows, B, L)`` limb-last.  Each kernel loops over the
path columns itself, so one call covers a whole batch; binary64 and
double-double use scalar code, quad-double goes through the generic limb
helpers.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ._kernels import cmul, dd_add, dd_cmul, dd_mul, qd_add, qd_mul, vadd


@njit(cache=True)
def coefficients(gr, gi, fr, fi, t, outr, outi):
    """``out[j, b] = g[j] (1 - t_b) + f[j] t_b`` with ``g`` already scaled by gamma."""
    m = gr.shape[0]
    B = t.shape[0]
    L = t.shape[1]
    if L == 1:
        for b in range(B):
            s = t[b, 0]
            u = 1.0 - s
            for j in range(m):
                outr[j, b, 0] = gr[j, 0] * u + fr[j, 0] * s
                outi[j, b, 0] = gi[j, 0] * u + fi[j, 0] * s
        return
    if L == 2:
        for b in range(B):
            s0, s1 = t[b, 0], t[b, 1]
            u0, u1 = dd_add(1.0, 0.0, -s0, -s1)
            for j in range(m):
                a0, a1 = dd_mul(gr[j, 0], gr[j, 1], u0, u1)
                c0, c1 = dd_mul(fr[j, 0], fr[j, 1], s0, s1)
                outr[j, b, 0], outr[j, b, 1] = dd_add(a0, a1, c0, c1)
                a0, a1 = dd_mul(gi[j, 0], gi[j, 1], u0, u1)
                c0, c1 = dd_mul(fi[j, 0], fi[j, 1], s0, s1)
                outi[j, b, 0], outi[j, b, 1] = dd_add(a0, a1, c0, c1)
        return
    one = np.zeros(L)
    one[0] = 1.0
    u = np.empty(L)
    p = np.empty(L)
    q = np.empty(L)
    for b in range(B):
        qd_add(one, -t[b], u)
        for j in range(m):
            qd_mul(gr[j], u, p)
            qd_mul(fr[j], t[b], q)
            qd_add(p, q, outr[j, b])
            qd_mul(gi[j], u, p)
            qd_mul(fi[j], t[b], q)
            qd_add(p, q, outi[j, b])


@njit(cache=True)
def run_tape(xr, xi, tape, br, bi):
    """Fill the row buffer: rows ``0..n-1`` copy the points, row ``n`` is one,
    and tape entry ``(d, a, c)`` sets ``row d = row a * row c``."""
    n = xr.shape[0]
    B = xr.shape[1]
    L = xr.shape[2]
    for b in range(B):
        for v in range(n):
            for k in range(L):
                br[v, b, k] = xr[v, b, k]
                bi[v, b, k] = xi[v, b, k]
        for k in range(L):
            br[n, b, k] = 0.0
            bi[n, b, k] = 0.0
        br[n, b, 0] = 1.0
    q = tape.shape[0]
    if L == 1:
        for b in range(B):
            for s in range(q):
                d, a, c = tape[s, 0], tape[s, 1], tape[s, 2]
                ar, ai, cr, ci = br[a, b, 0], bi[a, b, 0], br[c, b, 0], bi[c, b, 0]
                br[d, b, 0] = ar * cr - ai * ci
                bi[d, b, 0] = ar * ci + ai * cr
        return
    if L == 2:
        for b in range(B):
            for s in range(q):
                d, a, c = tape[s, 0], tape[s, 1], tape[s, 2]
                br[d, b, 0], br[d, b, 1], bi[d, b, 0], bi[d, b, 1] = dd_cmul(
                    br[a, b, 0], br[a, b, 1], bi[a, b, 0], bi[a, b, 1],
                    br[c, b, 0], br[c, b, 1], bi[c, b, 0], bi[c, b, 1])
        return
    for b in range(B):
        for s in range(q):
            d, a, c = tape[s, 0], tape[s, 1], tape[s, 2]
            cmul(br[a, b], bi[a, b], br[c, b], bi[c, b], br[d, b], bi[d, b])


@njit(cache=True)
def sum_terms(cr, ci, br, bi, c_term, c_row, c_mult, vg, jg, pr, pi, vr, vi, jr, ji):
    """Contribution ``c`` is ``coeff[c_term[c]] * buf[c_row[c]] * c_mult[c]``;
    output row ``i`` sums contributions ``vg[i]`` (``jg[i]``) left to right."""
    C = c_term.shape[0]
    B = cr.shape[1]
    L = cr.shape[2]
    for b in range(B):
        if L == 1:
            for c in range(C):
                j, r, w = c_term[c], c_row[c], c_mult[c]
                ar, ai, xr, xi = cr[j, b, 0], ci[j, b, 0], br[r, b, 0], bi[r, b, 0]
                pr[c, 0] = (ar * xr - ai * xi) * w
                pi[c, 0] = (ar * xi + ai * xr) * w
        elif L == 2:
            for c in range(C):
                j, r, w = c_term[c], c_row[c], c_mult[c]
                p0, p1, q0, q1 = dd_cmul(
                    cr[j, b, 0], cr[j, b, 1], ci[j, b, 0], ci[j, b, 1],
                    br[r, b, 0], br[r, b, 1], bi[r, b, 0], bi[r, b, 1])
                if w != 1.0:
                    p0, p1 = dd_mul(p0, p1, w, 0.0)
                    q0, q1 = dd_mul(q0, q1, w, 0.0)
                pr[c, 0], pr[c, 1], pi[c, 0], pi[c, 1] = p0, p1, q0, q1
        else:
            wl = np.zeros(L)
            for c in range(C):
                j, r, w = c_term[c], c_row[c], c_mult[c]
                cmul(cr[j, b], ci[j, b], br[r, b], bi[r, b], pr[c], pi[c])
                if w != 1.0:
                    wl[0] = w
                    qd_mul(pr[c], wl, pr[c])
                    qd_mul(pi[c], wl, pi[c])
        _gather(pr, pi, vg, vr, vi, b)
        _gather(pr, pi, jg, jr, ji, b)


@njit
def _gather(pr, pi, g, outr, outi, b):
    L = pr.shape[1]
    for i in range(g.shape[0]):
        if L == 1:
            s = t = 0.0
            for c in range(g.shape[1]):
                j = g[i, c]
                if j >= 0:
                    s += pr[j, 0]
                    t += pi[j, 0]
            outr[i, b, 0], outi[i, b, 0] = s, t
            continue
        if L == 2:
            s0 = s1 = t0 = t1 = 0.0
            for c in range(g.shape[1]):
                j = g[i, c]
                if j >= 0:
                    s0, s1 = dd_add(s0, s1, pr[j, 0], pr[j, 1])
                    t0, t1 = dd_add(t0, t1, pi[j, 0], pi[j, 1])
            outr[i, b, 0], outr[i, b, 1], outi[i, b, 0], outi[i, b, 1] = s0, s1, t0, t1
            continue
        sr = outr[i, b]
        si = outi[i, b]
        for k in range(L):
            sr[k] = 0.0
            si[k] = 0.0
        for c in range(g.shape[1]):
            j = g[i, c]
            if j >= 0:
                vadd(sr, pr[j], sr)
                vadd(si, pi[j], si)
