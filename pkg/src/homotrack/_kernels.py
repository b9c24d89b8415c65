"""Compiled limb kernels (numba gufuncs) behind ExtReal/ExtComplex.

Every gufunc takes limb vectors as its innermost core dimension ``l`` (1, 2
or 4 doubles) and branches on ``l``: plain binary64, double-double through
scalar error-free transformations, or quad-double through small scratch
arrays.  numpy supplies the broadcasting over all outer axes.
"""

from __future__ import annotations

import math

import numpy as np
from numba import guvectorize, njit

_SPLITTER = 134217729.0

_F1 = "void(float64[:], float64[:])"
_F2 = "void(float64[:], float64[:], float64[:])"
_F3 = "void(float64[:], float64[:], float64[:], float64[:])"
_F4 = "void(float64[:], float64[:], float64[:], float64[:], float64[:])"
_F6 = "void(float64[:], float64[:], float64[:], float64[:], float64[:], float64[:])"


# ---------------------------------------------------------------------------
# scalar error-free transformations
# ---------------------------------------------------------------------------

@njit(inline="always")
def two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


@njit(inline="always")
def fast_two_sum(a, b):
    s = a + b
    return s, b - (s - a)


@njit(inline="always")
def two_prod(a, b):
    p = a * b
    t = _SPLITTER * a
    ah = t - (t - a)
    al = a - ah
    t = _SPLITTER * b
    bh = t - (t - b)
    bl = b - bh
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


@njit(inline="always")
def three_sum(a, b, c):
    t1, t2 = two_sum(a, b)
    a, t3 = two_sum(c, t1)
    b, c = two_sum(t2, t3)
    return a, b, c


# ---------------------------------------------------------------------------
# double-double on scalars
# ---------------------------------------------------------------------------

@njit(inline="always")
def dd_add(a0, a1, b0, b1):
    sh, sl = two_sum(a0, b0)
    th, tl = two_sum(a1, b1)
    sl += th
    sh, sl = fast_two_sum(sh, sl)
    sl += tl
    return fast_two_sum(sh, sl)


@njit(inline="always")
def dd_mul(a0, a1, b0, b1):
    p, e = two_prod(a0, b0)
    e += a0 * b1 + a1 * b0
    return fast_two_sum(p, e)


@njit(inline="always")
def dd_mul_d(a0, a1, d):
    p, e = two_prod(a0, d)
    e += a1 * d
    return fast_two_sum(p, e)


@njit(inline="always")
def dd_div(a0, a1, b0, b1):
    q1 = a0 / b0
    m0, m1 = dd_mul_d(b0, b1, q1)
    r0, r1 = dd_add(a0, a1, -m0, -m1)
    q2 = r0 / b0
    m0, m1 = dd_mul_d(b0, b1, q2)
    r0, r1 = dd_add(r0, r1, -m0, -m1)
    q3 = r0 / b0
    q1, q2 = fast_two_sum(q1, q2)
    return dd_add(q1, q2, q3, 0.0)


@njit(inline="always")
def dd_sqrt(a0, a1):
    if a0 <= 0.0:
        if a0 == 0.0:
            return 0.0, 0.0
        return math.nan, math.nan
    x = 1.0 / math.sqrt(a0)
    ax = a0 * x
    s0, s1 = dd_mul(ax, 0.0, ax, 0.0)
    d0, d1 = dd_add(a0, a1, -s0, -s1)
    return two_sum(ax, d0 * (x * 0.5))


# ---------------------------------------------------------------------------
# quad-double on length-4 arrays
# ---------------------------------------------------------------------------

@njit
def renorm(t, m, out):
    """Renormalize ``t[:m]`` (roughly decreasing, overwritten) into ``len(out)`` limbs."""
    nl = out.shape[0]
    s = t[m - 1]
    for i in range(m - 2, -1, -1):
        s, t[i + 1] = two_sum(t[i], s)
    t[0] = s
    for k in range(nl):
        out[k] = 0.0
    j = 0
    acc = t[0]
    spill = 0.0
    for i in range(1, m):
        if j >= nl - 1:
            spill += t[i]
            continue
        r, err = fast_two_sum(acc, t[i])
        if err != 0.0:
            out[j] = r
            j += 1
            acc = err
        else:
            acc = r
    out[j] = acc + spill


@njit
def qd_add(a, b, out):
    # exact sum as a grow-expansion (increasing magnitude), then renormalized
    e = np.empty(8)
    for i in range(4):
        e[i] = a[3 - i]
    n = 4
    for k in range(3, -1, -1):
        q = b[k]
        for i in range(n):
            q, e[i] = two_sum(q, e[i])
        e[n] = q
        n += 1
    t = e[::-1].copy()
    renorm(t, 8, out)


@njit
def qd_mul(a, b, out):
    p0, q0 = two_prod(a[0], b[0])
    p1, q1 = two_prod(a[0], b[1])
    p2, q2 = two_prod(a[1], b[0])
    p3, q3 = two_prod(a[0], b[2])
    p4, q4 = two_prod(a[1], b[1])
    p5, q5 = two_prod(a[2], b[0])
    p1, p2, q0 = three_sum(p1, p2, q0)
    p2, q1, q2 = three_sum(p2, q1, q2)
    p3, p4, p5 = three_sum(p3, p4, p5)
    s0, t0 = two_sum(p2, p3)
    s1, t1 = two_sum(q1, p4)
    s2 = q2 + p5
    s1, t0 = two_sum(s1, t0)
    s2 += t0 + t1
    p6, q6 = two_prod(a[0], b[3])
    p7, q7 = two_prod(a[1], b[2])
    p8, q8 = two_prod(a[2], b[1])
    p9, q9 = two_prod(a[3], b[0])
    q0, q3 = two_sum(q0, q3)
    q4, q5 = two_sum(q4, q5)
    p6, p7 = two_sum(p6, p7)
    p8, p9 = two_sum(p8, p9)
    t0, t1 = two_sum(q0, q4)
    t1 += q3 + q5
    r0, r1 = two_sum(p6, p8)
    r1 += p7 + p9
    q3, q4 = two_sum(t0, r0)
    q4 += t1 + r1
    t0, t1 = two_sum(q3, s1)
    t1 += q4
    t1 += a[1] * b[3] + a[2] * b[2] + a[3] * b[1] + q6 + q7 + q8 + q9 + s2
    t = np.empty(5)
    t[0] = p0
    t[1] = p1
    t[2] = s0
    t[3] = t0
    t[4] = t1
    renorm(t, 5, out)


@njit
def qd_div(a, b, out):
    r = a.copy()
    q = np.empty(5)
    m = np.zeros(4)
    p = np.empty(4)
    for k in range(4):
        q[k] = r[0] / b[0]
        m[0] = -q[k]
        qd_mul(b, m, p)
        qd_add(r, p, r)
    q[4] = r[0] / b[0]
    renorm(q, 5, out)


@njit
def qd_sqrt(a, out):
    if a[0] <= 0.0:
        v = 0.0 if a[0] == 0.0 else math.nan
        for k in range(4):
            out[k] = v
        return
    r = np.zeros(4)
    r[0] = 1.0 / math.sqrt(a[0])
    h = 0.5 * a
    half = np.zeros(4)
    half[0] = 0.5
    rr = np.empty(4)
    c = np.empty(4)
    for _ in range(3):
        qd_mul(r, r, rr)
        qd_mul(h, rr, c)
        c *= -1.0
        qd_add(half, c, c)
        qd_mul(c, r, rr)
        qd_add(r, rr, r)
    qd_mul(r, a, out)


# ---------------------------------------------------------------------------
# double-double complex on scalars
# ---------------------------------------------------------------------------

@njit(inline="always")
def dd_cmul(ar0, ar1, ai0, ai1, br0, br1, bi0, bi1):
    x0, x1 = dd_mul(ar0, ar1, br0, br1)
    y0, y1 = dd_mul(ai0, ai1, bi0, bi1)
    u0, u1 = dd_mul(ar0, ar1, bi0, bi1)
    v0, v1 = dd_mul(ai0, ai1, br0, br1)
    c0, c1 = dd_add(x0, x1, -y0, -y1)
    d0, d1 = dd_add(u0, u1, v0, v1)
    return c0, c1, d0, d1


@njit(inline="always")
def dd_cabs2(ar0, ar1, ai0, ai1):
    x0, x1 = dd_mul(ar0, ar1, ar0, ar1)
    y0, y1 = dd_mul(ai0, ai1, ai0, ai1)
    return dd_add(x0, x1, y0, y1)


@njit
def dd_cdiv(ar0, ar1, ai0, ai1, br0, br1, bi0, bi1):
    # Smith's algorithm: divide through by the larger component of b
    if abs(br0) >= abs(bi0):
        r0, r1 = dd_div(bi0, bi1, br0, br1)
        t0, t1 = dd_mul(bi0, bi1, r0, r1)
        e0, e1 = dd_add(br0, br1, t0, t1)
        t0, t1 = dd_mul(ai0, ai1, r0, r1)
        x0, x1 = dd_add(ar0, ar1, t0, t1)
        t0, t1 = dd_mul(ar0, ar1, r0, r1)
        y0, y1 = dd_add(ai0, ai1, -t0, -t1)
    else:
        r0, r1 = dd_div(br0, br1, bi0, bi1)
        t0, t1 = dd_mul(br0, br1, r0, r1)
        e0, e1 = dd_add(bi0, bi1, t0, t1)
        t0, t1 = dd_mul(ar0, ar1, r0, r1)
        x0, x1 = dd_add(ai0, ai1, t0, t1)
        t0, t1 = dd_mul(ai0, ai1, r0, r1)
        y0, y1 = dd_add(ar0, ar1, -t0, -t1)
        y0, y1 = -y0, -y1
    c0, c1 = dd_div(x0, x1, e0, e1)
    d0, d1 = dd_div(y0, y1, e0, e1)
    return c0, c1, d0, d1


@njit
def d_cdiv(ar, ai, br, bi):
    if abs(br) >= abs(bi):
        r = bi / br
        den = br + bi * r
        return (ar + ai * r) / den, (ai - ar * r) / den
    r = br / bi
    den = bi + br * r
    return (ar * r + ai) / den, -((ar - ai * r) / den)


# ---------------------------------------------------------------------------
# generic limb-vector operations (any level; used for quad-double)
# ---------------------------------------------------------------------------

@njit
def vadd(a, b, out):
    n = a.shape[0]
    if n == 1:
        out[0] = a[0] + b[0]
    elif n == 2:
        out[0], out[1] = dd_add(a[0], a[1], b[0], b[1])
    else:
        qd_add(a, b, out)


@njit
def vsub(a, b, out):
    vadd(a, -b, out)


@njit
def vmul(a, b, out):
    n = a.shape[0]
    if n == 1:
        out[0] = a[0] * b[0]
    elif n == 2:
        out[0], out[1] = dd_mul(a[0], a[1], b[0], b[1])
    else:
        qd_mul(a, b, out)


@njit
def vdiv(a, b, out):
    n = a.shape[0]
    if n == 1:
        out[0] = a[0] / b[0]
    elif n == 2:
        out[0], out[1] = dd_div(a[0], a[1], b[0], b[1])
    else:
        qd_div(a, b, out)


@njit
def vsqrt(a, out):
    n = a.shape[0]
    if n == 1:
        out[0] = math.sqrt(a[0]) if a[0] >= 0.0 else math.nan
    elif n == 2:
        out[0], out[1] = dd_sqrt(a[0], a[1])
    else:
        qd_sqrt(a, out)


@njit
def cmul(ar, ai, br, bi, cr, ci, sa=1.0):
    """``c = a * b`` with ``a``'s imaginary part scaled by ``sa`` (-1 gives conj(a) * b)."""
    n = ar.shape[0]
    x = np.empty(n)
    y = np.empty(n)
    u = np.empty(n)
    v = np.empty(n)
    vmul(ar, br, x)
    vmul(ai, bi, y)
    vmul(ar, bi, u)
    vmul(ai, br, v)
    vadd(x, -sa * y, cr)
    vadd(u, sa * v, ci)


@njit
def cabs2(ar, ai, out):
    x = np.empty(ar.shape[0])
    y = np.empty(ar.shape[0])
    vmul(ar, ar, x)
    vmul(ai, ai, y)
    vadd(x, y, out)


@njit
def cdiv(ar, ai, br, bi, cr, ci):
    n = ar.shape[0]
    if abs(br[0]) >= abs(bi[0]):
        p, q, s = br, bi, 1.0
        a2, b2 = ar, ai
    else:
        p, q, s = bi, br, -1.0
        a2, b2 = ai, ar
    r = np.empty(n)
    den = np.empty(n)
    t = np.empty(n)
    x = np.empty(n)
    y = np.empty(n)
    vdiv(q, p, r)
    vmul(q, r, t)
    vadd(p, t, den)
    vmul(b2, r, t)
    vadd(a2, t, x)
    vmul(a2, r, t)
    vsub(b2, t, y)
    vdiv(x, den, cr)
    vdiv(y, den, ci)
    if s < 0.0:
        for k in range(n):
            ci[k] = -ci[k]


# ---------------------------------------------------------------------------
# elementwise gufuncs; binary64 and double-double take scalar fast paths
# ---------------------------------------------------------------------------

@guvectorize([_F2], "(l),(l)->(l)", cache=True)
def g_add(a, b, out):
    n = a.shape[0]
    if n == 2:
        out[0], out[1] = dd_add(a[0], a[1], b[0], b[1])
    elif n == 1:
        out[0] = a[0] + b[0]
    else:
        qd_add(a, b, out)


@guvectorize([_F2], "(l),(l)->(l)", cache=True)
def g_sub(a, b, out):
    n = a.shape[0]
    if n == 2:
        out[0], out[1] = dd_add(a[0], a[1], -b[0], -b[1])
    elif n == 1:
        out[0] = a[0] - b[0]
    else:
        qd_add(a, -b, out)


@guvectorize([_F2], "(l),(l)->(l)", cache=True)
def g_mul(a, b, out):
    n = a.shape[0]
    if n == 2:
        out[0], out[1] = dd_mul(a[0], a[1], b[0], b[1])
    elif n == 1:
        out[0] = a[0] * b[0]
    else:
        qd_mul(a, b, out)


@guvectorize([_F2], "(l),(l)->(l)", cache=True)
def g_div(a, b, out):
    vdiv(a, b, out)


@guvectorize([_F1], "(l)->(l)", cache=True)
def g_sqrt(a, out):
    vsqrt(a, out)


@guvectorize([_F1], "(l)->(l)", cache=True)
def g_renorm(a, out):
    t = a.copy()
    renorm(t, a.shape[0], out)


@guvectorize([_F6], "(l),(l),(l),(l)->(l),(l)", cache=True)
def g_cadd(ar, ai, br, bi, cr, ci):
    n = ar.shape[0]
    if n == 2:
        cr[0], cr[1] = dd_add(ar[0], ar[1], br[0], br[1])
        ci[0], ci[1] = dd_add(ai[0], ai[1], bi[0], bi[1])
    elif n == 1:
        cr[0] = ar[0] + br[0]
        ci[0] = ai[0] + bi[0]
    else:
        qd_add(ar, br, cr)
        qd_add(ai, bi, ci)


@guvectorize([_F6], "(l),(l),(l),(l)->(l),(l)", cache=True)
def g_csub(ar, ai, br, bi, cr, ci):
    n = ar.shape[0]
    if n == 2:
        cr[0], cr[1] = dd_add(ar[0], ar[1], -br[0], -br[1])
        ci[0], ci[1] = dd_add(ai[0], ai[1], -bi[0], -bi[1])
    elif n == 1:
        cr[0] = ar[0] - br[0]
        ci[0] = ai[0] - bi[0]
    else:
        qd_add(ar, -br, cr)
        qd_add(ai, -bi, ci)


@guvectorize([_F6], "(l),(l),(l),(l)->(l),(l)", cache=True)
def g_cmul(ar, ai, br, bi, cr, ci):
    n = ar.shape[0]
    if n == 2:
        cr[0], cr[1], ci[0], ci[1] = dd_cmul(ar[0], ar[1], ai[0], ai[1], br[0], br[1], bi[0], bi[1])
    elif n == 1:
        x = ar[0] * br[0] - ai[0] * bi[0]
        ci[0] = ar[0] * bi[0] + ai[0] * br[0]
        cr[0] = x
    else:
        cmul(ar, ai, br, bi, cr, ci)


@guvectorize([_F6], "(l),(l),(l),(l)->(l),(l)", cache=True)
def g_cdiv(ar, ai, br, bi, cr, ci):
    n = ar.shape[0]
    if n == 2:
        cr[0], cr[1], ci[0], ci[1] = dd_cdiv(ar[0], ar[1], ai[0], ai[1], br[0], br[1], bi[0], bi[1])
    elif n == 1:
        cr[0], ci[0] = d_cdiv(ar[0], ai[0], br[0], bi[0])
    else:
        cdiv(ar, ai, br, bi, cr, ci)


@guvectorize([_F4], "(l),(l),(l)->(l),(l)", cache=True)
def g_cmul_real(ar, ai, b, cr, ci):
    n = ar.shape[0]
    if n == 2:
        cr[0], cr[1] = dd_mul(ar[0], ar[1], b[0], b[1])
        ci[0], ci[1] = dd_mul(ai[0], ai[1], b[0], b[1])
    elif n == 1:
        cr[0] = ar[0] * b[0]
        ci[0] = ai[0] * b[0]
    else:
        qd_mul(ar, b, cr)
        qd_mul(ai, b, ci)


@guvectorize([_F4], "(l),(l),(l)->(l),(l)", cache=True)
def g_cdiv_real(ar, ai, b, cr, ci):
    vdiv(ar, b, cr)
    vdiv(ai, b, ci)


@guvectorize([_F2], "(l),(l)->(l)", cache=True)
def g_cabs2(ar, ai, out):
    n = ar.shape[0]
    if n == 2:
        out[0], out[1] = dd_cabs2(ar[0], ar[1], ai[0], ai[1])
    elif n == 1:
        out[0] = ar[0] * ar[0] + ai[0] * ai[0]
    else:
        cabs2(ar, ai, out)


@guvectorize(["void(float64[:, :], float64[:, :], int64[:], float64[:], float64[:])"],
             "(r,l),(r,l),(w)->(l),(l)", cache=True)
def g_gather_sum(pr, pi, idx, sr, si):
    """Left-to-right sum of rows ``idx`` (entries < 0 are skipped)."""
    n = sr.shape[0]
    if n == 2:
        s0 = s1 = t0 = t1 = 0.0
        for c in range(idx.shape[0]):
            j = idx[c]
            if j >= 0:
                s0, s1 = dd_add(s0, s1, pr[j, 0], pr[j, 1])
                t0, t1 = dd_add(t0, t1, pi[j, 0], pi[j, 1])
        sr[0], sr[1], si[0], si[1] = s0, s1, t0, t1
        return
    for k in range(n):
        sr[k] = 0.0
        si[k] = 0.0
    for c in range(idx.shape[0]):
        j = idx[c]
        if j >= 0:
            vadd(sr, pr[j], sr)
            vadd(si, pi[j], si)


# ---------------------------------------------------------------------------
# modified Gram-Schmidt least squares, one problem per gufunc element
# ---------------------------------------------------------------------------

@njit
def _col_scale(vr, vi):
    m, n = vr.shape[0], vr.shape[1]
    scale = 0.0
    for j in range(n):
        s = 0.0
        for i in range(m):
            s += vr[i, j, 0] * vr[i, j, 0] + vi[i, j, 0] * vi[i, j, 0]
        scale = max(scale, math.sqrt(s))
    return scale


@njit
def _mgs_d(vr, vi, tol, qr, qi, rr, ri):
    m, n = vr.shape[0], vr.shape[1]
    scale = _col_scale(vr, vi)
    q = np.empty((m, n), dtype=np.complex128)
    v = np.empty(m, dtype=np.complex128)
    singular = 0.0
    for j in range(n):
        for i in range(m):
            v[i] = vr[i, j, 0] + 1j * vi[i, j, 0]
        for _ in range(2):
            for k in range(j):
                c = 0j
                for i in range(m):
                    c += q[i, k].conjugate() * v[i]
                rr[k, j, 0] += c.real
                ri[k, j, 0] += c.imag
                for i in range(m):
                    v[i] -= q[i, k] * c
        acc = 0.0
        for i in range(m):
            acc += v[i].real * v[i].real + v[i].imag * v[i].imag
        rjj = math.sqrt(acc)
        if not (rjj > tol * scale):
            singular = 1.0
            rjj = 1.0
        for i in range(m):
            q[i, j] = v[i] / rjj
        rr[j, j, 0] = rjj
    for i in range(m):
        for j in range(n):
            qr[i, j, 0] = q[i, j].real
            qi[i, j, 0] = q[i, j].imag
    return singular


@njit
def _mgs_dd(vr, vi, tol, qr, qi, rr, ri):
    m, n = vr.shape[0], vr.shape[1]
    scale = _col_scale(vr, vi)
    singular = 0.0
    for j in range(n):
        for _ in range(2):
            for k in range(j):
                c0 = c1 = d0 = d1 = 0.0
                for i in range(m):
                    x0, x1, y0, y1 = dd_cmul(qr[i, k, 0], qr[i, k, 1], -qi[i, k, 0], -qi[i, k, 1],
                                             vr[i, j, 0], vr[i, j, 1], vi[i, j, 0], vi[i, j, 1])
                    c0, c1 = dd_add(c0, c1, x0, x1)
                    d0, d1 = dd_add(d0, d1, y0, y1)
                rr[k, j, 0], rr[k, j, 1] = dd_add(rr[k, j, 0], rr[k, j, 1], c0, c1)
                ri[k, j, 0], ri[k, j, 1] = dd_add(ri[k, j, 0], ri[k, j, 1], d0, d1)
                for i in range(m):
                    x0, x1, y0, y1 = dd_cmul(qr[i, k, 0], qr[i, k, 1], qi[i, k, 0], qi[i, k, 1], c0, c1, d0, d1)
                    vr[i, j, 0], vr[i, j, 1] = dd_add(vr[i, j, 0], vr[i, j, 1], -x0, -x1)
                    vi[i, j, 0], vi[i, j, 1] = dd_add(vi[i, j, 0], vi[i, j, 1], -y0, -y1)
        a0 = a1 = 0.0
        for i in range(m):
            s0, s1 = dd_cabs2(vr[i, j, 0], vr[i, j, 1], vi[i, j, 0], vi[i, j, 1])
            a0, a1 = dd_add(a0, a1, s0, s1)
        r0, r1 = dd_sqrt(a0, a1)
        if not (r0 > tol * scale):
            singular = 1.0
            r0, r1 = 1.0, 0.0
        for i in range(m):
            qr[i, j, 0], qr[i, j, 1] = dd_div(vr[i, j, 0], vr[i, j, 1], r0, r1)
            qi[i, j, 0], qi[i, j, 1] = dd_div(vi[i, j, 0], vi[i, j, 1], r0, r1)
        rr[j, j, 0], rr[j, j, 1] = r0, r1
    return singular


@njit
def _mgs_any(vr, vi, tol, qr, qi, rr, ri):
    m, n, nl = vr.shape
    scale = _col_scale(vr, vi)
    singular = 0.0
    acc = np.empty(nl)
    sq = np.empty(nl)
    rjj = np.empty(nl)
    cr = np.empty(nl)
    ci = np.empty(nl)
    tr = np.empty(nl)
    ti = np.empty(nl)
    for j in range(n):
        for _ in range(2):
            for k in range(j):
                cr[:] = 0.0
                ci[:] = 0.0
                for i in range(m):
                    cmul(qr[i, k], qi[i, k], vr[i, j], vi[i, j], tr, ti, -1.0)
                    vadd(cr, tr, cr)
                    vadd(ci, ti, ci)
                vadd(rr[k, j], cr, rr[k, j])
                vadd(ri[k, j], ci, ri[k, j])
                for i in range(m):
                    cmul(qr[i, k], qi[i, k], cr, ci, tr, ti)
                    vsub(vr[i, j], tr, vr[i, j])
                    vsub(vi[i, j], ti, vi[i, j])
        acc[:] = 0.0
        for i in range(m):
            cabs2(vr[i, j], vi[i, j], sq)
            vadd(acc, sq, acc)
        vsqrt(acc, rjj)
        if not (rjj[0] > tol * scale):
            singular = 1.0
            rjj[:] = 0.0
            rjj[0] = 1.0
        for i in range(m):
            vdiv(vr[i, j], rjj, qr[i, j])
            vdiv(vi[i, j], rjj, qi[i, j])
        rr[j, j, :] = rjj
    return singular


@njit
def _mgs(vr, vi, tol, qr, qi, rr, ri):
    """Factor ``v`` (overwritten) into ``q`` and ``r``; returns 1.0 if singular.

    Left-looking Gram-Schmidt with one reorthogonalization pass per column,
    so ``Q`` stays orthogonal to working precision however ill-conditioned
    the matrix is.
    """
    nl = vr.shape[2]
    rr[:] = 0.0
    ri[:] = 0.0
    if nl == 2:
        return _mgs_dd(vr, vi, tol, qr, qi, rr, ri)
    if nl == 1:
        return _mgs_d(vr, vi, tol, qr, qi, rr, ri)
    return _mgs_any(vr, vi, tol, qr, qi, rr, ri)


@njit
def _qh_b(qr, qi, br, bi, xr, xi):
    m, n, nl = qr.shape
    if nl == 2:
        for j in range(n):
            c0 = c1 = d0 = d1 = 0.0
            for i in range(m):
                x0, x1, y0, y1 = dd_cmul(qr[i, j, 0], qr[i, j, 1], -qi[i, j, 0], -qi[i, j, 1],
                                         br[i, 0], br[i, 1], bi[i, 0], bi[i, 1])
                c0, c1 = dd_add(c0, c1, x0, x1)
                d0, d1 = dd_add(d0, d1, y0, y1)
            xr[j, 0], xr[j, 1], xi[j, 0], xi[j, 1] = c0, c1, d0, d1
        return
    tr = np.empty(nl)
    ti = np.empty(nl)
    for j in range(n):
        xr[j, :] = 0.0
        xi[j, :] = 0.0
        for i in range(m):
            cmul(qr[i, j], qi[i, j], br[i], bi[i], tr, ti, -1.0)
            vadd(xr[j], tr, xr[j])
            vadd(xi[j], ti, xi[j])


@njit
def _back_substitute(rr, ri, xr, xi):
    n, nl = xr.shape
    if nl == 2:
        for i in range(n - 1, -1, -1):
            a0, a1, b0, b1 = xr[i, 0], xr[i, 1], xi[i, 0], xi[i, 1]
            for k in range(i + 1, n):
                x0, x1, y0, y1 = dd_cmul(rr[i, k, 0], rr[i, k, 1], ri[i, k, 0], ri[i, k, 1],
                                         xr[k, 0], xr[k, 1], xi[k, 0], xi[k, 1])
                a0, a1 = dd_add(a0, a1, -x0, -x1)
                b0, b1 = dd_add(b0, b1, -y0, -y1)
            xr[i, 0], xr[i, 1] = dd_div(a0, a1, rr[i, i, 0], rr[i, i, 1])
            xi[i, 0], xi[i, 1] = dd_div(b0, b1, rr[i, i, 0], rr[i, i, 1])
        return
    tr = np.empty(nl)
    ti = np.empty(nl)
    for i in range(n - 1, -1, -1):
        for k in range(i + 1, n):
            cmul(rr[i, k], ri[i, k], xr[k], xi[k], tr, ti)
            vsub(xr[i], tr, xr[i])
            vsub(xi[i], ti, xi[i])
        vdiv(xr[i], rr[i, i], xr[i])
        vdiv(xi[i], rr[i, i], xi[i])


@guvectorize(["void(float64[:, :, :], float64[:, :, :], float64, float64[:, :, :], float64[:, :, :], "
              "float64[:, :, :], float64[:, :, :], float64[:])"],
             "(m,n,l),(m,n,l),()->(m,n,l),(m,n,l),(n,n,l),(n,n,l),()", cache=True)
def g_mgs_qr(ar, ai, tol, qr, qi, rr, ri, singular):
    singular[0] = _mgs(ar.copy(), ai.copy(), tol, qr, qi, rr, ri)


@guvectorize(["void(float64[:, :, :], float64[:, :, :], float64[:, :], float64[:, :], float64, "
              "float64[:, :], float64[:, :], float64[:])"],
             "(m,n,l),(m,n,l),(m,l),(m,l),()->(n,l),(n,l),()", cache=True)
def g_lstsq(ar, ai, br, bi, tol, xr, xi, singular):
    m, n, nl = ar.shape
    qr = np.empty_like(ar)
    qi = np.empty_like(ai)
    rr = np.empty((n, n, nl))
    ri = np.empty((n, n, nl))
    singular[0] = _mgs(ar.copy(), ai.copy(), tol, qr, qi, rr, ri)
    _qh_b(qr, qi, br, bi, xr, xi)
    _back_substitute(rr, ri, xr, xi)
