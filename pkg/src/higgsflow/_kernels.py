"""Fused evaluation kernels for the flow hot path.

The numpy implementations in metric.py stay the reference; these kernels
compute the same mean curvature and flow right-hand side in one pass over
the grid, which is what makes long desk-scale flow runs affordable.  When
numba is unavailable everything falls back to the reference path.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a soft dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap


@njit(cache=True)
def _mean_curvature_kernel(
    H, phi, phidag, a, adag, d_a, kbg, px, pxb, py, pyb,
    cxd, cyd, cxb, cyb, lam, half_n,
):
    n = H.shape[0]
    r = H.shape[2]
    hinv = np.empty_like(H)
    theta = np.empty_like(H)
    phibar = np.empty_like(H)
    buf_a = np.empty((r, r), dtype=np.complex128)
    buf_b = np.empty((r, r), dtype=np.complex128)
    dh = np.empty((r, r), dtype=np.complex128)
    for j in range(n):
        jp = (j + 1) % n
        jm = (j - 1) % n
        for k in range(n):
            kp = (k + 1) % n
            km = (k - 1) % n
            # 2x2 (or generic) inverse of the Hermitian block
            if r == 1:
                hinv[j, k, 0, 0] = 1.0 / H[j, k, 0, 0]
            elif r == 2:
                det = H[j, k, 0, 0] * H[j, k, 1, 1] - H[j, k, 0, 1] * H[j, k, 1, 0]
                hinv[j, k, 0, 0] = H[j, k, 1, 1] / det
                hinv[j, k, 0, 1] = -H[j, k, 0, 1] / det
                hinv[j, k, 1, 0] = -H[j, k, 1, 0] / det
                hinv[j, k, 1, 1] = H[j, k, 0, 0] / det
            else:
                hinv[j, k] = np.linalg.inv(H[j, k])
            # twisted centered derivative of H in the holomorphic direction
            for p in range(r):
                for q in range(r):
                    dx = half_n * (
                        px[j, k, p, q] * H[jp, k, p, q]
                        - pxb[j, k, p, q] * H[jm, k, p, q]
                    )
                    dy = half_n * (
                        py[j, k, p, q] * H[j, kp, p, q]
                        - pyb[j, k, p, q] * H[j, km, p, q]
                    )
                    dh[p, q] = cxd * dx + cyd * dy
            # buf_a = dh - adag H;  theta = hinv buf_a
            for p in range(r):
                for q in range(r):
                    s = dh[p, q]
                    for l in range(r):
                        s -= adag[j, k, p, l] * H[j, k, l, q]
                    buf_a[p, q] = s
            for p in range(r):
                for q in range(r):
                    s = 0.0 + 0.0j
                    for l in range(r):
                        s += hinv[j, k, p, l] * buf_a[l, q]
                    theta[j, k, p, q] = s
            # phibar = hinv phidag H via buf_b = hinv phidag
            for p in range(r):
                for q in range(r):
                    s = 0.0 + 0.0j
                    for l in range(r):
                        s += hinv[j, k, p, l] * phidag[j, k, l, q]
                    buf_b[p, q] = s
            for p in range(r):
                for q in range(r):
                    s = 0.0 + 0.0j
                    for l in range(r):
                        s += buf_b[p, l] * H[j, k, l, q]
                    phibar[j, k, p, q] = s
    k_out = np.empty_like(H)
    for j in range(n):
        jp = (j + 1) % n
        jm = (j - 1) % n
        for k in range(n):
            kp = (k + 1) % n
            km = (k - 1) % n
            for p in range(r):
                for q in range(r):
                    dx = half_n * (
                        px[j, k, p, q] * theta[jp, k, p, q]
                        - pxb[j, k, p, q] * theta[jm, k, p, q]
                    )
                    dy = half_n * (
                        py[j, k, p, q] * theta[j, kp, p, q]
                        - pyb[j, k, p, q] * theta[j, km, p, q]
                    )
                    g = -(cxb * dx + cyb * dy) + d_a[j, k, p, q]
                    for l in range(r):
                        g += (
                            theta[j, k, p, l] * a[j, k, l, q]
                            - a[j, k, p, l] * theta[j, k, l, q]
                            + phi[j, k, p, l] * phibar[j, k, l, q]
                            - phibar[j, k, p, l] * phi[j, k, l, q]
                        )
                    k_out[j, k, p, q] = g / lam
                k_out[j, k, p, p] += kbg[p]
    # h-self-adjoint representative: (k + hinv k^dagger H)/2
    k_sym = np.empty_like(H)
    for j in range(n):
        for k in range(n):
            for p in range(r):
                for q in range(r):
                    s = 0.0 + 0.0j
                    for l1 in range(r):
                        for l2 in range(r):
                            s += (
                                hinv[j, k, p, l1]
                                * np.conj(k_out[j, k, l2, l1])
                                * H[j, k, l2, q]
                            )
                    k_sym[j, k, p, q] = 0.5 * (k_out[j, k, p, q] + s)
    return k_sym


@njit(cache=True)
def _rhs_kernel(H, k_sym, c, cell_area):
    """(-H (K - cI), integral |K - cI|^2 omega) from a computed K."""
    n = H.shape[0]
    r = H.shape[2]
    out = np.empty_like(H)
    l2sq = 0.0
    sup_sq = 0.0
    for j in range(n):
        for k in range(n):
            s2 = 0.0
            for p in range(r):
                for q in range(r):
                    m_pq = k_sym[j, k, p, q]
                    if p == q:
                        m_pq -= c
                    m_qp = k_sym[j, k, q, p]
                    if p == q:
                        m_qp -= c
                    s2 += (m_pq * m_qp).real
                    s = 0.0 + 0.0j
                    for l in range(r):
                        m_lq = k_sym[j, k, l, q]
                        if l == q:
                            m_lq -= c
                        s += H[j, k, p, l] * m_lq
                    out[j, k, p, q] = -s
            if s2 < 0.0:
                s2 = 0.0
            l2sq += s2
            if s2 > sup_sq:
                sup_sq = s2
    return out, l2sq * cell_area, sup_sq
