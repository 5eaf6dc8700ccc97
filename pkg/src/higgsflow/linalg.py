"""Pointwise linear algebra on grids of small Hermitian matrices.

All routines operate on arrays of shape (..., r, r) and are vectorized over
the leading axes.  Positive-definite inputs are assumed where the name says
so; the r <= 2 fast paths avoid LAPACK dispatch inside the flow loop.
"""

from __future__ import annotations

import numpy as np


def adjoint(m: np.ndarray) -> np.ndarray:
    """Pointwise conjugate transpose."""
    return np.conjugate(np.swapaxes(m, -1, -2))


def hermitize(m: np.ndarray) -> np.ndarray:
    """Project onto the Hermitian part, (m + m^dagger)/2."""
    return 0.5 * (m + adjoint(m))


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def trace(m: np.ndarray) -> np.ndarray:
    return np.trace(m, axis1=-2, axis2=-1)


def identity_like(m: np.ndarray) -> np.ndarray:
    r = m.shape[-1]
    out = np.zeros_like(m)
    out[..., range(r), range(r)] = 1.0
    return out


def inv_pd(m: np.ndarray) -> np.ndarray:
    """Inverse of positive-definite Hermitian matrices (closed form for r <= 2)."""
    r = m.shape[-1]
    if r == 1:
        return 1.0 / m
    if r == 2:
        a = m[..., 0, 0]
        b = m[..., 0, 1]
        c = m[..., 1, 0]
        d = m[..., 1, 1]
        det = a * d - b * c
        out = np.empty_like(m)
        out[..., 0, 0] = d / det
        out[..., 0, 1] = -b / det
        out[..., 1, 0] = -c / det
        out[..., 1, 1] = a / det
        return out
    return np.linalg.inv(m)


def det_pd(m: np.ndarray) -> np.ndarray:
    """Real determinant of positive-definite Hermitian matrices."""
    r = m.shape[-1]
    if r == 1:
        return m[..., 0, 0].real
    if r == 2:
        a = m[..., 0, 0].real
        d = m[..., 1, 1].real
        b = m[..., 0, 1]
        return a * d - (b * np.conjugate(b)).real
    sign, logdet = np.linalg.slogdet(m)
    return sign.real * np.exp(logdet.real)


def eigh_fun(m: np.ndarray, fun) -> np.ndarray:
    """Apply a scalar function to a Hermitian matrix field through eigh."""
    w, v = np.linalg.eigh(m)
    fw = fun(w)
    return np.einsum("...ij,...j,...kj->...ik", v, fw.astype(complex), np.conjugate(v))


def expm_h(m: np.ndarray) -> np.ndarray:
    """Matrix exponential of Hermitian matrices."""
    return eigh_fun(m, np.exp)


def logm_pd(m: np.ndarray) -> np.ndarray:
    """Matrix logarithm of positive-definite Hermitian matrices."""
    return eigh_fun(m, np.log)


def sqrtm_pd(m: np.ndarray) -> np.ndarray:
    return eigh_fun(m, np.sqrt)


def inv_sqrtm_pd(m: np.ndarray) -> np.ndarray:
    return eigh_fun(m, lambda w: 1.0 / np.sqrt(w))


def min_eig(m: np.ndarray) -> float:
    """Smallest eigenvalue over the whole field (Hermitian input)."""
    r = m.shape[-1]
    if r == 1:
        return float(m[..., 0, 0].real.min())
    if r == 2:
        a = m[..., 0, 0].real
        d = m[..., 1, 1].real
        b = m[..., 0, 1]
        half = 0.5 * (a + d)
        rad = np.sqrt(np.maximum(0.25 * (a - d) ** 2 + (b * np.conjugate(b)).real, 0.0))
        return float((half - rad).min())
    return float(np.linalg.eigvalsh(m)[..., 0].min())


def is_pd(m: np.ndarray, floor: float = 0.0) -> bool:
    """True when every matrix in the field has smallest eigenvalue > floor."""
    return min_eig(m) > floor


def transporter_log(k: np.ndarray, h: np.ndarray) -> np.ndarray:
    """k-self-adjoint logarithm v with h = k expm(v).

    Computed through the Hermitian similarity k^{-1/2} h k^{-1/2}, so
    intermediate eigenproblems stay Hermitian.
    """
    ks = sqrtm_pd(k)
    kis = inv_sqrtm_pd(k)
    t = hermitize(kis @ h @ kis)
    logt = logm_pd(t)
    return kis @ logt @ ks
