"""Deterministic band-limited random fields for tests, checks and initial data.

Everything is driven by an explicit numpy Generator so runs are reproducible
bit-for-bit.  Fields are built from the lowest Fourier modes: smooth by
construction, which keeps discretization error in oracle comparisons at the
scale the second-order stencils promise.
"""

from __future__ import annotations

import numpy as np

from .bundle import HiggsBundleConfig
from .geometry import TorusGeometry
from .linalg import expm_h, hermitize
from .metric import HermitianMetric


def smooth_scalar(
    geometry: TorusGeometry,
    rng: np.random.Generator,
    amplitude: float = 1.0,
    band: int = 2,
    real: bool = True,
) -> np.ndarray:
    """Random smooth field from Fourier modes with |m|, |n| <= band."""
    x, y = geometry.x, geometry.y
    out = np.zeros_like(x, dtype=complex)
    for m in range(-band, band + 1):
        for n in range(-band, band + 1):
            if m == 0 and n == 0:
                continue
            c = (rng.standard_normal() + 1j * rng.standard_normal()) / (
                1.0 + m * m + n * n
            )
            out = out + c * np.exp(2j * np.pi * (m * x + n * y))
    if real:
        out = out.real
        peak = np.max(np.abs(out))
        return amplitude * out / max(peak, 1e-30)
    peak = np.max(np.abs(out))
    return amplitude * out / max(peak, 1e-30)


def smooth_hermitian_endo(
    cfg: HiggsBundleConfig,
    rng: np.random.Generator,
    amplitude: float = 0.5,
    band: int = 1,
    block_diagonal: bool = True,
) -> np.ndarray:
    """Smooth self-adjoint endomorphism field, respecting the twist structure.

    Entries of nonzero twist are not smooth sections in the global frame, so
    by default only the untwisted (block-diagonal) entries are populated; for
    configs carrying a nonzero dbar-perturbation, its entries serve as smooth
    twisted carriers for the off-diagonal part.
    """
    n, r = cfg.geometry.n_grid, cfg.rank
    s = np.zeros((n, n, r, r), dtype=complex)
    for i in range(r):
        for j in range(i, r):
            if cfg.twist.entry_flux[i, j] != 0:
                continue
            if i == j:
                s[:, :, i, i] = smooth_scalar(cfg.geometry, rng, 1.0, band)
            else:
                s[:, :, i, j] = smooth_scalar(cfg.geometry, rng, 1.0, band, real=False)
                s[:, :, j, i] = np.conjugate(s[:, :, i, j])
    if not block_diagonal:
        carrier = cfg.a.values
        for i in range(r):
            for j in range(i + 1, r):
                if cfg.twist.entry_flux[i, j] == 0:
                    continue
                c = carrier[:, :, i, j]
                if np.max(np.abs(c)) == 0.0:
                    continue
                w = smooth_scalar(cfg.geometry, rng, 1.0, band, real=False)
                s[:, :, i, j] = w * c / np.max(np.abs(c))
                s[:, :, j, i] = np.conjugate(s[:, :, i, j])
    peak = np.sqrt(np.sum(np.abs(s) ** 2, axis=(-2, -1))).max()
    return amplitude * s / max(peak, 1e-30)


def random_metric(
    cfg: HiggsBundleConfig,
    rng: np.random.Generator,
    amplitude: float = 0.5,
    band: int = 1,
    block_diagonal: bool = True,
) -> HermitianMetric:
    """exp of a smooth random Hermitian field: positive definite by construction."""
    s = smooth_hermitian_endo(cfg, rng, amplitude, band, block_diagonal)
    return HermitianMetric(expm_h(hermitize(s)))


def random_selfadjoint(
    cfg: HiggsBundleConfig,
    h: HermitianMetric,
    rng: np.random.Generator,
    amplitude: float = 0.5,
    band: int = 1,
    traceless: bool = False,
) -> np.ndarray:
    """Smooth h-self-adjoint endomorphism (tangent direction at h)."""
    s = smooth_hermitian_endo(cfg, rng, amplitude, band)
    from .linalg import inv_pd

    v = inv_pd(h.values) @ s  # h^{-1} (Hermitian form) is h-self-adjoint
    if traceless:
        tr = np.trace(v, axis1=-2, axis2=-1) / cfg.rank
        v = v.copy()
        v[..., range(cfg.rank), range(cfg.rank)] -= tr[..., None]
    return v
