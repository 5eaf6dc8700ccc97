"""Hermitian metrics, the Hitchin-Simpson curvature and mean curvature.

Conventions (pinned by the degree and conformal acceptance checks):

* theta = h^{-1} d_tw h - h^{-1} a^dagger h is the Chern connection
  (1,0)-coefficient compatible with the twisted dbar-operator dbar_tw + a.
* The (1,1)-curvature coefficient of the Hitchin-Simpson connection is
  g = -dbar_tw theta + d_tw a + [theta, a] + [Phi, Phibar_h], and the mean
  curvature is K = g / lambda + K_bg with K_bg the exact constant background
  2 pi d_i / vol per flux-d_i row.  With this contraction the conformal law
  K(e^u h) = K(h) + box0(u) holds with the geometry's scalar Laplacian, the
  identity metric on a flux block is exactly Hermitian-Yang-Mills, and
  deg = (1/2pi) integral tr K omega reproduces the block degree to roundoff
  for every metric (the derivative terms telescope away in the cell sum).
* K is stored as the h-self-adjoint representative (the raw stencil is
  h-self-adjoint only to discretization error); the raw value is kept on the
  curvature bundle for variation oracles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg as la
from .bundle import DZ, DZBAR, DZDZBAR, FUNCTION, EndField, HiggsBundleConfig
from .errors import PositivityError, SolverError, ValidationError
from .geometry import DIRECTION_D, DIRECTION_DBAR

_PD_FLOOR = 0.0


@dataclass
class HermitianMetric:
    """Grid of positive-definite Hermitian r x r matrices."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim != 4 or v.shape[2] != v.shape[3]:
            raise ValidationError(f"metric values must be (N, N, r, r), got {v.shape}")
        v = la.hermitize(v)
        if not la.is_pd(v, _PD_FLOOR):
            raise PositivityError("metric is not pointwise positive definite")
        self.values = v

    @property
    def rank(self) -> int:
        return self.values.shape[2]

    @classmethod
    def identity(cls, cfg: HiggsBundleConfig) -> "HermitianMetric":
        return cls(cfg.identity_endo())

    @classmethod
    def conformal(cls, cfg: HiggsBundleConfig, scale: np.ndarray) -> "HermitianMetric":
        """exp-free scalar rescaling of the identity, scale > 0 pointwise."""
        return cls(np.asarray(scale)[:, :, None, None] * cfg.identity_endo())

    def copy(self) -> "HermitianMetric":
        return HermitianMetric(self.values.copy())


@dataclass
class CurvatureBundle:
    """Curvature data of the Hitchin-Simpson connection for one metric."""

    F11: EndField
    K: EndField
    theta: EndField
    K_raw: np.ndarray


def _values(h) -> np.ndarray:
    return np.asarray(getattr(h, "values", h))


# -- core assembly -------------------------------------------------------------


def higgs_adjoint_values(H: np.ndarray, cfg: HiggsBundleConfig) -> np.ndarray:
    Hinv = la.inv_pd(H)
    return Hinv @ cfg._phi_dag @ H


def chern_theta_values(H: np.ndarray, cfg: HiggsBundleConfig) -> np.ndarray:
    Hinv = la.inv_pd(H)
    dH = cfg.geometry.diff_end(H, DIRECTION_D, cfg.twist)
    return Hinv @ dH - Hinv @ cfg._a_dag @ H


def mean_curvature_values(H: np.ndarray, cfg: HiggsBundleConfig, raw: bool = False):
    """h-self-adjoint mean curvature K (and optionally the raw stencil)."""
    geom = cfg.geometry
    Hinv = la.inv_pd(H)
    dH = geom.diff_end(H, DIRECTION_D, cfg.twist)
    theta = Hinv @ dH - Hinv @ cfg._a_dag @ H
    a = cfg.a.values
    phibar = Hinv @ cfg._phi_dag @ H
    phi = cfg.phi.values
    g = (
        -geom.diff_end(theta, DIRECTION_DBAR, cfg.twist)
        + cfg._d_a
        + theta @ a
        - a @ theta
        + phi @ phibar
        - phibar @ phi
    )
    k_raw = g / geom.lam
    k_raw[..., range(cfg.rank), range(cfg.rank)] += np.diagonal(cfg.k_bg)
    k_adj = Hinv @ la.adjoint(k_raw) @ H
    k = 0.5 * (k_raw + k_adj)
    if raw:
        return k, k_raw, theta
    return k


def mean_curvature_fast(H: np.ndarray, cfg: HiggsBundleConfig) -> np.ndarray:
    """Mean curvature through the fused kernel; falls back to the reference."""
    from . import _kernels

    if not _kernels.HAVE_NUMBA:
        return mean_curvature_values(H, cfg)
    geom = cfg.geometry
    px, pxb, py, pyb, _ = geom._end_phase_tensors(cfg.twist)
    kbg = getattr(cfg, "_kbg_diag", None)
    if kbg is None:
        kbg = np.ascontiguousarray(np.diagonal(cfg.k_bg))
        cfg._kbg_diag = kbg
    return _kernels._mean_curvature_kernel(
        np.ascontiguousarray(H),
        cfg.phi.values, cfg._phi_dag, cfg.a.values, cfg._a_dag, cfg._d_a,
        kbg, px, pxb, py, pyb,
        geom._cx_d, geom._cy_d, geom._cx_dbar, geom._cy_dbar,
        geom.lam, 0.5 * geom.n_grid,
    )


def curvature11(h, cfg: HiggsBundleConfig) -> CurvatureBundle:
    """Full curvature bundle: F11 coefficient, mean curvature, connection."""
    H = _values(h)
    k, k_raw, theta = mean_curvature_values(H, cfg, raw=True)
    lam = cfg.geometry.lam
    return CurvatureBundle(
        F11=EndField(lam * k, cfg.twist, DZDZBAR),
        K=EndField(k, cfg.twist, FUNCTION),
        theta=EndField(theta, cfg.twist, DZ),
        K_raw=k_raw,
    )


def higgs_adjoint(h, cfg: HiggsBundleConfig) -> EndField:
    """phibar = h^{-1} Phi^dagger h, the h-adjoint of the Higgs field."""
    return EndField(higgs_adjoint_values(_values(h), cfg), cfg.twist, DZBAR)


def chern_connection(h, cfg: HiggsBundleConfig) -> EndField:
    """(1,0)-coefficient of the Chern connection of (dbar_tw + a, h)."""
    return EndField(chern_theta_values(_values(h), cfg), cfg.twist, DZ)


# -- scalar reductions ---------------------------------------------------------


def degree_slope_c(cfg: HiggsBundleConfig, h) -> tuple[float, float, float]:
    """(degree, slope, c) from the curvature integral of the given metric."""
    k = mean_curvature_values(_values(h), cfg)
    deg = cfg.geometry.integrate(la.trace(k).real) / (2 * np.pi)
    mu = deg / cfg.rank
    c = 2 * np.pi * mu / cfg.geometry.vol
    return float(deg), float(mu), float(c)


def residual_length_sq(H: np.ndarray, K: np.ndarray, c: float) -> np.ndarray:
    """Pointwise |K - cI|^2 = tr[(K - cI)^2] on the h-self-adjoint representative."""
    m = K.copy()
    r = K.shape[-1]
    m[..., range(r), range(r)] -= c
    s2 = la.trace(m @ m).real
    return np.maximum(s2, 0.0)


def hym_residual(h, cfg: HiggsBundleConfig) -> tuple[float, float]:
    """(sup-norm, L2-norm) of K - cI with the topological constant c."""
    H = _values(h)
    k = mean_curvature_values(H, cfg)
    s2 = residual_length_sq(H, k, cfg.hym_constant)
    max_res = float(np.sqrt(s2.max()))
    l2_res = float(np.sqrt(cfg.geometry.integrate(s2)))
    return max_res, l2_res


def conformal_change(h, a_scalar: np.ndarray) -> HermitianMetric:
    """h' = a h for a positive scalar field a."""
    a = np.asarray(a_scalar)
    if np.iscomplexobj(a):
        if np.max(np.abs(a.imag)) > 1e-12 * max(np.max(np.abs(a)), 1.0):
            raise ValidationError("conformal factor must be real")
        a = a.real
    if a.min() <= 0:
        raise ValidationError("conformal factor must be positive everywhere")
    return HermitianMetric(a[:, :, None, None] * _values(h))


def normalize_to_hym(h, cfg: HiggsBundleConfig, max_iter: int = 25) -> HermitianMetric:
    """Conformal normalization of a weak Hermitian-Yang-Mills metric.

    Requires K pointwise scalar (always true on line bundles).  Solves
    box0 u = c - gamma with gamma = tr K / r and rescales by e^u; the solve is
    iterated so the nonlinear composition error of the discrete operators is
    driven to the Poisson residual level.  The total u is mean-zero, making
    the output unique up to homothety.
    """
    H0 = _values(h)
    geom = cfg.geometry
    c = cfg.hym_constant
    H = H0
    scale_total = np.zeros((geom.n_grid, geom.n_grid))
    best = np.inf
    for _ in range(max_iter):
        k = mean_curvature_values(H, cfg)
        gamma = la.trace(k).real / cfg.rank
        dev = k.copy()
        dev[..., range(cfg.rank), range(cfg.rank)] -= gamma[..., None]
        scalar_dev = float(np.sqrt(np.sum(np.abs(dev) ** 2, axis=(-2, -1))).max())
        if scalar_dev > 1e-6:
            raise ValidationError(
                f"mean curvature is not pointwise scalar (deviation {scalar_dev:.3e}); "
                "not a weak Hermitian-Yang-Mills metric"
            )
        res = float(np.max(np.abs(gamma - c)))
        if res <= 1e-9 or res >= 0.5 * best:
            break
        best = res
        u = geom.poisson_solve(c - gamma)
        scale_total = scale_total + u
        H = np.exp(scale_total)[:, :, None, None] * H0
    if res > max(1e-6, 10.0 / geom.n_grid**4):
        raise SolverError(f"normalization stalled at residual {res:.3e}")
    if float(np.max(np.abs(scale_total))) == 0.0:
        return HermitianMetric(H0)
    return HermitianMetric(H)


def inner_product(v, w, h, cfg: HiggsBundleConfig, kind: str = "form") -> float:
    """Riemannian pairing (v, w)_h = integral tr(h^{-1} v h^{-1} w) omega.

    kind selects whether v, w are Hermitian forms or endomorphisms; forms are
    converted through endo = h^{-1} form.
    """
    V, W, H = _values(v), _values(w), _values(h)
    if kind == "form":
        Hinv = la.inv_pd(H)
        ev, ew = Hinv @ V, Hinv @ W
    elif kind == "endo":
        ev, ew = V, W
    else:
        raise ValidationError("kind must be 'form' or 'endo'")
    dens = la.trace(ev @ ew)
    return float(cfg.geometry.integrate(dens).real)


# -- second-order operators ------------------------------------------------------


def box_tilde_values(
    v: np.ndarray, H: np.ndarray, cfg: HiggsBundleConfig, theta: np.ndarray | None = None
) -> np.ndarray:
    geom = cfg.geometry
    if theta is None:
        theta = chern_theta_values(H, cfg)
    a = cfg.a.values
    phi = cfg.phi.values
    phibar = higgs_adjoint_values(H, cfg)
    dp = geom.diff_end(v, DIRECTION_D, cfg.twist) + theta @ v - v @ theta
    q = phibar @ v - v @ phibar
    out = -(geom.diff_end(dp, DIRECTION_DBAR, cfg.twist) + a @ dp - dp @ a)
    out += phi @ q - q @ phi
    return out / geom.lam


def box_tilde(v, h, cfg: HiggsBundleConfig) -> EndField:
    """Second-order operator i Lambda Dpp Dp of the Hitchin-Simpson connection.

    Matches the first variation of the raw mean curvature: the directional
    derivative of K_raw at h along h e^{eps v} converges to box_tilde(v) as
    eps -> 0 up to discretization error.
    """
    return EndField(box_tilde_values(_values(v), _values(h), cfg), cfg.twist, FUNCTION)


def prime_norm_sq(v, h, cfg: HiggsBundleConfig) -> float:
    """|Dp v|_h^2: squared norm of the full (1,0)+(0,1) Hitchin-Simpson
    derivative of a self-adjoint endomorphism, weighted like the mean
    curvature contraction."""
    V, H = _values(v), _values(h)
    geom = cfg.geometry
    Hinv = la.inv_pd(H)
    theta = chern_theta_values(H, cfg)
    phibar = Hinv @ cfg._phi_dag @ H
    dp = geom.diff_end(V, DIRECTION_D, cfg.twist) + theta @ V - V @ theta
    br = phibar @ V - V @ phibar
    dens = la.trace(Hinv @ la.adjoint(dp) @ H @ dp).real
    dens = dens + la.trace(Hinv @ la.adjoint(br) @ H @ br).real
    return float(geom.integrate(dens) / geom.lam)


def doubleprime_norm_sq(v, h, cfg: HiggsBundleConfig) -> float:
    """|Dpp v|_h^2 with Dpp = dbar_tw + [a, .] + [phi, .]; equals |Dp v|^2 for
    self-adjoint v up to discretization error."""
    V, H = _values(v), _values(h)
    geom = cfg.geometry
    Hinv = la.inv_pd(H)
    dpp = geom.diff_end(V, DIRECTION_DBAR, cfg.twist) + cfg.a.values @ V - V @ cfg.a.values
    br = cfg.phi.values @ V - V @ cfg.phi.values
    dens = la.trace(Hinv @ la.adjoint(dpp) @ H @ dpp).real
    dens = dens + la.trace(Hinv @ la.adjoint(br) @ H @ br).real
    return float(geom.integrate(dens) / geom.lam)


# -- derived metrics -------------------------------------------------------------


def dual_metric(h) -> HermitianMetric:
    """Metric induced on the dual bundle in the dual frame."""
    H = _values(h)
    return HermitianMetric(np.swapaxes(la.inv_pd(H), -1, -2))


def tensor_metric(h1, h2) -> HermitianMetric:
    """h1 (x) h2 on the tensor product, pointwise Kronecker product."""
    H1, H2 = _values(h1), _values(h2)
    n = H1.shape[0]
    r1, r2 = H1.shape[-1], H2.shape[-1]
    out = np.einsum("xyij,xykl->xyikjl", H1, H2).reshape(n, n, r1 * r2, r1 * r2)
    return HermitianMetric(out)


def direct_sum_metric(h1, h2) -> HermitianMetric:
    H1, H2 = _values(h1), _values(h2)
    n = H1.shape[0]
    r1, r2 = H1.shape[-1], H2.shape[-1]
    out = np.zeros((n, n, r1 + r2, r1 + r2), dtype=complex)
    out[:, :, :r1, :r1] = H1
    out[:, :, r1:, r1:] = H2
    return HermitianMetric(out)
