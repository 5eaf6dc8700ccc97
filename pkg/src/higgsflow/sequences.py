"""Exact sequences of Higgs bundles realized as frame-aligned flags.

A flag at split index s presents 0 -> E' -> E -> E'' -> 0 with E' the span of
the first s frame vectors; the configuration must be strictly block-upper-
triangular with respect to s so that E' is a Higgs subbundle.  A metric h on
E induces h' (restriction) and h'' (Schur complement, i.e. the metric of the
h-orthogonal complement) together with the second fundamental form
B = mu_h o dbar o lambda_h in A^{0,1}(Hom(E'', E')).

Because the quotient metric is the Schur complement, det h = det h' det h''
pointwise, so the Q1 additivity of the functional decomposition is exact on
the grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg as la
from .bundle import (
    DZ,
    DZBAR,
    BlockSpec,
    EndField,
    HiggsBundleConfig,
    build_config,
)
from .donaldson import eval_L
from .errors import ValidationError
from .geometry import DIRECTION_DBAR
from .metric import HermitianMetric, _values


@dataclass(frozen=True)
class FlagSpec:
    """Sub = first split_index rows of the frame."""

    split_index: int


def validate_flag(flag: FlagSpec, cfg: HiggsBundleConfig, tol: float = 1e-10) -> None:
    s = flag.split_index
    if not 0 < s < cfg.rank:
        raise ValidationError(f"split index {s} out of range for rank {cfg.rank}")
    for f, name in ((cfg.a.values, "a"), (cfg.phi.values, "phi")):
        low = float(np.max(np.abs(f[:, :, s:, :s])))
        if low > tol:
            raise ValidationError(
                f"lower-left block of {name} is {low:.3e}; flag is not Higgs-invariant"
            )


def sub_config(cfg: HiggsBundleConfig, flag: FlagSpec) -> HiggsBundleConfig:
    s = flag.split_index
    return _restrict(cfg, slice(None, s), f"{cfg.label}|sub({s})")


def quotient_config(cfg: HiggsBundleConfig, flag: FlagSpec) -> HiggsBundleConfig:
    s = flag.split_index
    return _restrict(cfg, slice(s, None), f"{cfg.label}|quot({s})")


def _restrict(cfg: HiggsBundleConfig, rows: slice, label: str) -> HiggsBundleConfig:
    fluxes = cfg.fluxes[rows]
    blocks = []
    for f in fluxes:
        if blocks and blocks[-1].flux == f:
            blocks[-1] = BlockSpec(blocks[-1].multiplicity + 1, int(f))
        else:
            blocks.append(BlockSpec(1, int(f)))
    from .geometry import TwistPattern

    twist = TwistPattern.from_fluxes(fluxes)
    a = EndField(cfg.a.values[:, :, rows, rows].copy(), twist, DZBAR)
    phi = EndField(cfg.phi.values[:, :, rows, rows].copy(), twist, DZ)
    return build_config(cfg.geometry, blocks, a, phi, label=label)


# -- induced metrics ---------------------------------------------------------------


def split_metrics(h, flag: FlagSpec, cfg: HiggsBundleConfig):
    """(h_sub, h_quot): restriction and Schur-complement quotient metric."""
    validate_flag(flag, cfg)
    s = flag.split_index
    H = _values(h)
    h11 = H[:, :, :s, :s]
    h12 = H[:, :, :s, s:]
    h21 = H[:, :, s:, :s]
    h22 = H[:, :, s:, s:]
    schur = h22 - h21 @ la.inv_pd(h11) @ h12
    return HermitianMetric(h11.copy()), HermitianMetric(schur)


def _diff_hom_dbar(cfg: HiggsBundleConfig, field: np.ndarray, row_fluxes, col_fluxes):
    """Entrywise twisted dbar of a rectangular Hom-valued field."""
    geom = cfg.geometry
    out = np.empty_like(field)
    for i, fi in enumerate(row_fluxes):
        for j, fj in enumerate(col_fluxes):
            out[:, :, i, j] = geom.diff_scalar(
                field[:, :, i, j], DIRECTION_DBAR, int(fi - fj)
            )
    return out


def second_fundamental_form(h, flag: FlagSpec, cfg: HiggsBundleConfig) -> np.ndarray:
    """B = mu_h o D'' o lambda_h, an (N, N, s, r-s) (0,1)-coefficient field."""
    validate_flag(flag, cfg)
    s = flag.split_index
    H = _values(h)
    h11 = H[:, :, :s, :s]
    h12 = H[:, :, :s, s:]
    n, r = cfg.geometry.n_grid, cfg.rank
    # orthogonal lift lambda = [xi; I] with xi = -h11^{-1} h12
    xi = -la.inv_pd(h11) @ h12
    lam_map = np.zeros((n, n, r, r - s), dtype=complex)
    lam_map[:, :, :s, :] = xi
    lam_map[:, :, s:, :] = np.eye(r - s, dtype=complex)
    # D'' lambda = dbar_tw lambda + a lambda - lambda a''
    dlam = _diff_hom_dbar(cfg, lam_map, cfg.fluxes, cfg.fluxes[s:])
    a = cfg.a.values
    dlam = dlam + a @ lam_map - lam_map @ a[:, :, s:, s:]
    # mu = [I, -xi] projects along the orthogonal complement onto E'
    b = dlam[:, :, :s, :] - xi @ dlam[:, :, s:, :]
    return b


def b_norm_sq(b: np.ndarray, h_sub, h_quot, cfg: HiggsBundleConfig) -> float:
    """|B|^2 integrated: (1/lambda) int tr(h''^{-1} B^dagger h' B) omega."""
    hs, hq = _values(h_sub), _values(h_quot)
    dens = la.trace(la.inv_pd(hq) @ la.adjoint(b) @ hs @ b).real
    return float(cfg.geometry.integrate(dens) / cfg.geometry.lam)


# -- the decomposition identity -------------------------------------------------------


@dataclass
class DecompositionReport:
    L_total: float
    L_sub: float
    L_quot: float
    B_h_sq: float
    B_k_sq: float
    lhs: float
    rhs: float
    difference: float


def decomposition_check(h, k, flag: FlagSpec, cfg: HiggsBundleConfig) -> DecompositionReport:
    """Both sides of L(h,k) = L(h',k') + L(h'',k'') + |B_h|^2 - |B_k|^2.

    Valid only when the subbundle has the same slope as the total bundle
    (then sub, quotient and total share one constant c); refuses otherwise.
    """
    validate_flag(flag, cfg)
    s = flag.split_index
    sub_deg = int(cfg.fluxes[:s].sum())
    mu_sub = sub_deg / s
    if abs(mu_sub - cfg.slope) > 1e-8:
        raise ValidationError(
            f"slope hypothesis fails: mu(sub) = {mu_sub} != mu(E) = {cfg.slope}"
        )
    subcfg = sub_config(cfg, flag)
    quotcfg = quotient_config(cfg, flag)
    h_sub, h_quot = split_metrics(h, flag, cfg)
    k_sub, k_quot = split_metrics(k, flag, cfg)
    L_total = eval_L(h, k, cfg).L
    L_sub = eval_L(h_sub, k_sub, subcfg).L
    L_quot = eval_L(h_quot, k_quot, quotcfg).L
    bh = second_fundamental_form(h, flag, cfg)
    bk = second_fundamental_form(k, flag, cfg)
    bh2 = b_norm_sq(bh, h_sub, h_quot, cfg)
    bk2 = b_norm_sq(bk, k_sub, k_quot, cfg)
    rhs = L_sub + L_quot + bh2 - bk2
    return DecompositionReport(
        L_total=L_total,
        L_sub=L_sub,
        L_quot=L_quot,
        B_h_sq=bh2,
        B_k_sq=bk2,
        lhs=L_total,
        rhs=rhs,
        difference=L_total - rhs,
    )
