"""Higgs bundle configurations on the discretized torus.

A configuration is a block structure (background fluxes and multiplicities),
a dbar-perturbation a (the (0,1)-coefficient defining the holomorphic
structure on top of the flux background) and a Higgs field coefficient Phi
(phi = Phi dz).  Everything lives in one global smooth frame; all topology is
carried by the link phases of the per-entry twist pattern.

In complex dimension one phi wedge phi vanishes identically, so the surviving
integrability condition is the holomorphicity of phi: dbar Phi + [a, Phi] = 0
up to the configured tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import catalog
from .errors import ValidationError
from .geometry import DIRECTION_D, DIRECTION_DBAR, TorusGeometry, TwistPattern

FUNCTION = "function"
DZ = "dz"
DZBAR = "dzbar"
DZDZBAR = "dzdzbar"

_FORM_TYPES = (FUNCTION, DZ, DZBAR, DZDZBAR)


@dataclass
class EndField:
    """Grid of r x r matrices with a per-entry U(1) twist pattern.

    form_type records what geometric object the matrices are coefficients of:
    an endomorphism (function), a (1,0)- or (0,1)-form coefficient, or the
    coefficient f of a (1,1)-form (i/2) f dz wedge dzbar.
    """

    values: np.ndarray
    twist: TwistPattern
    form_type: str = FUNCTION

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim != 4 or v.shape[2] != v.shape[3] or v.shape[0] != v.shape[1]:
            raise ValidationError(f"EndField values must be (N, N, r, r), got {v.shape}")
        if v.shape[2] != self.twist.rank:
            raise ValidationError("EndField rank does not match its twist pattern")
        if self.form_type not in _FORM_TYPES:
            raise ValidationError(f"unknown form type '{self.form_type}'")
        self.values = v

    @property
    def rank(self) -> int:
        return self.values.shape[2]

    def copy(self) -> "EndField":
        return EndField(self.values.copy(), self.twist, self.form_type)


def zero_end(geometry: TorusGeometry, twist: TwistPattern, form_type: str = FUNCTION) -> EndField:
    n, r = geometry.n_grid, twist.rank
    return EndField(np.zeros((n, n, r, r), dtype=complex), twist, form_type)


def constant_end(
    geometry: TorusGeometry, matrix, twist: TwistPattern, form_type: str = FUNCTION
) -> EndField:
    m = np.asarray(matrix, dtype=complex)
    n = geometry.n_grid
    vals = np.broadcast_to(m, (n, n) + m.shape).copy()
    return EndField(vals, twist, form_type)


@dataclass(frozen=True)
class BlockSpec:
    """One block L_flux tensor C^multiplicity of the underlying bundle."""

    multiplicity: int
    flux: int

    def __post_init__(self):
        if self.multiplicity < 1:
            raise ValidationError("block multiplicity must be at least 1")


def _row_fluxes(blocks) -> np.ndarray:
    out = []
    for b in blocks:
        out.extend([b.flux] * b.multiplicity)
    return np.asarray(out, dtype=int)


@dataclass
class HiggsBundleConfig:
    """Validated Higgs bundle data; immutable after construction."""

    geometry: TorusGeometry
    blocks: tuple
    a: EndField
    phi: EndField
    label: str = ""
    integrability_tol: float = 1e-6
    verdict: catalog.Verdict | None = None
    descriptor: catalog.PresetDescriptor | None = None

    def __post_init__(self):
        self.blocks = tuple(self.blocks)
        fluxes = _row_fluxes(self.blocks)
        r = len(fluxes)
        twist = TwistPattern.from_fluxes(fluxes)
        for f, want in ((self.a, DZBAR), (self.phi, DZ)):
            if f.rank != r:
                raise ValidationError("field rank does not match block structure")
            if not np.array_equal(f.twist.entry_flux, twist.entry_flux):
                raise ValidationError("field twist does not match block layout")
            if f.form_type != want:
                raise ValidationError(f"expected a {want}-coefficient field")
            if f.values.shape[0] != self.geometry.n_grid:
                raise ValidationError("field grid does not match geometry")
        self._fluxes = fluxes
        self._twist = twist
        self._rank = r
        self._degree = int(fluxes.sum())
        # background mean curvature: constant 2 pi d / vol per flux-d row
        self._k_bg = np.diag(2 * np.pi * fluxes / self.geometry.vol).astype(complex)
        self._a_dag = np.conjugate(np.swapaxes(self.a.values, -1, -2))
        self._phi_dag = np.conjugate(np.swapaxes(self.phi.values, -1, -2))
        self._d_a = self.geometry.diff_end(self.a.values, DIRECTION_D, twist)
        res = integrability_residual(self)
        if res > self.integrability_tol:
            raise ValidationError(
                f"integrability residual {res:.3e} exceeds tolerance "
                f"{self.integrability_tol:.1e}"
            )
        self.integrability = res

    @property
    def rank(self) -> int:
        return self._rank

    @property
    def degree(self) -> int:
        return self._degree

    @property
    def slope(self) -> float:
        return self._degree / self._rank

    @property
    def hym_constant(self) -> float:
        """c = 2 pi mu / vol, fixed by the topology and the Kahler class."""
        return 2 * np.pi * self.slope / self.geometry.vol

    @property
    def fluxes(self) -> np.ndarray:
        return self._fluxes

    @property
    def twist(self) -> TwistPattern:
        return self._twist

    @property
    def k_bg(self) -> np.ndarray:
        return self._k_bg

    def identity_endo(self) -> np.ndarray:
        n, r = self.geometry.n_grid, self._rank
        out = np.zeros((n, n, r, r), dtype=complex)
        out[..., range(r), range(r)] = 1.0
        return out

    def with_label(self, label: str) -> "HiggsBundleConfig":
        return replace(self, label=label)


def build_config(
    geometry: TorusGeometry,
    blocks,
    a_field: EndField,
    phi_field: EndField,
    label: str = "",
    integrability_tol: float = 1e-6,
) -> HiggsBundleConfig:
    """Validated configuration; rejects twist mismatches and non-holomorphic phi."""
    return HiggsBundleConfig(
        geometry, tuple(blocks), a_field, phi_field, label, integrability_tol
    )


def integrability_residual(cfg: HiggsBundleConfig) -> float:
    """Sup over cells of the Frobenius norm of dbar Phi + [a, Phi]."""
    dphi = cfg.geometry.diff_end(cfg.phi.values, DIRECTION_DBAR, cfg.twist)
    res = dphi + cfg.a.values @ cfg.phi.values - cfg.phi.values @ cfg.a.values
    frob = np.sqrt(np.sum(np.abs(res) ** 2, axis=(-2, -1)))
    return float(frob.max())


# -- presets -----------------------------------------------------------------


def preset(geometry: TorusGeometry, kind: str, **params) -> HiggsBundleConfig:
    """Named configurations with analytic stability verdicts attached.

    kinds: "line" (d, optional constant phi), "nilpotent", "dsum" (d1, d2),
    "extension" (d1, d2, eps).
    """
    if kind == "line":
        d = int(params.pop("d"))
        phi0 = complex(params.pop("phi", 0.0))
        _reject_extra(kind, params)
        blocks = (BlockSpec(1, d),)
        twist = TwistPattern.from_fluxes([d])
        a = zero_end(geometry, twist, DZBAR)
        phi = constant_end(geometry, [[phi0]], twist, DZ)
        desc = catalog.PresetDescriptor("line", {"d": d}, geometry.vol)
        cfg = HiggsBundleConfig(
            geometry, blocks, a, phi, label=f"line({d})",
            verdict=catalog.expected_behavior(desc), descriptor=desc,
        )
        return cfg
    if kind == "nilpotent":
        _reject_extra(kind, params)
        blocks = (BlockSpec(2, 0),)
        twist = TwistPattern.zero(2)
        a = zero_end(geometry, twist, DZBAR)
        phi = constant_end(geometry, [[0.0, 1.0], [0.0, 0.0]], twist, DZ)
        desc = catalog.PresetDescriptor("nilpotent", {}, geometry.vol)
        return HiggsBundleConfig(
            geometry, blocks, a, phi, label="nilpotent",
            verdict=catalog.expected_behavior(desc), descriptor=desc,
        )
    if kind == "dsum":
        d1, d2 = int(params.pop("d1")), int(params.pop("d2"))
        _reject_extra(kind, params)
        cfg = direct_sum(
            preset(geometry, "line", d=d1), preset(geometry, "line", d=d2)
        )
        desc = catalog.PresetDescriptor("dsum", {"d1": d1, "d2": d2}, geometry.vol)
        return replace(
            cfg,
            label=f"dsum(line({d1}),line({d2}))",
            verdict=catalog.expected_behavior(desc),
            descriptor=desc,
        )
    if kind == "extension":
        d1, d2 = int(params.pop("d1")), int(params.pop("d2"))
        eps = complex(params.pop("eps"))
        _reject_extra(kind, params)
        hom_flux = d1 - d2
        if hom_flux > 0:
            raise ValidationError(
                f"extension({d1},{d2}) needs nonpositive Hom-twist flux, got {hom_flux}"
            )
        blocks = (BlockSpec(1, d1), BlockSpec(1, d2))
        twist = TwistPattern.from_fluxes([d1, d2])
        b = geometry.harmonic_forms(hom_flux, 1)[0]
        a = zero_end(geometry, twist, DZBAR)
        a.values[:, :, 0, 1] = eps * b
        phi = zero_end(geometry, twist, DZ)
        desc = catalog.PresetDescriptor(
            "extension", {"d1": d1, "d2": d2, "eps": abs(eps)}, geometry.vol
        )
        return HiggsBundleConfig(
            geometry, blocks, a, phi, label=f"extension({d1},{d2},{eps})",
            verdict=catalog.expected_behavior(desc), descriptor=desc,
        )
    raise ValidationError(f"unknown preset kind '{kind}'")


def _reject_extra(kind, params):
    if params:
        raise ValidationError(f"unexpected parameters for preset '{kind}': {sorted(params)}")


# -- constructions -------------------------------------------------------------


def direct_sum(cfg1: HiggsBundleConfig, cfg2: HiggsBundleConfig) -> HiggsBundleConfig:
    """Whitney sum: block-diagonal dbar-perturbation and Higgs field."""
    _same_geometry(cfg1, cfg2)
    geometry = cfg1.geometry
    blocks = cfg1.blocks + cfg2.blocks
    fluxes = _row_fluxes(blocks)
    twist = TwistPattern.from_fluxes(fluxes)
    n = geometry.n_grid
    r1, r2 = cfg1.rank, cfg2.rank
    r = r1 + r2

    def embed(m1, m2):
        out = np.zeros((n, n, r, r), dtype=complex)
        out[:, :, :r1, :r1] = m1
        out[:, :, r1:, r1:] = m2
        return out

    a = EndField(embed(cfg1.a.values, cfg2.a.values), twist, DZBAR)
    phi = EndField(embed(cfg1.phi.values, cfg2.phi.values), twist, DZ)
    return HiggsBundleConfig(
        geometry, blocks, a, phi, label=f"{cfg1.label} (+) {cfg2.label}"
    )


def tensor_product(cfg1: HiggsBundleConfig, cfg2: HiggsBundleConfig) -> HiggsBundleConfig:
    """Tensor product with phi = phi1 (x) I2 + I1 (x) phi2."""
    _same_geometry(cfg1, cfg2)
    geometry = cfg1.geometry
    n = geometry.n_grid
    r1, r2 = cfg1.rank, cfg2.rank
    fluxes = (cfg1.fluxes[:, None] + cfg2.fluxes[None, :]).reshape(-1)
    blocks = _blocks_from_fluxes(fluxes)
    twist = TwistPattern.from_fluxes(fluxes)

    def kron(m1, m2):
        out = np.einsum("xyij,xykl->xyikjl", m1, m2)
        return out.reshape(n, n, r1 * r2, r1 * r2)

    eye1 = np.broadcast_to(np.eye(r1, dtype=complex), (n, n, r1, r1))
    eye2 = np.broadcast_to(np.eye(r2, dtype=complex), (n, n, r2, r2))
    a = EndField(kron(cfg1.a.values, eye2) + kron(eye1, cfg2.a.values), twist, DZBAR)
    phi = EndField(kron(cfg1.phi.values, eye2) + kron(eye1, cfg2.phi.values), twist, DZ)
    return HiggsBundleConfig(
        geometry, blocks, a, phi, label=f"{cfg1.label} (x) {cfg2.label}"
    )


def dual_bundle(cfg: HiggsBundleConfig) -> HiggsBundleConfig:
    """Dual Higgs bundle in the dual frame: fluxes negate, a -> -a^T, phi -> phi^T."""
    blocks = tuple(BlockSpec(b.multiplicity, -b.flux) for b in cfg.blocks)
    fluxes = _row_fluxes(blocks)
    twist = TwistPattern.from_fluxes(fluxes)
    a = EndField(-np.swapaxes(cfg.a.values, -1, -2), twist, DZBAR)
    phi = EndField(np.swapaxes(cfg.phi.values, -1, -2), twist, DZ)
    return HiggsBundleConfig(
        cfg.geometry, blocks, a, phi, label=f"dual({cfg.label})"
    )


def _same_geometry(cfg1, cfg2):
    if cfg1.geometry is not cfg2.geometry:
        g1, g2 = cfg1.geometry, cfg2.geometry
        if (g1.tau, g1.lam, g1.n_grid) != (g2.tau, g2.lam, g2.n_grid):
            raise ValidationError("configurations live on different geometries")


def _blocks_from_fluxes(fluxes) -> tuple:
    blocks = []
    for f in fluxes:
        if blocks and blocks[-1].flux == f:
            blocks[-1] = BlockSpec(blocks[-1].multiplicity + 1, f)
        else:
            blocks.append(BlockSpec(1, int(f)))
    return tuple(blocks)
