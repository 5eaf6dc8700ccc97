import numpy as np
import pytest

from higgsflow.bundle import (
    DZ,
    DZBAR,
    BlockSpec,
    build_config,
    constant_end,
    direct_sum,
    dual_bundle,
    integrability_residual,
    preset,
    tensor_product,
    zero_end,
)
from higgsflow.errors import ValidationError
from higgsflow.geometry import TwistPattern
from higgsflow.metric import degree_slope_c, HermitianMetric


def test_trivial_rank2_configs(g32):
    tw = TwistPattern.zero(2)
    cfg = build_config(
        g32, (BlockSpec(2, 0),), zero_end(g32, tw, DZBAR), zero_end(g32, tw, DZ)
    )
    assert cfg.rank == 2 and cfg.degree == 0
    phi = constant_end(g32, [[0, 1], [0, 0]], tw, DZ)
    cfg = build_config(g32, (BlockSpec(2, 0),), zero_end(g32, tw, DZBAR), phi)
    assert cfg.integrability <= 1e-14


def test_integrability_residual_values(g32):
    tw = TwistPattern.zero(2)
    a = constant_end(g32, [[0, 0], [1, 0]], tw, DZBAR)
    phi = constant_end(g32, [[0, 1], [0, 0]], tw, DZ)
    # commutator [a, phi] = E22 - E11, Frobenius sqrt(2)
    with pytest.raises(ValidationError):
        build_config(g32, (BlockSpec(2, 0),), a, phi)
    cfg_ok = build_config(
        g32, (BlockSpec(2, 0),), a, phi, integrability_tol=2.0
    )
    assert integrability_residual(cfg_ok) == pytest.approx(np.sqrt(2))
    # commuting constants pass
    a2 = constant_end(g32, [[0, 1], [0, 0]], tw, DZBAR)
    cfg = build_config(g32, (BlockSpec(2, 0),), a2, phi)
    assert cfg.integrability <= 1e-14


def test_nonholomorphic_phi_rejected(g32):
    tw = TwistPattern.zero(2)
    phi = constant_end(g32, [[0, 1], [0, 0]], tw, DZ)
    phi.values[:, :, 0, 1] = np.exp(np.cos(2 * np.pi * g32.x))
    with pytest.raises(ValidationError):
        build_config(g32, (BlockSpec(2, 0),), zero_end(g32, tw, DZBAR), phi)


def test_twist_mismatch_rejected(g32):
    tw_wrong = TwistPattern.from_fluxes([0, 1])
    a = zero_end(g32, tw_wrong, DZBAR)
    phi = zero_end(g32, tw_wrong, DZ)
    with pytest.raises(ValidationError):
        build_config(g32, (BlockSpec(2, 0),), a, phi)


# -- presets ----------------------------------------------------------------------


def test_preset_nilpotent(nilpotent):
    assert nilpotent.rank == 2
    assert nilpotent.degree == 0
    assert np.allclose(nilpotent.phi.values[0, 0], [[0, 1], [0, 0]])
    assert np.max(np.abs(nilpotent.a.values)) == 0.0
    assert nilpotent.verdict.stability == "strictly_semistable"


def test_preset_dsum(dsum11):
    assert dsum11.rank == 2
    assert dsum11.degree == 0
    assert tuple(dsum11.fluxes) == (1, -1)
    assert dsum11.verdict.stability == "unstable"


def test_preset_extension(extension01, g32):
    assert extension01.rank == 2
    assert extension01.degree == 1
    assert extension01.integrability <= 1e-6
    b = extension01.a.values[:, :, 0, 1]
    assert g32.integrate(np.abs(b) ** 2) == pytest.approx(1.0, rel=1e-10)
    assert extension01.verdict.stability == "stable"


def test_preset_extension_eps0_equals_dsum(g32):
    ext0 = preset(g32, "extension", d1=0, d2=1, eps=0.0)
    ds = preset(g32, "dsum", d1=0, d2=1)
    assert np.array_equal(ext0.a.values, ds.a.values)
    assert np.array_equal(ext0.phi.values, ds.phi.values)
    assert [(b.multiplicity, b.flux) for b in ext0.blocks] == [
        (b.multiplicity, b.flux) for b in ds.blocks
    ]


def test_preset_extension_positive_hom_flux_rejected(g32):
    with pytest.raises(ValidationError):
        preset(g32, "extension", d1=1, d2=0, eps=1.0)


def test_preset_unknown_kind(g32):
    with pytest.raises(ValidationError):
        preset(g32, "spectral")


# -- constructions -------------------------------------------------------------------


def test_tensor_product_line_bundles(g32):
    t = tensor_product(preset(g32, "line", d=1), preset(g32, "line", d=-1))
    assert t.rank == 1 and t.degree == 0


def test_tensor_degree_formula(g32):
    for d1, d2 in [(1, -1), (2, 1), (0, 2)]:
        c1, c2 = preset(g32, "line", d=d1), preset(g32, "line", d=d2)
        t = tensor_product(c1, c2)
        assert t.degree == c2.rank * c1.degree + c1.rank * c2.degree
        deg, _, _ = degree_slope_c(t, HermitianMetric.identity(t))
        assert deg == pytest.approx(t.degree, abs=1e-8)


def test_tensor_with_trivial_line_keeps_phi(g32, nilpotent):
    t = tensor_product(nilpotent, preset(g32, "line", d=0))
    assert t.rank == 2
    assert np.allclose(t.phi.values, nilpotent.phi.values)


def test_dual_bundle(g32, extension01):
    d = dual_bundle(preset(g32, "line", d=1))
    assert d.degree == -1
    dd = dual_bundle(dual_bundle(extension01))
    assert np.max(np.abs(dd.a.values - extension01.a.values)) < 1e-14
    assert np.max(np.abs(dd.phi.values - extension01.phi.values)) < 1e-14
    assert dual_bundle(extension01).degree == -1


def test_direct_sum_degree_additive(g32):
    s = direct_sum(preset(g32, "line", d=2), preset(g32, "line", d=-1))
    assert s.degree == 1 and s.rank == 2


def test_degree_immutable(nilpotent):
    with pytest.raises(AttributeError):
        nilpotent.degree = 5
