"""Ground-truth stability verdicts for the preset families.

The verdicts are hand-derived analytic facts shipped as data, not a general
stability decision procedure: the flow experiments need labeled instances on
both sides of the semistable/unstable divide, and the catalog supplies them
with their expected flow behavior.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

STABLE = "stable"
STRICTLY_SEMISTABLE = "strictly_semistable"
POLYSTABLE = "polystable"
UNSTABLE = "unstable"

CONVERGENT_HYM = "CONVERGENT_HYM"
APPROXIMATE_ONLY = "APPROXIMATE_ONLY"
OBSTRUCTED = "OBSTRUCTED"
INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True)
class Verdict:
    stability: str
    expected_flow: str
    obstruction_level: float | None = None
    justification: str = ""

    def __post_init__(self):
        consistent = {
            STABLE: CONVERGENT_HYM,
            UNSTABLE: OBSTRUCTED,
        }
        want = consistent.get(self.stability)
        if want is not None and self.expected_flow != want:
            raise ValidationError(
                f"{self.stability} forces expected_flow {want}, got {self.expected_flow}"
            )
        if self.stability == STRICTLY_SEMISTABLE and self.expected_flow not in (
            APPROXIMATE_ONLY,
        ):
            raise ValidationError(
                "strictly semistable (non-polystable) forces APPROXIMATE_ONLY"
            )


@dataclass(frozen=True)
class PresetDescriptor:
    """What the catalog needs to know about a preset instance."""

    kind: str
    params: dict = field(default_factory=dict)
    vol: float = 1.0

    def key(self) -> str:
        inner = ",".join(f"{k}={self.params[k]}" for k in sorted(self.params))
        return f"{self.kind}({inner})"


def verdict_constant(phi: np.ndarray, r: int) -> Verdict:
    """Verdict for a constant Higgs field on the trivial rank-r bundle.

    Every constant endomorphism has an invariant line, hence a degree-0 Higgs
    sub-line-bundle with slope equal to mu = 0: never stable.  No subsheaf of
    the trivial bundle has positive degree, so the bundle is always
    semistable.  When [phi, phi^dagger] = 0 the identity metric is already
    Hermitian-Yang-Mills with c = 0 (polystable); otherwise the bundle is
    strictly semistable and only approximate structures exist.
    """
    phi = np.asarray(phi, dtype=complex)
    if phi.shape != (r, r):
        raise ValidationError(f"expected a constant {r}x{r} matrix")
    comm = phi @ phi.conj().T - phi.conj().T @ phi
    if np.max(np.abs(comm)) <= 1e-12 * max(1.0, np.max(np.abs(phi)) ** 2):
        return Verdict(
            POLYSTABLE,
            CONVERGENT_HYM,
            justification="normal constant Higgs field: [phi, phi*] = 0, so h = I "
            "is Hermitian-Yang-Mills with c = 0",
        )
    return Verdict(
        STRICTLY_SEMISTABLE,
        APPROXIMATE_ONLY,
        justification="non-normal constant Higgs field: an invariant line gives a "
        "slope-0 Higgs subsheaf (never stable), no positive-degree subsheaf exists "
        "(semistable); the flow contracts [phi, phi*] like 1/t without reaching 0",
    )


def expected_behavior(descriptor: PresetDescriptor) -> Verdict:
    """Analytic verdict for a registered preset family."""
    kind = descriptor.kind
    p = descriptor.params
    vol = descriptor.vol
    if kind == "line":
        return Verdict(
            POLYSTABLE,
            CONVERGENT_HYM,
            justification="rank 1: every metric is weak Hermitian-Yang-Mills; the "
            "Hodge normalization reaches the constant-curvature metric",
        )
    if kind == "nilpotent":
        return verdict_constant(np.array([[0.0, 1.0], [0.0, 0.0]]), 2)
    if kind == "dsum":
        d1, d2 = int(p["d1"]), int(p["d2"])
        if d1 == d2:
            return Verdict(
                POLYSTABLE,
                CONVERGENT_HYM,
                justification="direct sum of line bundles of equal slope; "
                "blockwise flows converge blockwise",
            )
        mu = 0.5 * (d1 + d2)
        level = 2 * np.pi * max(abs(d1 - mu), abs(d2 - mu)) / vol
        return Verdict(
            UNSTABLE,
            OBSTRUCTED,
            obstruction_level=level,
            justification="the larger-degree summand destabilizes; per-block flows "
            "settle at factors 2 pi d_i / vol, leaving a pointwise gap to c",
        )
    if kind == "extension":
        d1, d2, eps = int(p["d1"]), int(p["d2"]), float(p["eps"])
        if eps == 0.0:
            return expected_behavior(
                PresetDescriptor("dsum", {"d1": d1, "d2": d2}, vol)
            )
        if d2 == d1 + 1:
            return Verdict(
                STABLE,
                CONVERGENT_HYM,
                justification="nonsplit rank-2 bundle of odd degree on an elliptic "
                "curve is stable: sub-line bundles have degree at most d1 < mu",
            )
        if d1 == d2:
            return Verdict(
                STRICTLY_SEMISTABLE,
                APPROXIMATE_ONLY,
                justification="nonsplit self-extension (Atiyah-type): the sub-line "
                "bundle has slope equal to mu, and no Hermitian-Yang-Mills metric "
                "exists on a nonsplit strictly semistable bundle",
            )
        raise ValidationError(f"no catalog entry for extension({d1},{d2},eps!=0)")
    raise ValidationError(f"unknown preset kind '{kind}'")


def registry() -> list[PresetDescriptor]:
    """Preset instances exercised by the acceptance experiments."""
    out = [PresetDescriptor("line", {"d": d}) for d in range(-2, 3)]
    out += [
        PresetDescriptor("nilpotent", {}),
        PresetDescriptor("dsum", {"d1": 1, "d2": -1}),
        PresetDescriptor("extension", {"d1": 0, "d2": 1, "eps": 1.0}),
        PresetDescriptor("extension", {"d1": 0, "d2": 0, "eps": 1.0}),
    ]
    return out
