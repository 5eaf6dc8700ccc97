"""Discretized flat torus X = C/(Z + tau Z) with background U(1) flux.

Grid and conventions
--------------------
The fundamental domain is parametrized by (x, y) in [0,1)^2 with z = x + tau y
and Kahler form omega = (i lambda / 2) dz wedge dzbar, so vol X = lambda Im tau.
Fields are sampled at cell centers x_j = (j+1/2)/N, y_k = (k+1/2)/N and indexed
periodically, values[j, k] with j the x index.

Derivatives are centered second-order differences.  A field of flux t is a
section of the degree-t line bundle in a single global frame; its differences
pick up the Landau-gauge link phases

    Uy(j,k) = exp(-2 pi i t j / N^2)           (all y links)
    Ux(j,k) = 1, except exp(2 pi i t k / N) on the x wrap column,

which give every plaquette the same holonomy exp(-2 pi i t / N^2), i.e. exactly
constant background curvature with total flux t.  The sign is oriented so that
positive flux carries near-holomorphic theta-like sections (dbar kernel) and
negative flux carries harmonic (0,1)-forms, matching degree deg = t.

The contraction of a (1,1)-form stored by its coefficient f (meaning the form
(i/2) f dz wedge dzbar in the frame above) is f / lambda, normalized so the
contraction of omega is 1.  The scalar Laplacian is box0 = -(1/lambda)
dbar(d(.)), which has nonnegative spectrum and constants in its kernel.  On
the discrete torus, centered differences add three checkerboard modes to that
kernel; the Poisson solver works orthogonally to all four modes and certifies
its residual.

Centered first-order stencils double the low-lying spectrum of the twisted
Dolbeault operators: each physical near-zero mode has a lattice partner
concentrated at the Brillouin-zone corners.  The Dolbeault eigensolver
separates the two species by their high-frequency spectral mass and returns
only the smooth physical modes, certifying both the eigenvalue bound and the
separation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverError, ValidationError

DIRECTION_D = "d"
DIRECTION_DBAR = "dbar"

_DIRECTION_ALIASES = {
    "d": DIRECTION_D,
    "holomorphic": DIRECTION_D,
    "dbar": DIRECTION_DBAR,
    "antiholomorphic": DIRECTION_DBAR,
}


@dataclass(frozen=True)
class TwistPattern:
    """Per-entry background flux of an r x r matrix field.

    entry_flux[i, j] = flux(i) - flux(j) where flux(k) is the U(1) flux of the
    block owning row/column k.  Antisymmetric with zero diagonal.
    """

    entry_flux: np.ndarray

    def __post_init__(self):
        ef = np.asarray(self.entry_flux, dtype=int)
        if ef.ndim != 2 or ef.shape[0] != ef.shape[1]:
            raise ValidationError("entry_flux must be a square integer matrix")
        if np.any(np.diagonal(ef) != 0):
            raise ValidationError("twist pattern must vanish on the diagonal")
        if np.any(ef != -ef.T):
            raise ValidationError("twist pattern must be antisymmetric")
        object.__setattr__(self, "entry_flux", ef)

    @classmethod
    def from_fluxes(cls, fluxes) -> "TwistPattern":
        f = np.asarray(fluxes, dtype=int)
        return cls(f[:, None] - f[None, :])

    @classmethod
    def zero(cls, rank: int) -> "TwistPattern":
        return cls(np.zeros((rank, rank), dtype=int))

    @property
    def rank(self) -> int:
        return self.entry_flux.shape[0]

    def transpose(self) -> "TwistPattern":
        return TwistPattern(self.entry_flux.T)

    def key(self) -> bytes:
        return self.entry_flux.tobytes()


@dataclass
class TorusGeometry:
    """Flat torus with Kahler coefficient lambda and an N x N periodic grid."""

    tau: complex
    lam: float
    n_grid: int
    vol: float = field(init=False)
    cell_area: float = field(init=False)

    def __post_init__(self):
        if self.tau.imag <= 0:
            raise ValidationError("Im tau must be positive")
        if self.lam <= 0:
            raise ValidationError("Kahler coefficient lambda must be positive")
        n = int(self.n_grid)
        if n < 8 or n % 2 != 0:
            raise ValidationError("n_grid must be even and at least 8")
        self.n_grid = n
        self.vol = float(self.lam * self.tau.imag)
        self.cell_area = self.vol / n**2
        idx = (np.arange(n) + 0.5) / n
        self.x = idx[:, None] * np.ones((1, n))
        self.y = np.ones((n, 1)) * idx[None, :]
        im = self.tau.imag
        # Wirtinger coefficients: d/dz = cx Dx + cy Dy, d/dzbar the conjugate.
        self._cx_d = 1j * np.conjugate(self.tau) / (2 * im)
        self._cy_d = -1j / (2 * im)
        self._cx_dbar = -1j * self.tau / (2 * im)
        self._cy_dbar = 1j / (2 * im)
        self._links: dict[int, tuple] = {}
        self._end_phases: dict[bytes, tuple] = {}

    # -- link phases --------------------------------------------------------

    def links(self, flux: int):
        """(Ux, Ux_back, Uy, Uy_back) transport phases for the given flux.

        Ux[j,k] transports from cell (j+1,k) into (j,k); the *_back arrays are
        the conjugated, rolled phases for the opposite hop.
        """
        flux = int(flux)
        if flux not in self._links:
            n = self.n_grid
            j = np.arange(n)[:, None] * np.ones((1, n))
            uy = np.exp(-2j * np.pi * flux * j / n**2)
            ux = np.ones((n, n), dtype=complex)
            ux[n - 1, :] = np.exp(2j * np.pi * flux * np.arange(n) / n)
            ux_back = np.conjugate(np.roll(ux, 1, axis=0))
            uy_back = np.conjugate(np.roll(uy, 1, axis=1))
            self._links[flux] = (ux, ux_back, uy, uy_back)
        return self._links[flux]

    def plaquette_holonomy(self, flux: int) -> np.ndarray:
        """Holonomy around each grid cell; constant exp(-2 pi i flux / N^2)."""
        ux, _, uy, _ = self.links(flux)
        return (
            ux
            * np.roll(uy, -1, axis=0)
            * np.conjugate(np.roll(ux, -1, axis=1))
            * np.conjugate(uy)
        )

    def _end_phase_tensors(self, twist: TwistPattern):
        key = twist.key()
        if key not in self._end_phases:
            n, r = self.n_grid, twist.rank
            px = np.empty((n, n, r, r), dtype=complex)
            pxb = np.empty_like(px)
            py = np.empty_like(px)
            pyb = np.empty_like(px)
            for i in range(r):
                for l in range(r):
                    ux, ux_back, uy, uy_back = self.links(int(twist.entry_flux[i, l]))
                    px[:, :, i, l] = ux
                    pxb[:, :, i, l] = ux_back
                    py[:, :, i, l] = uy
                    pyb[:, :, i, l] = uy_back
            trivial = bool(np.all(twist.entry_flux == 0))
            self._end_phases[key] = (px, pxb, py, pyb, trivial)
        return self._end_phases[key]

    # -- twisted centered differences ---------------------------------------

    def _dx_dy_scalar(self, f: np.ndarray, flux: int):
        half_n = 0.5 * self.n_grid
        fp = np.roll(f, -1, axis=0)
        fm = np.roll(f, 1, axis=0)
        gp = np.roll(f, -1, axis=1)
        gm = np.roll(f, 1, axis=1)
        if flux == 0:
            dx = half_n * (fp - fm)
            dy = half_n * (gp - gm)
        else:
            ux, ux_back, uy, uy_back = self.links(flux)
            dx = half_n * (ux * fp - ux_back * fm)
            dy = half_n * (uy * gp - uy_back * gm)
        return dx, dy

    def _dx_dy_end(self, f: np.ndarray, twist: TwistPattern):
        half_n = 0.5 * self.n_grid
        px, pxb, py, pyb, trivial = self._end_phase_tensors(twist)
        fp = np.roll(f, -1, axis=0)
        fm = np.roll(f, 1, axis=0)
        gp = np.roll(f, -1, axis=1)
        gm = np.roll(f, 1, axis=1)
        if trivial:
            dx = half_n * (fp - fm)
            dy = half_n * (gp - gm)
        else:
            dx = half_n * (px * fp - pxb * fm)
            dy = half_n * (py * gp - pyb * gm)
        return dx, dy

    def diff_scalar(self, f: np.ndarray, direction: str, flux: int = 0) -> np.ndarray:
        """Twisted Wirtinger derivative of an N x N scalar field."""
        f = np.asarray(f)
        if f.shape != (self.n_grid, self.n_grid):
            raise ValidationError(
                f"scalar field shape {f.shape} does not match grid {self.n_grid}"
            )
        direction = _DIRECTION_ALIASES.get(direction)
        if direction is None:
            raise ValidationError("direction must be 'd' or 'dbar'")
        dx, dy = self._dx_dy_scalar(f.astype(complex, copy=False), int(flux))
        if direction == DIRECTION_D:
            return self._cx_d * dx + self._cy_d * dy
        return self._cx_dbar * dx + self._cy_dbar * dy

    def diff_section(self, s: np.ndarray, direction: str, fluxes) -> np.ndarray:
        """Twisted Wirtinger derivative of a column of sections (N, N, r)."""
        s = np.asarray(s, dtype=complex)
        fluxes = np.asarray(fluxes, dtype=int)
        n = self.n_grid
        if s.shape != (n, n, len(fluxes)):
            raise ValidationError("section shape does not match grid/fluxes")
        out = np.empty_like(s)
        for i, f in enumerate(fluxes):
            out[:, :, i] = self.diff_scalar(s[:, :, i], direction, int(f))
        return out

    def diff_end(self, f: np.ndarray, direction: str, twist: TwistPattern) -> np.ndarray:
        """Twisted Wirtinger derivative of an N x N field of r x r matrices."""
        f = np.asarray(f)
        n, r = self.n_grid, twist.rank
        if f.shape != (n, n, r, r):
            raise ValidationError(
                f"matrix field shape {f.shape} does not match grid/rank ({n}, {r})"
            )
        direction = _DIRECTION_ALIASES.get(direction)
        if direction is None:
            raise ValidationError("direction must be 'd' or 'dbar'")
        dx, dy = self._dx_dy_end(f.astype(complex, copy=False), twist)
        if direction == DIRECTION_D:
            return self._cx_d * dx + self._cy_d * dy
        return self._cx_dbar * dx + self._cy_dbar * dy

    # -- quadrature and contraction -----------------------------------------

    def integrate(self, density: np.ndarray):
        """Integral against omega: cell_area times the sample sum."""
        total = self.cell_area * np.sum(np.asarray(density), axis=(0, 1))
        if np.iscomplexobj(density):
            return total
        return total.real

    def lambda_contract(self, form_coeff: np.ndarray) -> np.ndarray:
        """Contraction of a (1,1)-coefficient f, normalized so omega maps to 1."""
        return np.asarray(form_coeff) / self.lam

    # -- scalar Laplacian and Poisson solver ---------------------------------

    def box0(self, f: np.ndarray) -> np.ndarray:
        """Scalar Laplacian -(1/lambda) dbar d, nonnegative with constant kernel."""
        return -self.lambda_contract(
            self.diff_scalar(self.diff_scalar(f, DIRECTION_D), DIRECTION_DBAR)
        )

    def _box0_symbol(self) -> np.ndarray:
        n = self.n_grid
        freq = np.fft.fftfreq(n, d=1.0 / n)
        sm = np.sin(2 * np.pi * freq / n)[:, None]
        sn = np.sin(2 * np.pi * freq / n)[None, :]
        quad = (abs(self.tau) ** 2) * sm**2 - 2 * self.tau.real * sm * sn + sn**2
        return n**2 * quad / (4 * self.lam * self.tau.imag ** 2)

    def poisson_solve(self, rhs: np.ndarray) -> np.ndarray:
        """Mean-zero solution u of box0 u = rhs.

        Spectral inversion of the discrete operator; exact on its range.  The
        right-hand side must integrate to zero against omega (within
        1e-10 * sup|rhs|) and carry no content on the discrete kernel modes,
        otherwise the residual certificate fails.
        """
        rhs = np.asarray(rhs)
        if rhs.shape != (self.n_grid, self.n_grid):
            raise ValidationError("rhs shape does not match grid")
        was_real = not np.iscomplexobj(rhs)
        scale = float(np.max(np.abs(rhs)))
        if scale == 0.0:
            return np.zeros_like(rhs, dtype=float if was_real else complex)
        mean = self.integrate(rhs.astype(complex)) / self.vol
        if abs(mean) > 1e-10 * scale:
            raise ValidationError(
                f"poisson_solve requires a mean-zero rhs (mean = {mean:.3e})"
            )
        sym = self._box0_symbol()
        fh = np.fft.fft2(rhs)
        kernel = sym <= sym.max() * 1e-14
        fh = np.where(kernel, 0.0, fh)
        uh = np.zeros_like(fh)
        np.divide(fh, sym, out=uh, where=~kernel)
        u = np.fft.ifft2(uh)
        if was_real:
            u = u.real
        residual = float(np.max(np.abs(self.box0(u) - rhs)))
        if residual > 1e-10 * scale:
            raise SolverError(
                f"poisson residual {residual:.3e} exceeds 1e-10 * sup|rhs|; "
                "rhs has content on the discrete kernel modes"
            )
        return u

    # -- twisted Dolbeault eigenmodes -----------------------------------------

    def _operator_matrix(self, flux: int, direction: str) -> sp.csr_matrix:
        """Sparse matrix of a twisted centered Wirtinger derivative on scalars."""
        n = self.n_grid
        ux, ux_back, uy, uy_back = self.links(flux)
        half_n = 0.5 * n
        if direction == DIRECTION_D:
            cx, cy = self._cx_d, self._cy_d
        else:
            cx, cy = self._cx_dbar, self._cy_dbar
        idx = np.arange(n * n).reshape(n, n)
        rows, cols, vals = [], [], []

        def add(target, coeff):
            rows.append(idx.ravel())
            cols.append(target.ravel())
            vals.append(coeff.ravel())

        add(np.roll(idx, -1, axis=0), cx * half_n * ux)
        add(np.roll(idx, 1, axis=0), -cx * half_n * ux_back)
        add(np.roll(idx, -1, axis=1), cy * half_n * uy)
        add(np.roll(idx, 1, axis=1), -cy * half_n * uy_back)
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n * n, n * n),
        )

    def _high_mode_mass(self, vecs: np.ndarray) -> np.ndarray:
        """Fraction of spectral mass above |m| or |n| = N/4, per column."""
        n = self.n_grid
        freq = np.fft.fftfreq(n, d=1.0 / n)
        hi = ((np.abs(freq)[:, None] > n / 4) | (np.abs(freq)[None, :] > n / 4)).ravel()
        w = np.fft.fft2(vecs.T.reshape(-1, n, n)).reshape(vecs.shape[1], -1)
        total = np.einsum("ij,ij->i", w, np.conjugate(w)).real
        high = np.einsum("ij,ij->i", w[:, hi], np.conjugate(w[:, hi])).real
        return high / total

    def dolbeault_modes(self, flux: int, direction: str, count: int):
        """Smooth near-kernel modes of the twisted Dolbeault Laplacian.

        Eigensolves op^dagger op for the centered twisted derivative in the
        given direction and keeps only the smooth physical modes; each
        physical mode has a high-frequency lattice partner (spectral doubling
        of the centered stencil) which is filtered out by its spectral mass
        near the Brillouin-zone corners.  Returns (eigenvalues, fields) with
        fields orthonormal for the omega-weighted L2 product; certifies that
        kept eigenvalues are at most 1e-3 of the first excluded level and that
        the smooth/doubler separation is unambiguous.
        """
        flux = int(flux)
        count = int(count)
        n = self.n_grid
        m = self._operator_matrix(flux, _DIRECTION_ALIASES[direction])
        lap = (m.conjugate().T @ m).tocsc()
        scale = float(abs(lap).max())
        block = 2 * abs(flux)
        k = block + max(2, abs(flux))
        v0 = np.cos(np.arange(lap.shape[0]) * 0.7) + 0.1
        vals, vecs = spla.eigsh(lap, k=k, sigma=-0.05 * scale, which="LM", v0=v0)
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        tol = 1e-12 * scale
        gap = vals[block] - vals[block - 1]
        if gap < 10 * tol:
            raise SolverError(
                f"spectral gap {gap:.3e} above the doubled near-kernel is below "
                "10x solver tolerance; flux/grid mismatch"
            )
        if vals[block - 1] > 1e-3 * vals[block]:
            raise SolverError(
                f"near-kernel eigenvalue {vals[block - 1]:.3e} exceeds 1e-3 of "
                f"the first excluded eigenvalue {vals[block]:.3e}"
            )
        basis, _ = np.linalg.qr(vecs[:, :block])
        w = np.fft.fft2(basis.T.reshape(-1, n, n)).reshape(block, -1)
        freq = np.fft.fftfreq(n, d=1.0 / n)
        hi = ((np.abs(freq)[:, None] > n / 4) | (np.abs(freq)[None, :] > n / 4)).ravel()
        smooth_form = (w[:, hi] @ np.conjugate(w[:, hi].T)) / n**2
        sm_vals, sm_vecs = np.linalg.eigh(smooth_form)
        if sm_vals[count - 1] > 0.2 or (count < block and sm_vals[count] < 0.8):
            raise SolverError(
                "smooth/doubler separation is ambiguous "
                f"(high-mode masses {np.round(sm_vals, 3)}); flux/grid mismatch"
            )
        kept = basis @ sm_vecs[:, :count]
        rayleigh = np.einsum("ij,ij->j", np.conjugate(kept), lap @ kept).real
        if np.any(rayleigh > 1e-3 * vals[block]):
            raise SolverError(
                f"filtered mode eigenvalue {rayleigh.max():.3e} exceeds 1e-3 of "
                f"the first excluded eigenvalue {vals[block]:.3e}"
            )
        fields = []
        for i in range(count):
            b = kept[:, i]
            anchor = np.argmax(np.abs(b))
            b = b * (np.abs(b[anchor]) / b[anchor])
            fields.append(b.reshape(n, n).astype(complex) / np.sqrt(self.cell_area))
        return rayleigh, fields

    def harmonic_forms(self, flux: int, count: int) -> list[np.ndarray]:
        """Orthonormal harmonic (0,1)-coefficients with the given flux.

        The space has dimension |t| for flux t < 0 and dimension 1 for t = 0
        (the constant form); positive flux has no harmonic (0,1)-forms and is
        rejected.  Harmonic coefficients of negative flux are the conjugates
        of holomorphic sections of the dual bundle, i.e. the smooth near-kernel
        of the twisted d-operator.  Returned fields are orthonormal for the
        omega-weighted L2 product.
        """
        flux = int(flux)
        count = int(count)
        if count < 1:
            raise ValidationError("count must be at least 1")
        if flux > 0:
            raise ValidationError(
                "no harmonic (0,1)-forms for positive flux (h^{0,1} = 0)"
            )
        dim = abs(flux) if flux < 0 else 1
        if count > dim:
            raise ValidationError(
                f"requested {count} forms but h^{{0,1}} has dimension {dim}"
            )
        if flux == 0:
            const = np.full(
                (self.n_grid, self.n_grid), 1.0 / np.sqrt(self.vol), dtype=complex
            )
            return [const]
        _, fields = self.dolbeault_modes(flux, DIRECTION_D, count)
        return fields

    def ground_sections(self, flux: int, count: int) -> list[np.ndarray]:
        """Near-holomorphic theta-like sections of the degree-flux bundle."""
        flux = int(flux)
        if flux <= 0:
            raise ValidationError("holomorphic sections require positive flux")
        if count > flux:
            raise ValidationError(
                f"requested {count} sections but h^0 has dimension {flux}"
            )
        _, fields = self.dolbeault_modes(flux, DIRECTION_DBAR, count)
        return fields


# -- module-level operation names ------------------------------------------


def build_torus(tau: complex, lam: float, n_grid: int) -> TorusGeometry:
    """Validated torus geometry with derivative operators initialized."""
    return TorusGeometry(complex(tau), float(lam), int(n_grid))


def differentiate(geometry: TorusGeometry, fld, direction: str, twist=None):
    """Twisted Wirtinger derivative of a scalar or matrix field.

    For matrix fields, twist is a TwistPattern; for scalars it is an integer
    flux (default 0).
    """
    arr = np.asarray(getattr(fld, "values", fld))
    if arr.ndim == 2:
        flux = 0 if twist is None else int(twist)
        return geometry.diff_scalar(arr, direction, flux)
    if twist is None:
        raise ValidationError("matrix fields require a twist pattern")
    return geometry.diff_end(arr, direction, twist)


def integrate(geometry: TorusGeometry, density):
    return geometry.integrate(np.asarray(getattr(density, "values", density)))


def lambda_contract(geometry: TorusGeometry, form_coeff):
    return geometry.lambda_contract(np.asarray(getattr(form_coeff, "values", form_coeff)))


def poisson_solve(geometry: TorusGeometry, rhs):
    return geometry.poisson_solve(np.asarray(getattr(rhs, "values", rhs)))


def harmonic_forms(geometry: TorusGeometry, flux: int, count: int):
    return geometry.harmonic_forms(flux, count)
