"""Explicit integration of the Hermitian-Yang-Mills heat flow.

The evolution equation dh/dt = -(K_t - c h_t), in endomorphism form
h^{-1} dh/dt = -(K_t - cI), is integrated with classical RK4 under a CFL cap
proportional to (grid spacing)^2 lambda.  Each accepted step re-Hermitizes
the metric and checks pointwise positivity; on positivity loss the step is
halved and retried.

The functional L(h_t, h_0) is accumulated from its exact rate
dL/dt = -|K_t - cI|^2 (L2 norm) using the RK4 stage values as quadrature
nodes, and periodically cross-checked against a fresh path-integral
evaluation.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import linalg as la
from .bundle import HiggsBundleConfig
from .catalog import APPROXIMATE_ONLY, CONVERGENT_HYM, INCONCLUSIVE, OBSTRUCTED
from .donaldson import eval_L, geodesic_path
from .errors import CflError, FlowAbortError, ValidationError
from .metric import (
    HermitianMetric,
    mean_curvature_fast,
    mean_curvature_values,
    residual_length_sq,
)

RK4_LIMIT = 2.785  # real-axis stability boundary of classical RK4


@dataclass
class FlowState:
    t: float
    h: HermitianMetric
    max_res: float
    l2_res: float
    L_accum: float
    step_dt: float


@dataclass
class Sample:
    t: float
    L_accum: float
    L_recomputed: float
    max_res: float
    l2_res: float
    min_eig: float
    trace_check: float
    det_integral: float


@dataclass
class RunRecord:
    format_version: int
    config_label: str
    tau_re: float
    tau_im: float
    lam: float
    n_grid: int
    t_max: float
    eps_target: float
    dt: float
    sample_every: int
    samples: list[Sample] = field(default_factory=list)
    stop_reason: str = ""
    wall_time: float = 0.0
    final_state: FlowState | None = None

    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    def max_res_series(self) -> np.ndarray:
        return np.array([s.max_res for s in self.samples])


@dataclass
class FlowOpts:
    t_max: float
    eps_target: float = 0.0
    dt: float | str = "auto"
    sample_every: int = 10
    safety: float = 0.2
    cross_check_every: int = 50
    cross_check_t_steps: int = 64


# -- step control -----------------------------------------------------------------


def parabolic_bound(cfg: HiggsBundleConfig) -> float:
    """Upper bound on the spectral radius of the linearized flow operator."""
    g = cfg.geometry
    grid = g.n_grid**2 * (1.0 + abs(g.tau)) ** 2 / (4.0 * g.lam * g.tau.imag**2)
    phi_sup = float(np.sqrt(np.sum(np.abs(cfg.phi.values) ** 2, axis=(-2, -1))).max())
    a_sup = float(np.sqrt(np.sum(np.abs(cfg.a.values) ** 2, axis=(-2, -1))).max())
    zeroth = (2.0 * phi_sup**2 + 2.0 * a_sup * g.n_grid) / g.lam
    zeroth += abs(cfg.hym_constant) + 2.0 * np.pi * np.abs(cfg.fluxes).max(initial=0) / g.vol
    return grid + zeroth


def dt_max(cfg: HiggsBundleConfig, safety: float = 0.2) -> float:
    """CFL cap: safety fraction of the RK4 stability limit, ~ dx^2 lambda."""
    if not 0.0 < safety <= 1.0:
        raise ValidationError("safety must lie in (0, 1]")
    return safety * RK4_LIMIT / parabolic_bound(cfg)


def _evaluate(H: np.ndarray, cfg: HiggsBundleConfig):
    """(K, flow RHS, |K-cI|_L2^2, sup|K-cI|^2) at one metric."""
    from . import _kernels

    if _kernels.HAVE_NUMBA:
        k = mean_curvature_fast(H, cfg)
        rhs, l2sq, supsq = _kernels._rhs_kernel(
            H, k, cfg.hym_constant, cfg.geometry.cell_area
        )
        return k, rhs, l2sq, supsq
    k = mean_curvature_values(H, cfg)
    r = cfg.rank
    m = k.copy()
    m[..., range(r), range(r)] -= cfg.hym_constant
    s2 = residual_length_sq(H, k, cfg.hym_constant)
    return k, -(H @ m), float(cfg.geometry.integrate(s2)), float(s2.max())


def _rk4(H: np.ndarray, dt: float, cfg: HiggsBundleConfig, first=None):
    """One RK4 step; first = (rhs, l2sq) at H may be supplied to reuse stage 1."""
    if first is None:
        _, f1, r1, _ = _evaluate(H, cfg)
    else:
        f1, r1 = first
    _, f2, r2, _ = _evaluate(la.hermitize(H + 0.5 * dt * f1), cfg)
    _, f3, r3, _ = _evaluate(la.hermitize(H + 0.5 * dt * f2), cfg)
    _, f4, r4, _ = _evaluate(la.hermitize(H + dt * f3), cfg)
    out = la.hermitize(H + dt / 6.0 * (f1 + 2.0 * f2 + 2.0 * f3 + f4))
    dL = -dt / 6.0 * (r1 + 2.0 * r2 + 2.0 * r3 + r4)
    return out, dL


def _step_raw(H: np.ndarray, dt: float, cfg: HiggsBundleConfig, first=None):
    """One accepted RK4 step with positivity retries; (H', dt_used, dL)."""
    for attempt in range(11):
        out, dL = _rk4(H, dt, cfg, first if attempt == 0 else None)
        if la.min_eig(out) > 1e-12:
            return out, dt, dL
        dt *= 0.5
    raise FlowAbortError("positivity lost and not recovered after 10 step halvings")


def flow_step(state: FlowState, dt: float, cfg: HiggsBundleConfig, safety: float = 0.2) -> FlowState:
    """One explicit step of the evolution equation from the given state."""
    cap = dt_max(cfg, safety)
    if dt > cap * (1 + 1e-12):
        raise CflError(f"dt = {dt:.3e} exceeds the CFL cap {cap:.3e}")
    H, used, dL = _step_raw(state.h.values, dt, cfg)
    _, _, l2sq, supsq = _evaluate(H, cfg)
    return FlowState(
        t=state.t + used,
        h=HermitianMetric(H),
        max_res=math.sqrt(supsq),
        l2_res=math.sqrt(l2sq),
        L_accum=state.L_accum + dL,
        step_dt=used,
    )


def initial_state(cfg: HiggsBundleConfig, h0: HermitianMetric) -> FlowState:
    _, _, l2sq, supsq = _evaluate(h0.values, cfg)
    return FlowState(
        t=0.0,
        h=h0,
        max_res=math.sqrt(supsq),
        l2_res=math.sqrt(l2sq),
        L_accum=0.0,
        step_dt=0.0,
    )


# -- the driver -------------------------------------------------------------------


def run_flow(cfg: HiggsBundleConfig, h0: HermitianMetric, opts: FlowOpts) -> RunRecord:
    """Integrate until t_max or max|K - cI| < eps_target, with monitors.

    Aborts (FlowAbortError, carrying the partial record) on unrecoverable
    positivity loss or if the residual sup-norm increases beyond roundoff
    slack between accepted samples, which the maximum principle forbids for
    the continuum flow.
    """
    geom = cfg.geometry
    if isinstance(opts.dt, str):
        if opts.dt != "auto":
            raise ValidationError("dt must be a number or 'auto'")
        dt = dt_max(cfg, opts.safety)
    else:
        dt = float(opts.dt)
        if dt <= 0:
            raise ValidationError("dt must be positive")
        cap = dt_max(cfg, opts.safety)
        if dt > cap * (1 + 1e-12):
            raise CflError(f"dt = {dt:.3e} exceeds the CFL cap {cap:.3e}")
    record = RunRecord(
        format_version=1,
        config_label=cfg.label,
        tau_re=geom.tau.real,
        tau_im=geom.tau.imag,
        lam=geom.lam,
        n_grid=geom.n_grid,
        t_max=float(opts.t_max),
        eps_target=float(opts.eps_target),
        dt=dt,
        sample_every=int(opts.sample_every),
    )
    t_start = time.monotonic()
    h0_metric = HermitianMetric(h0.values.copy())

    t = 0.0
    H = h0.values
    L_accum = 0.0
    k_cur, rhs_cur, l2sq, supsq = _evaluate(H, cfg)
    max_res = math.sqrt(supsq)
    l2_res = math.sqrt(l2sq)
    last_sampled_res = max_res

    def take_sample(recompute: bool):
        trace_check = float(
            geom.integrate(la.trace(k_cur).real) - 2 * np.pi * cfg.degree
        )
        det_int = float(geom.integrate(np.log(la.det_pd(H))))
        l_re = math.nan
        if recompute and t > 0:
            l_re = eval_L(
                HermitianMetric(H), h0_metric, cfg,
                geodesic_path(h0_metric, h=HermitianMetric(H),
                              t_steps=opts.cross_check_t_steps),
            ).L
        record.samples.append(
            Sample(
                t=float(t), L_accum=float(L_accum), L_recomputed=float(l_re),
                max_res=float(max_res), l2_res=float(l2_res),
                min_eig=float(la.min_eig(H)),
                trace_check=trace_check, det_integral=det_int,
            )
        )

    take_sample(recompute=False)
    steps = 0
    try:
        while t < opts.t_max and max_res >= opts.eps_target:
            step_dt = min(dt, opts.t_max - t)
            H, used, dL = _step_raw(H, step_dt, cfg, first=(rhs_cur, l2sq))
            t += used
            L_accum += dL
            steps += 1
            k_cur, rhs_cur, l2sq, supsq = _evaluate(H, cfg)
            max_res = math.sqrt(supsq)
            l2_res = math.sqrt(l2sq)
            if steps % opts.sample_every == 0 or t >= opts.t_max:
                recompute = (len(record.samples) % max(1, opts.cross_check_every)) == 0
                take_sample(recompute)
                if max_res > last_sampled_res * (1 + 1e-6) + 1e-12:
                    record.stop_reason = "aborted_monotonicity"
                    raise FlowAbortError(
                        f"max|K - cI| increased between samples "
                        f"({last_sampled_res:.6e} -> {max_res:.6e}); "
                        "discretization failure"
                    )
                last_sampled_res = max_res
    except FlowAbortError as err:
        record.wall_time = time.monotonic() - t_start
        if not record.stop_reason:
            record.stop_reason = "aborted_positivity"
        err.record = record
        raise
    if not record.samples or record.samples[-1].t < t:
        take_sample(recompute=False)
    record.stop_reason = "eps_target" if max_res < opts.eps_target else "t_max"
    record.wall_time = time.monotonic() - t_start
    record.final_state = FlowState(
        t=t, h=HermitianMetric(H), max_res=max_res, l2_res=l2_res,
        L_accum=L_accum, step_dt=dt,
    )
    return record


# -- trajectory classification ------------------------------------------------------


@dataclass
class AnalyzeReport:
    verdict: str
    plateau_level: float | None
    tail_slope: float
    log_slope: float
    decreasing: bool
    monotone_L: bool
    detail: str


def _linfit(x: np.ndarray, y: np.ndarray):
    a, b = np.polyfit(x, y, 1)
    res = y - (a * x + b)
    return a, float(np.sqrt(np.mean(res**2)))


def analyze_run(record: RunRecord, eps: float | None = None) -> AnalyzeReport:
    """Classify a flow trajectory from its sampled residual series.

    CONVERGENT_HYM: residual fell below the target and keeps an exponential
    decay profile.  APPROXIMATE_ONLY: decreasing with a power-law profile and
    no plateau (strictly semistable signature: the residual dies like 1/t
    without a positive floor).  OBSTRUCTED: the residual stalls at a positive
    level (tail slope within +-1e-3 of zero at a level above 10x the target).
    Short records are INCONCLUSIVE.
    """
    if len(record.samples) < 10:
        return AnalyzeReport(
            INCONCLUSIVE, None, 0.0, 0.0, False, False, "fewer than 10 samples"
        )
    if eps is None:
        eps = record.eps_target if record.eps_target > 0 else 1e-2
    ts = record.times()
    rs = record.max_res_series()
    ls = np.array([s.L_accum for s in record.samples])
    monotone_L = bool(np.all(np.diff(ls) <= 1e-10 * (1 + np.abs(ls[:-1]))))
    decreasing = bool(np.all(np.diff(rs) <= 1e-6 * rs[:-1] + 1e-12))
    n_tail = max(5, int(0.3 * len(rs)))
    tt, rr = ts[-n_tail:], rs[-n_tail:]
    tail_slope, _ = _linfit(tt, rr)
    level = float(np.mean(rr))

    if abs(tail_slope) <= 1e-3 and level > 10 * eps:
        return AnalyzeReport(
            OBSTRUCTED, level, float(tail_slope), 0.0, decreasing, monotone_L,
            f"residual stalled at {level:.4e}",
        )
    if not decreasing:
        return AnalyzeReport(
            INCONCLUSIVE, None, float(tail_slope), 0.0, decreasing, monotone_L,
            "residual series is not decreasing",
        )
    if np.all(rr > 0) and np.all(tt > 0):
        logr = np.log(rr)
        slope_exp, sse_exp = _linfit(tt, logr)
        slope_pow, sse_pow = _linfit(np.log(tt), logr)
        log_slope = slope_exp
        exp_better = sse_exp <= sse_pow
    else:
        log_slope = -math.inf
        exp_better = True
    final = rs[-1]
    if final < eps and exp_better:
        return AnalyzeReport(
            CONVERGENT_HYM, None, float(tail_slope), float(log_slope),
            decreasing, monotone_L, f"exponential decay to {final:.4e}",
        )
    if not exp_better:
        return AnalyzeReport(
            APPROXIMATE_ONLY, None, float(tail_slope), float(log_slope),
            decreasing, monotone_L,
            "power-law decay: residual vanishes without a floor",
        )
    return AnalyzeReport(
        INCONCLUSIVE, None, float(tail_slope), float(log_slope),
        decreasing, monotone_L, "decay profile not yet resolved",
    )


# -- heat-inequality monitor ---------------------------------------------------------


def heat_inequality_sup(cfg: HiggsBundleConfig, h: HermitianMetric, delta: float | None = None) -> float:
    """sup over cells of (d/dt + box0)|K - cI|^2 along the flow at h.

    The continuum identity makes this -2 |Dpp K|^2 <= 0; the discrete check
    low-passes the residual density before applying the Laplacian so that
    stencil noise at the grid scale does not mask the sign.
    """
    geom = cfg.geometry
    if delta is None:
        delta = 0.25 * dt_max(cfg, 0.2)

    def res_sq(H):
        k = mean_curvature_values(H, cfg)
        return residual_length_sq(H, k, cfg.hym_constant)

    Hp = _rk4(h.values, delta, cfg)[0]
    Hm = _rk4(h.values, -delta, cfg)[0]
    f0 = res_sq(h.values)
    dfdt = (res_sq(Hp) - res_sq(Hm)) / (2 * delta)
    n = geom.n_grid
    freq = np.fft.fftfreq(n, d=1.0 / n)
    keep = (np.abs(freq)[:, None] <= n / 4) & (np.abs(freq)[None, :] <= n / 4)
    smooth = np.fft.ifft2(np.fft.fft2(f0) * keep).real
    val = dfdt + geom.box0(smooth).real
    return float(val.max())
