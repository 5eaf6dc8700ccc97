import numpy as np
import pytest
from scipy.integrate import solve_ivp

from higgsflow.bundle import preset
from higgsflow.catalog import APPROXIMATE_ONLY, CONVERGENT_HYM, INCONCLUSIVE, OBSTRUCTED
from higgsflow.errors import CflError, ValidationError
from higgsflow.flow import (
    FlowOpts,
    analyze_run,
    dt_max,
    flow_step,
    heat_inequality_sup,
    initial_state,
    run_flow,
)
from higgsflow.metric import (
    HermitianMetric,
    conformal_change,
    hym_residual,
    normalize_to_hym,
)
from higgsflow.random_fields import random_metric, smooth_scalar


def test_hym_fixed_point(line1):
    st = initial_state(line1, HermitianMetric.identity(line1))
    st2 = flow_step(st, dt_max(line1, 0.2), line1)
    assert np.max(np.abs(st2.h.values - st.h.values)) < 1e-10
    assert st2.max_res < 1e-10


def test_cfl_rejection(line1):
    st = initial_state(line1, HermitianMetric.identity(line1))
    with pytest.raises(CflError):
        flow_step(st, 2 * dt_max(line1, 0.2), line1)
    with pytest.raises(CflError):
        run_flow(line1, st.h, FlowOpts(t_max=1.0, dt=1.0))
    with pytest.raises(ValidationError):
        run_flow(line1, st.h, FlowOpts(t_max=1.0, dt="fast"))


def test_nilpotent_step_preserves_diagonal(nilpotent):
    # the flow from h = I reduces exactly to the 2-variable diagonal system
    st = initial_state(nilpotent, HermitianMetric.identity(nilpotent))
    for _ in range(20):
        st = flow_step(st, dt_max(nilpotent, 0.5), nilpotent, safety=0.5)
    off = np.max(np.abs(st.h.values[:, :, 0, 1]))
    spread = np.max(np.abs(st.h.values - st.h.values[0, 0]))
    assert off == 0.0 and spread == 0.0
    q = st.h.values[0, 0, 0, 0].real / st.h.values[0, 0, 1, 1].real
    sol = solve_ivp(
        lambda t, y: -2.0 * y**2, [0.0, st.t], [1.0], rtol=1e-11, atol=1e-14
    )
    assert q == pytest.approx(sol.y[0, -1], rel=1e-9)


def test_line_flow_matches_hodge_normalization(g32, line1):
    h0 = conformal_change(
        HermitianMetric.identity(line1), np.exp(np.cos(2 * np.pi * g32.x))
    )
    rec = run_flow(
        line1, h0, FlowOpts(t_max=10.0, eps_target=1e-6, safety=0.6, sample_every=20)
    )
    assert rec.stop_reason == "eps_target"
    assert rec.final_state.max_res < 1e-6
    hn = normalize_to_hym(h0, line1)
    ratio = rec.final_state.h.values[:, :, 0, 0].real / hn.values[:, :, 0, 0].real
    assert np.max(np.abs(ratio / ratio.mean() - 1.0)) < 1e-5


def test_monotonicity_and_trace(nilpotent, rng):
    h0 = random_metric(nilpotent, rng, 0.4)
    rec = run_flow(nilpotent, h0, FlowOpts(t_max=0.6, safety=0.5, sample_every=5))
    rs = rec.max_res_series()
    ls = np.array([s.L_accum for s in rec.samples])
    assert np.all(np.diff(rs) <= 1e-6 * rs[:-1] + 1e-12)
    assert np.all(np.diff(ls) <= 1e-10 * (1 + np.abs(ls[:-1])))
    assert max(abs(s.trace_check) for s in rec.samples) < 1e-6
    # det-integral is a conserved quantity of the deg-0 flow
    dets = np.array([s.det_integral for s in rec.samples])
    assert np.max(np.abs(dets - dets[0])) < 1e-8


def test_accumulator_cross_check(nilpotent, rng):
    h0 = random_metric(nilpotent, rng, 0.4)
    rec = run_flow(
        nilpotent,
        h0,
        FlowOpts(t_max=0.5, safety=0.5, sample_every=5, cross_check_every=3),
    )
    drifts = [
        abs(s.L_accum - s.L_recomputed) / (1 + abs(s.L_accum))
        for s in rec.samples
        if not np.isnan(s.L_recomputed)
    ]
    assert drifts and max(drifts) < 1e-3


def test_fixed_points_are_hym(line1):
    st = initial_state(line1, HermitianMetric.identity(line1))
    assert st.max_res < 1e-8
    st2 = flow_step(st, dt_max(line1, 0.2), line1)
    assert np.max(np.abs(st2.h.values - st.h.values)) < 1e-8


def test_heat_inequality_spot_checks(nilpotent, g32, rng):
    states = []
    h0 = random_metric(nilpotent, rng, 0.35)
    rec = run_flow(nilpotent, h0, FlowOpts(t_max=0.3, safety=0.5, sample_every=30))
    states.append((nilpotent, rec.final_state.h))
    cfg = preset(g32, "line", d=1)
    h1 = conformal_change(
        HermitianMetric.identity(cfg), np.exp(0.5 * np.cos(2 * np.pi * g32.y))
    )
    rec = run_flow(cfg, h1, FlowOpts(t_max=0.2, safety=0.5, sample_every=30))
    states.append((cfg, rec.final_state.h))
    for c, h in states:
        assert heat_inequality_sup(c, h) <= 1e-4


def test_dsum_obstruction(dsum11, g32):
    rec = run_flow(
        dsum11,
        HermitianMetric.identity(dsum11),
        FlowOpts(t_max=0.3, eps_target=1e-4, safety=0.5, sample_every=3),
    )
    rep = analyze_run(rec)
    assert rep.verdict == OBSTRUCTED
    assert rep.plateau_level == pytest.approx(np.sqrt(2) * 2 * np.pi / g32.vol, rel=1e-6)


def test_nilpotent_approximate_only(nilpotent):
    rec = run_flow(
        nilpotent,
        HermitianMetric.identity(nilpotent),
        FlowOpts(t_max=12.0, eps_target=0.0, safety=0.9, sample_every=50),
    )
    rep = analyze_run(rec, eps=1e-1)
    assert rep.verdict == APPROXIMATE_ONLY
    assert rep.decreasing and rep.monotone_L


def test_extension_convergent(extension01):
    rec = run_flow(
        extension01,
        HermitianMetric.identity(extension01),
        FlowOpts(t_max=6.0, eps_target=1e-3, safety=0.8, sample_every=20),
    )
    rep = analyze_run(rec)
    assert rec.stop_reason == "eps_target"
    assert rep.verdict == CONVERGENT_HYM


def test_analyze_short_record_inconclusive(nilpotent):
    rec = run_flow(
        nilpotent,
        HermitianMetric.identity(nilpotent),
        FlowOpts(t_max=2 * dt_max(nilpotent, 0.2), sample_every=1),
    )
    assert analyze_run(rec).verdict == INCONCLUSIVE


def test_run_flow_deterministic(nilpotent, rng):
    h0 = random_metric(nilpotent, np.random.default_rng(3), 0.4)
    opts = FlowOpts(t_max=0.2, safety=0.5, sample_every=5)
    r1 = run_flow(nilpotent, HermitianMetric(h0.values.copy()), opts)
    r2 = run_flow(nilpotent, HermitianMetric(h0.values.copy()), opts)
    s1 = [(s.t, s.L_accum, s.max_res, s.l2_res) for s in r1.samples]
    s2 = [(s.t, s.L_accum, s.max_res, s.l2_res) for s in r2.samples]
    assert s1 == s2
