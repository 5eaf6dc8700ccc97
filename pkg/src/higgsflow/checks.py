"""Invariant suites behind the `check` subcommand.

Each suite runs a battery of module invariants at the default desk scale
(tau = i, lambda = 1, N = 32) and reports one pass/fail row per check.  The
batteries are compressed versions of the test suite: enough to certify an
installation, fast enough to run all of them in well under five minutes.
"""

from __future__ import annotations

import numpy as np

from . import donaldson as D
from . import flow as F
from . import metric as M
from . import sequences as S
from .bundle import direct_sum, dual_bundle, preset, tensor_product
from .errors import HiggsFlowError, ValidationError
from .geometry import build_torus
from .linalg import adjoint, inv_pd, trace
from .metric import HermitianMetric
from .random_fields import random_metric, random_selfadjoint, smooth_scalar

SUITES = ("geometry", "metric", "donaldson", "flow", "sequences", "all")


def _run(checks):
    rows = []
    for name, fn in checks:
        try:
            ok, detail = fn()
        except HiggsFlowError as err:
            ok, detail = False, f"{type(err).__name__}: {err}"
        rows.append((name, bool(ok), str(detail)))
    return rows


def _geometry():
    g = build_torus(1j, 1.0, 32)
    rng = np.random.default_rng(100)

    def ibp():
        f = smooth_scalar(g, rng, 1.0, 3)
        h = smooth_scalar(g, rng, 1.0, 3)
        lhs = g.integrate(f * g.box0(h))
        rhs = g.integrate(h * g.box0(f))
        err = abs(lhs - rhs) / (1 + abs(lhs))
        return err < 1e-8, f"rel dev {err:.2e}"

    def conjugacy():
        f = smooth_scalar(g, rng, 1.0, 3, real=False)
        dev = np.max(np.abs(np.conj(g.diff_scalar(f, "dbar")) - g.diff_scalar(np.conj(f), "d")))
        return dev < 1e-12, f"sup dev {dev:.2e}"

    def linearity():
        f = smooth_scalar(g, rng, 1.0, 3, real=False)
        h = smooth_scalar(g, rng, 1.0, 3, real=False)
        dev = np.max(
            np.abs(g.diff_scalar(2.5 * f + 1j * h, "d") - 2.5 * g.diff_scalar(f, "d") - 1j * g.diff_scalar(h, "d"))
        )
        return dev < 1e-12, f"sup dev {dev:.2e}"

    def poisson_roundtrip():
        f = smooth_scalar(g, rng, 1.0, 4)
        f -= g.integrate(f) / g.vol
        u = g.poisson_solve(g.box0(f))
        dev = np.max(np.abs(u - f)) / np.max(np.abs(f))
        return dev < 1e-8, f"rel dev {dev:.2e}"

    def quadrature():
        v = g.integrate(np.ones((32, 32)))
        z = abs(g.integrate(np.cos(2 * np.pi * g.x)))
        return abs(v - g.vol) < 1e-12 and z < 1e-12, f"vol dev {abs(v - g.vol):.1e}, cos {z:.1e}"

    def refinement():
        errs = []
        for n in (32, 64):
            gn = build_torus(1j, 1.0, n)
            f = np.exp(2j * np.pi * gn.x)
            errs.append(np.max(np.abs(gn.diff_scalar(f, "d") - 1j * np.pi * f)))
        ratio = errs[0] / errs[1]
        return ratio > 3.0, f"error ratio 32->64: {ratio:.2f}"

    def harmonic_dims():
        b = g.harmonic_forms(-2, 2)
        gram = [[g.integrate(np.conj(x) * y) for y in b] for x in b]
        dev = np.max(np.abs(np.array(gram) - np.eye(2)))
        try:
            g.harmonic_forms(1, 1)
            return False, "positive flux accepted"
        except ValidationError:
            pass
        return dev < 1e-10, f"orthonormality dev {dev:.2e}"

    return _run(
        [
            ("box0 self-adjointness", ibp),
            ("d/dbar conjugacy", conjugacy),
            ("operator linearity", linearity),
            ("poisson o box0 = id", poisson_roundtrip),
            ("quadrature exactness", quadrature),
            ("second-order refinement", refinement),
            ("harmonic form dimensions", harmonic_dims),
        ]
    )


def _metric():
    g = build_torus(1j, 1.0, 32)
    rng = np.random.default_rng(200)
    ext = preset(g, "extension", d1=0, d2=1, eps=1.0)

    def gauge_independence():
        vals = []
        for _ in range(2):
            h = random_metric(ext, rng, 0.5, block_diagonal=False)
            vals.append(M.degree_slope_c(ext, h)[0])
        dev = abs(vals[0] - vals[1]) + abs(vals[0] - 1.0)
        return dev < 1e-8, f"deg dev {dev:.2e}"

    def trace_conservation():
        h = random_metric(ext, rng, 0.5, block_diagonal=False)
        k = M.mean_curvature_values(h.values, ext)
        val = abs(g.integrate(trace(k).real) - 2 * np.pi * ext.degree)
        return val < 1e-8, f"int tr(K-cI) = {val:.2e}"

    def self_adjointness():
        h = random_metric(ext, rng, 0.5, block_diagonal=False)
        k = M.mean_curvature_values(h.values, ext)
        dev = np.max(np.abs(k - inv_pd(h.values) @ adjoint(k) @ h.values))
        return dev < 1e-8, f"sup dev {dev:.2e}"

    def conformal_law():
        cfg0 = preset(g, "line", d=0)
        u = smooth_scalar(g, rng, 0.8, 2)
        h0 = HermitianMetric.identity(cfg0)
        h1 = M.conformal_change(h0, np.exp(u))
        k0 = M.mean_curvature_values(h0.values, cfg0)[:, :, 0, 0]
        k1 = M.mean_curvature_values(h1.values, cfg0)[:, :, 0, 0]
        dev = np.max(np.abs(k1 - k0 - g.box0(u)))
        return dev < 1.0, f"sup dev {dev:.2e} (O(N^-2) scale)"

    def hodge_normalization():
        cfg1 = preset(g, "line", d=1)
        h = M.conformal_change(
            HermitianMetric.identity(cfg1), np.exp(smooth_scalar(g, rng, 0.7, 2))
        )
        hn = M.normalize_to_hym(h, cfg1)
        res = M.hym_residual(hn, cfg1)[0]
        return res < 1e-6, f"residual {res:.2e}"

    def whitney():
        l1, l2 = preset(g, "line", d=1), preset(g, "line", d=-1)
        h1 = random_metric(l1, rng, 0.5)
        h2 = random_metric(l2, rng, 0.5)
        ds = direct_sum(l1, l2)
        kd = M.mean_curvature_values(M.direct_sum_metric(h1, h2).values, ds)
        k1 = M.mean_curvature_values(h1.values, l1)
        k2 = M.mean_curvature_values(h2.values, l2)
        dev = max(
            np.max(np.abs(kd[:, :, 0, 0] - k1[:, :, 0, 0])),
            np.max(np.abs(kd[:, :, 1, 1] - k2[:, :, 0, 0])),
            np.max(np.abs(kd[:, :, 0, 1])),
        )
        return dev < 1e-12, f"sup dev {dev:.2e}"

    def dual_and_tensor():
        l1 = preset(g, "line", d=1)
        h1 = random_metric(l1, rng, 0.5)
        k1 = M.mean_curvature_values(h1.values, l1)
        kd = M.mean_curvature_values(M.dual_metric(h1).values, dual_bundle(l1))
        dual_dev = np.max(np.abs(kd + k1))
        l2 = preset(g, "line", d=-1)
        h2 = random_metric(l2, rng, 0.5)
        kt = M.mean_curvature_values(
            M.tensor_metric(h1, h2).values, tensor_product(l1, l2)
        )
        k2 = M.mean_curvature_values(h2.values, l2)
        tensor_dev = np.max(np.abs(kt[:, :, 0, 0] - k1[:, :, 0, 0] - k2[:, :, 0, 0]))
        return dual_dev < 1.0 and tensor_dev < 1.0, (
            f"dual dev {dual_dev:.2e}, tensor dev {tensor_dev:.2e} (O(N^-2) scale)"
        )

    def box_tilde_oracle():
        nil = preset(g, "nilpotent")
        h = random_metric(nil, rng, 0.4)
        v = random_selfadjoint(nil, h, rng, 0.4)
        bt = M.box_tilde_values(v, h.values, nil)
        eps = 1e-5
        from .donaldson import geodesic_points

        hp, hm = geodesic_points(h.values, v, [eps, -eps])
        kp = M.mean_curvature_values(hp, nil, raw=True)[1]
        km = M.mean_curvature_values(hm, nil, raw=True)[1]
        fd = (kp - km) / (2 * eps)
        dev = np.max(np.abs(fd - bt)) / max(np.max(np.abs(bt)), 1e-12)
        return dev < 0.1, f"rel dev {dev:.2e} (O(N^-2) scale)"

    return _run(
        [
            ("degree gauge independence", gauge_independence),
            ("trace-part conservation", trace_conservation),
            ("K h-self-adjointness", self_adjointness),
            ("conformal change law", conformal_law),
            ("hodge normalization", hodge_normalization),
            ("whitney sum law", whitney),
            ("dual and tensor laws", dual_and_tensor),
            ("box-tilde variation oracle", box_tilde_oracle),
        ]
    )


def _donaldson():
    g = build_torus(1j, 1.0, 32)
    rng = np.random.default_rng(300)
    nil = preset(g, "nilpotent")

    def scale_invariance():
        h = random_metric(nil, rng, 0.5)
        worst = 0.0
        for a in (0.5, 2.0, 7.0):
            worst = max(worst, abs(D.eval_L(h, HermitianMetric(a * h.values), nil).L))
        return worst < 1e-8, f"max |L(h,ah)| = {worst:.2e}"

    def path_independence():
        worst = 0.0
        for _ in range(3):
            h1 = random_metric(nil, rng, 0.4)
            h2 = random_metric(nil, rng, 0.4)
            lg = D.eval_L(h1, h2, nil, D.geodesic_path(h2, h=h1)).L
            ll = D.eval_L(h1, h2, nil, D.linear_path(h2, h1)).L
            worst = max(worst, abs(lg - ll) / (1 + abs(lg)))
        return worst < 1e-4, f"max rel dev {worst:.2e}"

    def cocycle_antisymmetry():
        h1 = random_metric(nil, rng, 0.4)
        h2 = random_metric(nil, rng, 0.4)
        h3 = random_metric(nil, rng, 0.4)
        l12 = D.eval_L(h1, h2, nil).L
        l21 = D.eval_L(h2, h1, nil).L
        l13 = D.eval_L(h1, h3, nil).L
        l32 = D.eval_L(h3, h2, nil).L
        anti = abs(l12 + l21) / (1 + abs(l12))
        coc = abs(l12 - l13 - l32) / (1 + abs(l12))
        return anti < 1e-4 and coc < 1e-4, f"antisym {anti:.2e}, cocycle {coc:.2e}"

    def closed_form():
        worst = 0.0
        for _ in range(3):
            k = random_metric(nil, rng, 0.25)
            v = random_selfadjoint(nil, k, rng, 0.25)
            h = HermitianMetric(D.geodesic_points(k.values, v, [1.0])[0])
            le = D.eval_L(h, k, nil).L
            lc = D.closed_form_L(k, v, nil)
            worst = max(worst, abs(le - lc) / (1 + abs(le)))
        return worst < 1e-4, f"max rel dev {worst:.2e}"

    def variations():
        k = random_metric(nil, rng, 0.3)
        v = random_selfadjoint(nil, k, rng, 0.3)
        rep = D.variation_checks(k, v, nil, 1e-3)
        ok = (
            rep.first_variation_error < 1e-4
            and rep.second_variation_error < 1e-3 * (1 + abs(rep.prime_norm))
            and rep.d2L_fd > -1e-6
            and rep.q1_rate_error < 1e-8
        )
        return ok, (
            f"d1 err {rep.first_variation_error:.1e}, "
            f"d2 err {rep.second_variation_error:.1e}, dQ1 err {rep.q1_rate_error:.1e}"
        )

    def convexity():
        k = random_metric(nil, rng, 0.4)
        v = random_selfadjoint(nil, k, rng, 0.5)
        ts = np.linspace(0, 1, 9)
        pts = D.geodesic_points(k.values, v, list(ts))
        ls = [D.eval_L(HermitianMetric(p), k, nil).L for p in pts]
        second = np.diff(ls, 2)
        return bool(np.all(second > -1e-6)), f"min second difference {second.min():.2e}"

    return _run(
        [
            ("L(h, a h) = 0", scale_invariance),
            ("path independence", path_independence),
            ("cocycle and antisymmetry", cocycle_antisymmetry),
            ("closed form = path integral", closed_form),
            ("first/second variation", variations),
            ("geodesic convexity", convexity),
        ]
    )


def _flow():
    g = build_torus(1j, 1.0, 32)
    rng = np.random.default_rng(400)

    def fixed_point():
        l1 = preset(g, "line", d=1)
        st = F.initial_state(l1, HermitianMetric.identity(l1))
        st2 = F.flow_step(st, F.dt_max(l1, 0.2), l1)
        dev = np.max(np.abs(st2.h.values - st.h.values))
        return dev < 1e-10, f"per-step change {dev:.2e}"

    def line_convergence():
        l1 = preset(g, "line", d=1)
        h0 = M.conformal_change(
            HermitianMetric.identity(l1), np.exp(smooth_scalar(g, rng, 0.6, 2))
        )
        rec = F.run_flow(l1, h0, F.FlowOpts(t_max=8.0, eps_target=1e-6, safety=0.6, sample_every=20))
        ok = rec.stop_reason == "eps_target"
        return ok, f"stop={rec.stop_reason}, res={rec.final_state.max_res:.2e}"

    def monotonicity():
        nil = preset(g, "nilpotent")
        h0 = random_metric(nil, rng, 0.4)
        rec = F.run_flow(nil, h0, F.FlowOpts(t_max=0.5, safety=0.5, sample_every=10))
        rs = rec.max_res_series()
        ls = np.array([s.L_accum for s in rec.samples])
        ok = bool(
            np.all(np.diff(rs) <= 1e-6 * rs[:-1] + 1e-12)
            and np.all(np.diff(ls) <= 1e-10 * (1 + np.abs(ls[:-1])))
        )
        tr = max(abs(s.trace_check) for s in rec.samples)
        return ok and tr < 1e-6, f"monotone, trace dev {tr:.2e}"

    def l_consistency():
        nil = preset(g, "nilpotent")
        h0 = random_metric(nil, rng, 0.4)
        rec = F.run_flow(
            nil, h0,
            F.FlowOpts(t_max=0.4, safety=0.5, sample_every=5, cross_check_every=4),
        )
        devs = [
            abs(s.L_accum - s.L_recomputed) / (1 + abs(s.L_accum))
            for s in rec.samples
            if not np.isnan(s.L_recomputed)
        ]
        ok = bool(devs) and max(devs) < 1e-3
        return ok, f"max drift {max(devs):.2e}" if devs else (False, "no cross-checks")

    def heat_inequality():
        nil = preset(g, "nilpotent")
        h0 = random_metric(nil, rng, 0.3)
        rec = F.run_flow(nil, h0, F.FlowOpts(t_max=0.2, safety=0.5, sample_every=20))
        sup = F.heat_inequality_sup(nil, rec.final_state.h)
        return sup <= 1e-4, f"sup (d/dt + box)|K-cI|^2 = {sup:.2e}"

    def obstruction():
        ds = preset(g, "dsum", d1=1, d2=-1)
        rec = F.run_flow(
            ds, HermitianMetric.identity(ds),
            F.FlowOpts(t_max=0.3, eps_target=1e-4, safety=0.5, sample_every=3),
        )
        rep = F.analyze_run(rec)
        return rep.verdict == "OBSTRUCTED", f"verdict {rep.verdict} at {rep.plateau_level}"

    return _run(
        [
            ("HYM metric is a fixed point", fixed_point),
            ("line bundle converges", line_convergence),
            ("L and residual monotone", monotonicity),
            ("accumulator cross-check", l_consistency),
            ("heat inequality spot check", heat_inequality),
            ("unstable sum obstructed", obstruction),
        ]
    )


def _sequences():
    g = build_torus(1j, 1.0, 32)
    rng = np.random.default_rng(500)
    atiyah = preset(g, "extension", d1=0, d2=0, eps=1.0)
    flag = S.FlagSpec(1)

    def q1_additivity():
        h = random_metric(atiyah, rng, 0.5, block_diagonal=False)
        k = random_metric(atiyah, rng, 0.5, block_diagonal=False)
        hs, hq = S.split_metrics(h, flag, atiyah)
        ks, kq = S.split_metrics(k, flag, atiyah)
        dev = np.max(
            np.abs(D.q1_density(h, k) - D.q1_density(hs, ks) - D.q1_density(hq, kq))
        )
        return dev < 1e-10, f"pointwise dev {dev:.2e}"

    def b_examples():
        b = S.second_fundamental_form(HermitianMetric.identity(atiyah), flag, atiyah)
        dev = np.max(np.abs(b[:, :, 0, 0] - atiyah.a.values[:, :, 0, 1]))
        split = preset(g, "dsum", d1=0, d2=0)
        b0 = np.max(
            np.abs(S.second_fundamental_form(HermitianMetric.identity(split), S.FlagSpec(1), split))
        )
        return dev < 1e-12 and b0 < 1e-12, f"B=a dev {dev:.1e}, split B {b0:.1e}"

    def decomposition():
        worst = 0.0
        for _ in range(2):
            h = random_metric(atiyah, rng, 0.4, block_diagonal=False)
            k = random_metric(atiyah, rng, 0.4, block_diagonal=False)
            rep = S.decomposition_check(h, k, flag, atiyah)
            worst = max(worst, abs(rep.difference) / (1 + abs(rep.L_total)))
        return worst < 1e-3, f"max rel dev {worst:.2e}"

    def slope_gate():
        ds = preset(g, "dsum", d1=1, d2=-1)
        try:
            S.decomposition_check(
                HermitianMetric.identity(ds), HermitianMetric.identity(ds), S.FlagSpec(1), ds
            )
            return False, "mismatched slopes accepted"
        except ValidationError:
            return True, "refused on slope mismatch"

    def degree_additivity():
        sub = S.sub_config(atiyah, flag)
        quot = S.quotient_config(atiyah, flag)
        ok = sub.degree + quot.degree == atiyah.degree
        return ok, f"{sub.degree} + {quot.degree} = {atiyah.degree}"

    return _run(
        [
            ("Q1 additivity", q1_additivity),
            ("second fundamental form", b_examples),
            ("functional decomposition", decomposition),
            ("slope hypothesis gate", slope_gate),
            ("degree additivity", degree_additivity),
        ]
    )


def run_suite(name: str):
    """(all_passed, rows) for one suite name from SUITES."""
    table = {
        "geometry": _geometry,
        "metric": _metric,
        "donaldson": _donaldson,
        "flow": _flow,
        "sequences": _sequences,
    }
    if name == "all":
        rows = []
        for key in ("geometry", "metric", "donaldson", "flow", "sequences"):
            rows.extend((f"{key}: {n}", ok, d) for n, ok, d in table[key]())
    elif name in table:
        rows = table[name]()
    else:
        raise ValidationError(f"unknown suite '{name}'; choose from {', '.join(SUITES)}")
    return all(ok for _, ok, _ in rows), rows
