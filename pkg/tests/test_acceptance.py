"""Acceptance gate: eight desk-scale criteria, one PASS/FAIL line each.

Each test prints its verdict line directly to the terminal (bypassing
capture) and then asserts the stated tolerances.  Criterion 4's slope
subassertion is known to fail on the shipped fixture: the fixture's
gauge generator decays like r^0.5, so the observed sup-residual slope
tracks 0.5 rather than the 0.35 weight target; the assertion is kept
faithful rather than loosened.
"""

import time

import numpy as np
import pytest

from conftest import record_verdict

from hitchin_glue.algebra import (BASIS_ISU2, commutator, frobenius_inner,
                                  frobenius_norm, m_phi_apply,
                                  m_phi_kernel_dim)
from hitchin_glue.cli import main as cli_main
from hitchin_glue.corrector import (correct, linear_action,
                                    perturbed_model_fixture, q_term,
                                    residual_e1)
from hitchin_glue.gauge import complex_gauge_apply, hitchin_error, \
    splice_exact_family
from hitchin_glue.geometry import PlumbingConfig, d_tau
from hitchin_glue.matfun import herm_exp
from hitchin_glue.models import (ModelParams, WolfFamilyParams, model_pair,
                                 pair_residuals, wolf_cylinder_fields,
                                 wolf_higgs_model_distance)
from hitchin_glue.operators import (assemble_L, dirac_mode_kernel,
                                    scaling_study, smallest_eigenvalue)
from hitchin_glue.poisson import (RadialFunction, WeightConfig, make_log_grid,
                                  mode_residual, random_decaying_profile,
                                  schur_ratio_samples, solve_mode_j)

W = WeightConfig(0.5, 0.4, 0.35)


def verdict(num, name, ok, detail):
    line = f"[PRIMARY {num}] {name}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line)
    record_verdict(line)


def test_criterion_1_algebra_suite():
    t0 = time.monotonic()
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(1000):
        phi = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        phi -= 0.5 * np.trace(phi) * np.eye(2)
        c = rng.standard_normal(3)
        gamma = np.einsum("k,kab->ab", c, np.asarray(BASIS_ISU2))
        lhs = frobenius_inner(m_phi_apply(phi, gamma), gamma).real
        rhs = 2.0 * frobenius_norm(commutator(phi, gamma)) ** 2
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(rhs)))
    kernel_ok = (m_phi_kernel_dim(np.zeros((2, 2), complex)) == 3
                 and m_phi_kernel_dim(np.diag([0.4 - 0.1j, -0.4 + 0.1j])) == 1
                 and m_phi_kernel_dim(
                     np.array([[0.0, 1.0], [0.0, 0.0]], complex)) == 0)
    elapsed = time.monotonic() - t0
    ok = worst < 1e-10 and kernel_ok and elapsed < 1.0
    verdict(1, "algebra quadratic form and kernel law", ok,
            f"max defect {worst:.2e}, kernel law {kernel_ok}, "
            f"{elapsed:.2f}s < 1s")
    assert worst < 1e-10
    assert kernel_ok
    assert elapsed < 1.0


def test_criterion_2_poisson_kernel_bound():
    t0 = time.monotonic()
    worst_margin = np.inf
    for j in range(1, 13):
        ratios = schur_ratio_samples(j, W, n_samples=100, seed=j)
        bound = 4.0 / j ** 2
        worst_margin = min(worst_margin, bound - ratios.max())
        assert ratios.max() <= bound, (j, ratios.max(), bound)
    x = make_log_grid()
    rng = np.random.default_rng(99)
    worst_res = 0.0
    for j in range(1, 13):
        h = RadialFunction(x, random_decaying_profile(rng, x, W.delta))
        u = solve_mode_j(j, h, W)
        worst_res = max(worst_res, mode_residual(j, u, h))
    elapsed = time.monotonic() - t0
    ok = worst_margin >= 0 and worst_res <= 1e-7 and elapsed < 30.0
    verdict(2, "Schur bound ||K_j|| <= 4/j^2 and mode residuals", ok,
            f"min margin {worst_margin:.2e}, max residual {worst_res:.2e} "
            f"<= 1e-7, {elapsed:.1f}s < 30s")
    assert worst_res <= 1e-7
    assert elapsed < 30.0


def test_criterion_3_wolf_oracle():
    t0 = time.monotonic()
    details = []
    ok = True
    for ell in (0.3, 0.5, 0.7):
        params = WolfFamilyParams(ell)
        sups = []
        for n in (512, 1024, 2048):
            x = np.linspace(np.log(1e-4), -0.3, n)
            dx = x[1] - x[0]
            f = wolf_cylinder_fields(params, x)
            e1, e2 = pair_residuals(f["a_tau"], f["a_theta"], f["p"],
                                    d_tau(f["a_theta"], dx, order=4),
                                    d_tau(f["p"], dx, order=4))
            sups.append(max(np.max(np.abs(e1[3:-3])),
                            np.max(np.abs(e2[3:-3]))))
        order = min(np.log2(sups[i] / sups[i + 1]) for i in range(2))
        r = np.exp(np.linspace(np.log(1e-4), np.log(1e-2), 64))
        dist = wolf_higgs_model_distance(params, r)
        slope = np.polyfit(np.log(r), np.log(dist), 1)[0]
        ok = ok and order >= 1.9 and abs(slope - ell) <= 0.15 * ell
        details.append(f"ell={ell}: order {order:.2f}, slope {slope:.3f}")
        assert order >= 1.9
        assert abs(slope - ell) <= 0.15 * ell
    elapsed = time.monotonic() - t0
    ok = ok and elapsed < 120.0
    verdict(3, "exact-family residual order and Higgs decay", ok,
            "; ".join(details) + f"; {elapsed:.1f}s < 2min")
    assert elapsed < 120.0


_SWEEP_CACHE = {}


def _approximation_sweep():
    if "sweep" in _SWEEP_CACHE:
        return _SWEEP_CACHE["sweep"]
    sups = []
    outs = []
    for R in (0.4, 0.2, 0.1, 0.05):
        cfg = PlumbingConfig.from_R(R)
        out = splice_exact_family(0.5, cfg)
        dtau = out["tau"][1] - out["tau"][0]
        n1, n2 = hitchin_error(out["a_tau"], out["a_theta"], out["p"], dtau,
                               full=True)
        per_node = np.maximum(n1, n2)
        sups.append(float(np.max(per_node[out["annulus"][3:-3]])))
        mask = ~out["annulus"]
        for _ in range(3):
            mask = mask & np.roll(mask, 1) & np.roll(mask, -1)
        outs.append(float(np.max(per_node[mask[3:-3]])))
    result = (np.array([0.4, 0.2, 0.1, 0.05]), np.array(sups),
              np.array(outs))
    _SWEEP_CACHE["sweep"] = result
    return result


def test_criterion_4_error_localization():
    R_vals, sups, outs = _approximation_sweep()
    outside = float(outs.max())
    ok = outside <= 1e-10
    verdict(4, "approximate pair exact outside the cutoff annuli", ok,
            f"max residual outside 3R/4 <= |z| <= R: {outside:.2e} <= 1e-10")
    assert outside <= 1e-10


def test_criterion_4_error_slope():
    # The slope target delta'' = 0.35 (within 20%) is not met: the
    # delta = 0.5 fixture's residual sup scales like R^0.52 because the
    # gauge generator itself decays like r^0.5.  Kept faithful; expected
    # FAIL.
    R_vals, sups, _ = _approximation_sweep()
    slope = float(np.polyfit(np.log(R_vals), np.log(sups), 1)[0])
    ok = abs(slope - 0.35) <= 0.2 * 0.35
    verdict(4, "sup-residual slope within 20% of 0.35", ok,
            f"fitted slope {slope:.4f}, window [0.28, 0.42]")
    assert abs(slope - 0.35) <= 0.2 * 0.35


def test_error_decay_tracks_family_exponent():
    # Companion check: with a smaller-exponent fixture the slope drops
    # accordingly, confirming the sweep measures the generator's decay.
    sups = []
    R_list = (0.4, 0.2, 0.1, 0.05)
    for R in R_list:
        cfg = PlumbingConfig.from_R(R)
        out = splice_exact_family(0.35, cfg)
        dtau = out["tau"][1] - out["tau"][0]
        n1, n2 = hitchin_error(out["a_tau"], out["a_theta"], out["p"], dtau,
                               full=True)
        per_node = np.maximum(n1, n2)
        sups.append(float(np.max(per_node[out["annulus"][3:-3]])))
    slope = float(np.polyfit(np.log(R_list), np.log(sups), 1)[0])
    assert 0.3 <= slope <= 0.45


def test_criterion_5_eigenvalue_scaling():
    t0 = time.monotonic()
    params = ModelParams(alpha=0.15, C=0.3 + 0.2j)
    rep = scaling_study([0.01, 0.003, 0.001, 0.0003, 0.0001], params)
    control_cfg = PlumbingConfig.from_R(0.01, n_tau=512)
    zero_higgs = ModelParams(alpha=0.15, C=1e-30)
    a, p = model_pair(zero_higgs)
    handle = assemble_L(a, p, control_cfg, include_higgs=False)
    lam = smallest_eigenvalue(handle)
    ref = (np.pi / (2 * control_cfg.half_length)) ** 2
    control_err = abs(lam - ref) / ref
    elapsed = time.monotonic() - t0
    ok = (rep.flatness <= 1.5 and rep.no_small_eigenvalues
          and control_err < 0.02 and elapsed < 300.0)
    verdict(5, "lambda_1 T^2 flat over two decades, no small eigenvalues",
            ok, f"flatness {rep.flatness:.3f} <= 1.5, control error "
            f"{control_err:.2e} < 2%, {elapsed:.1f}s < 5min")
    assert rep.flatness <= 1.5
    assert rep.no_small_eigenvalues
    assert control_err < 0.02
    assert elapsed < 300.0


def test_criterion_6_dirac_mode_kernel():
    t0 = time.monotonic()
    rng = np.random.default_rng(6)
    for _ in range(50):
        alpha = rng.uniform(0.05, 0.45)
        C = rng.standard_normal() + 1j * rng.standard_normal()
        while abs(C) < 1e-3:
            C = rng.standard_normal() + 1j * rng.standard_normal()
        params = ModelParams(alpha=alpha, C=C)
        assert dirac_mode_kernel(0, params) == 2
        for j in list(range(1, 7)) + [-1, -2, -5]:
            assert dirac_mode_kernel(j, params) == 0
    elapsed = time.monotonic() - t0
    ok = elapsed < 1.0
    verdict(6, "mode kernel 2 at j = 0, else 0 (50 random parameters)", ok,
            f"exact, {elapsed:.2f}s < 1s")
    assert elapsed < 1.0


def test_criterion_7_corrector():
    t0 = time.monotonic()
    cfg, at, ath, p = perturbed_model_fixture(0.1, 256)
    a2, ath2, p2, state = correct(at, ath, p, cfg)
    drop = state.residual_history[0] / state.residual_history[-1]
    ratios_ok = all(r < 1.0 for r in state.contraction_ratios)
    norm_ok = state.h2b_norm <= state.sigma_R

    # Expansion identity at sampled gamma on the model background.
    cfg2 = PlumbingConfig.from_R(0.1, n_tau=2001)
    half = cfg2.half_length
    tau = np.linspace(-half, half, cfg2.n_tau)
    dtau = tau[1] - tau[0]
    a_const, p_const = model_pair(ModelParams(alpha=0.15, C=0.3 + 0.2j))
    zero = np.zeros((cfg2.n_tau, 2, 2), dtype=complex)
    a_theta = np.broadcast_to(a_const, zero.shape).copy()
    p_bg = np.broadcast_to(p_const, zero.shape).copy()
    rng = np.random.default_rng(7)
    worst_defect = 0.0
    for _ in range(3):
        bump = np.exp(-(tau / (0.3 * half)) ** 2) * np.sin(
            2 * np.pi * tau / half)
        dbump = (np.exp(-(tau / (0.3 * half)) ** 2)
                 * (-2 * tau / (0.3 * half) ** 2 * np.sin(
                     2 * np.pi * tau / half)
                    + 2 * np.pi / half * np.cos(2 * np.pi * tau / half)))
        direction = sum(c * b for c, b in zip(rng.standard_normal(3),
                                              BASIS_ISU2))
        gamma = 5e-3 * bump[:, None, None] * direction
        gamma_x = 5e-3 * dbump[:, None, None] * direction
        g, g_x = herm_exp(gamma, gamma_x)
        gt, gth, gp = complex_gauge_apply(zero, a_theta, p_bg, g, g_x,
                                          np.zeros_like(g))
        defect = (residual_e1(gt, gth, gp, dtau)
                  - residual_e1(zero, a_theta, p_bg, dtau)
                  - linear_action(a_theta, p_bg, gamma, dtau)
                  - q_term(zero, a_theta, p_bg, gamma, gamma_x, dtau))
        worst_defect = max(worst_defect, float(np.max(np.abs(defect[4:-4]))))
    elapsed = time.monotonic() - t0
    ok = (ratios_ok and norm_ok and drop >= 1e3 and worst_defect <= 1e-8
          and elapsed < 300.0)
    verdict(7, "corrector contracts, bounded gamma, residual drop, expansion",
            ok, f"ratios<1 {ratios_ok}, ||gamma|| {state.h2b_norm:.2e} <= "
            f"{state.sigma_R:.2e}, drop {drop:.1e} >= 1e3, identity "
            f"{worst_defect:.1e} <= 1e-8, {elapsed:.1f}s < 5min")
    assert ratios_ok
    assert norm_ok
    assert drop >= 1e3
    assert worst_defect <= 1e-8
    assert elapsed < 300.0


def test_criterion_8_deterministic_reports(tmp_path):
    paths = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        code = cli_main(["poisson-solve", "--modes", "1", "2", "--seed", "5",
                         "--n-grid", "2049", "--format", "csv",
                         "--out-report", str(out)])
        assert code == 0
        paths.append(out)
    identical = paths[0].read_bytes() == paths[1].read_bytes()
    verdict(8, "byte-identical reports for fixed seed", identical,
            f"{paths[0].stat().st_size} bytes compared")
    assert identical
