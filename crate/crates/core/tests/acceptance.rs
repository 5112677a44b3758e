//! Acceptance suite: one test per release criterion, each printing a single
//! PASS/FAIL line with the measured quantity and its pinned tolerance.
//! Criteria cover exactness on constants, the trivial kernel, the maximum
//! principle, nonlocal-flux refinement, the two bilinear-form identities,
//! gradient blow-up exponents, contraction linearity, continuation vs
//! direct solves, brute-force oracles, and norm-ratio stability.

use mixnl::extension::{extend, exterior_gradient_rate, GradientRate, GridFunction};
use mixnl::fitting::fit_line;
use mixnl::geometry::{build_grid, Domain, Grid, ShellPolicy};
use mixnl::kernels::{FracParams, QuadPolicy, RegionalKernel};
use mixnl::operators::{FracOperator, TailMode};
use mixnl::presets::Preset1d;
use mixnl::solver::{
    continuation_solve, contraction_factor, solve_direct, solve_direct_at, AssembledSystem,
    ContinuationOptions, ProblemData,
};
use mixnl::verification::{
    boundary_factor_slope, max_principle_campaign, neumann_refinement_ratio,
    oracle_frac_laplacian, oracle_regional_kernel, w2p_norm_scan, IdentityEngine,
};
use std::sync::Arc;
use std::time::Instant;

const R_TRUNC: f64 = 4.0;

/// Identity mismatch allowed to grow by 5% plus quadrature noise between
/// refinement levels before the trend counts as increasing.
const TREND_SLACK: f64 = 1.05;
const TREND_FLOOR: f64 = 1e-5;
/// Equivalence identity tolerance, all levels (observed maxima ~3e-4).
const EQUIV_TOL: f64 = 2e-2;
/// Pairing identity tolerance at the finest level. The pairing carries an
/// O(h^(2-2s)) inner-zone term that sits near 2.3e-2 at h = 0.025, s = 0.7;
/// the binding assertion is the non-increasing trend.
const IBP_FINEST_TOL: f64 = 4e-2;

fn unit_grid(h: f64) -> Arc<Grid> {
    let d = Domain::interval(0.0, 1.0).unwrap();
    Arc::new(build_grid(&d, h, R_TRUNC, ShellPolicy::default()).unwrap())
}

fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {id:02} {name}: {detail}");
    assert!(pass, "criterion {id:02} {name}: {detail}");
}

fn sup_diff_from_one(u: &[f64]) -> f64 {
    u.iter().map(|&v| (v - 1.0).abs()).fold(0.0, f64::max)
}

fn positive_field(grid: &Arc<Grid>, seed: u64, floor: f64) -> Vec<f64> {
    let g = Preset1d::RandomFourier { seed, modes: 4, amp: 1.0 }.sample(grid).unwrap();
    g.values().iter().map(|&v| floor + v * v).collect()
}

fn fourier_field(grid: &Arc<Grid>, seed: u64, modes: u32, amp: f64) -> Vec<f64> {
    Preset1d::RandomFourier { seed, modes, amp }.sample(grid).unwrap().values().to_vec()
}

/// Random smooth field with the nodal mean removed. Constants are exact
/// kernel directions of both bilinear-form identities, so a large constant
/// component only dilutes the energy normalization without testing
/// anything; centering keeps every suite field informative.
fn centered_fourier(grid: &Arc<Grid>, seed: u64, modes: u32) -> GridFunction {
    let mut vals = fourier_field(grid, seed, modes, 1.0);
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    for v in &mut vals {
        *v -= mean;
    }
    GridFunction::new(grid.clone(), vals).unwrap()
}

// ---------------------------------------------------------------------------
// 1. Constant data reproduces the constant solution exactly.
// ---------------------------------------------------------------------------
#[test]
fn criterion_01_constant_solution_exactness() {
    let grid = unit_grid(1.0 / 201.0);
    let n = grid.interior_nodes().len();
    assert_eq!(n, 200);
    let q: Vec<f64> =
        grid.interior_xs().iter().map(|&x| 0.7 * (std::f64::consts::PI * x).cos()).collect();
    let mut worst = 0.0f64;
    let mut worst_case = String::new();
    for s in [0.3, 0.5, 0.7] {
        let params = FracParams::new(1, s).unwrap();
        let data =
            ProblemData { a: vec![1.0; n], q: q.clone(), gamma: 1.0, f: vec![1.0; n] };
        let mut sys =
            AssembledSystem::new(grid.clone(), params, QuadPolicy::default(), &data).unwrap();
        for gamma in [0.0, 0.5, 1.0] {
            sys.gamma = gamma;
            let u = if gamma == 0.0 {
                solve_direct_at(&sys, 0.0).unwrap().u
            } else {
                continuation_solve(&sys, ContinuationOptions::default()).unwrap().u
            };
            let err = sup_diff_from_one(&u);
            if err > worst {
                worst = err;
                worst_case = format!("s={s} gamma={gamma}");
            }
        }
    }
    verdict(
        1,
        "constant_solution_exactness",
        worst <= 1e-10,
        &format!("max |u - 1| = {worst:.3e} (worst at {worst_case}, n=200, tol 1e-10)"),
    );
}

// ---------------------------------------------------------------------------
// 2. Zero source forces the zero solution (trivial kernel).
// ---------------------------------------------------------------------------
#[test]
fn criterion_02_trivial_kernel() {
    let grid = unit_grid(0.01);
    let n = grid.interior_nodes().len();
    let mut worst = 0.0f64;
    for trial in 0..10u64 {
        let s = [0.3, 0.5, 0.7][(trial % 3) as usize];
        let gamma = [0.4, 1.0][(trial % 2) as usize];
        let a = positive_field(&grid, 900 + 2 * trial, 0.15);
        let q = fourier_field(&grid, 901 + 2 * trial, 4, 1.2);
        let params = FracParams::new(1, s).unwrap();
        let data = ProblemData { a, q, gamma, f: vec![0.0; n] };
        let sys =
            AssembledSystem::new(grid.clone(), params, QuadPolicy::default(), &data).unwrap();
        let u = continuation_solve(&sys, ContinuationOptions::default()).unwrap().u;
        let sup = u.iter().map(|v| v.abs()).fold(0.0, f64::max);
        worst = worst.max(sup);
    }
    verdict(
        2,
        "trivial_kernel",
        worst <= 1e-10,
        &format!("max ||u||_inf over 10 random (q, a) presets with f = 0: {worst:.3e} (tol 1e-10)"),
    );
}

// ---------------------------------------------------------------------------
// 3. Randomized maximum-principle campaign.
// ---------------------------------------------------------------------------
#[test]
fn criterion_03_max_principle_campaign() {
    let start = Instant::now();
    let report = max_principle_campaign(20260822, 100, 0.05).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let pass = report.failures == 0 && elapsed <= 300.0;
    verdict(
        3,
        "max_principle_campaign",
        pass,
        &format!(
            "100 trials, {} violations, worst interior min {:.2e}, worst range excess {:.2e}, {elapsed:.1}s (limits: 0 violations, 300s)",
            report.failures, report.worst_interior_min, report.worst_range_excess
        ),
    );
}

// ---------------------------------------------------------------------------
// 4. Nonlocal flux residual shrinks at least 2x under grid refinement.
// ---------------------------------------------------------------------------
#[test]
fn criterion_04_nonlocal_flux_refinement() {
    let deltas = [0.05, 0.1, 0.2, 0.4];
    let mut min_ratio = f64::INFINITY;
    let mut min_case = String::new();
    for k in 0..20u64 {
        let s = [0.3, 0.45, 0.6, 0.75][(k % 4) as usize];
        let preset = Preset1d::RandomFourier { seed: 300 + k, modes: 3 + (k % 3) as u32, amp: 1.0 };
        let (_, _, ratio) = neumann_refinement_ratio(&preset, s, 0.04, &deltas).unwrap();
        if ratio < min_ratio {
            min_ratio = ratio;
            min_case = format!("seed={} s={s}", 300 + k);
        }
    }
    verdict(
        4,
        "nonlocal_flux_refinement",
        min_ratio >= 2.0,
        &format!("min residual ratio r(h)/r(h/2) over 20 random fields = {min_ratio:.2} at {min_case} (h=0.04, threshold 2.0)"),
    );
}

// ---------------------------------------------------------------------------
// 5. Bilinear-form identity suite over 3 refinement levels.
// ---------------------------------------------------------------------------
#[test]
fn criterion_05_identity_suite() {
    let levels = [0.1, 0.05, 0.025];
    let mut pass = true;
    let mut detail = String::new();
    let mut finest_ibp = 0.0f64;
    let mut worst_eq = 0.0f64;
    for s in [0.3, 0.5, 0.7] {
        let params = FracParams::new(1, s).unwrap();
        // Max mismatch over the pair suite, one entry per level. A random
        // pair can make the identity value itself nearly cancel, so the
        // mismatch is normalized by the Cauchy-Schwarz scale
        // sqrt(E(u,u) E(v,v)) from the diagonal evaluations, which is the
        // size of the bilinear form and never degenerates.
        let mut eq_max = Vec::new();
        let mut ibp_max = Vec::new();
        for &h in &levels {
            let grid = unit_grid(h);
            let engine = IdentityEngine::new(grid.clone(), params, QuadPolicy::default()).unwrap();
            let (mut eq_m, mut ibp_m) = (0.0f64, 0.0f64);
            for j in 0..10u64 {
                let u = centered_fourier(&grid, 400 + 2 * j, 3);
                let v = centered_fourier(&grid, 401 + 2 * j, 4);
                let (eq_uv, ibp_uv) = engine.pair_reports(&u, &v).unwrap();
                let (eq_uu, ibp_uu) = engine.pair_reports(&u, &u).unwrap();
                let (eq_vv, ibp_vv) = engine.pair_reports(&v, &v).unwrap();
                let eq_scale = (eq_uu.lhs * eq_vv.lhs).sqrt().max(1e-300);
                let ibp_scale = (ibp_uu.lhs * ibp_vv.lhs).sqrt().max(1e-300);
                eq_m = eq_m.max(eq_uv.abs_err / eq_scale);
                ibp_m = ibp_m.max(ibp_uv.abs_err / ibp_scale);
            }
            eq_max.push(eq_m);
            ibp_max.push(ibp_m);
        }
        worst_eq = worst_eq.max(eq_max.iter().cloned().fold(0.0, f64::max));
        finest_ibp = finest_ibp.max(*ibp_max.last().unwrap());
        for lvl in 1..levels.len() {
            if eq_max[lvl] > eq_max[lvl - 1] * TREND_SLACK + TREND_FLOOR {
                pass = false;
                detail.push_str(&format!("equivalence trend broken at s={s}: {eq_max:?}; "));
            }
            if ibp_max[lvl] > ibp_max[lvl - 1] * TREND_SLACK + TREND_FLOOR {
                pass = false;
                detail.push_str(&format!("pairing trend broken at s={s}: {ibp_max:?}; "));
            }
        }
    }
    if worst_eq > EQUIV_TOL {
        pass = false;
        detail.push_str(&format!("equivalence mismatch {worst_eq:.2e} > {EQUIV_TOL:.0e}; "));
    }
    if finest_ibp > IBP_FINEST_TOL {
        pass = false;
        detail.push_str(&format!("finest pairing mismatch {finest_ibp:.2e} > {IBP_FINEST_TOL:.0e}; "));
    }
    verdict(
        5,
        "identity_suite",
        pass,
        &format!(
            "10 pairs x 3 s x 3 levels: equivalence max {worst_eq:.2e} (tol {EQUIV_TOL:.0e}), pairing finest max {finest_ibp:.2e} (tol {IBP_FINEST_TOL:.0e}), trends non-increasing within 5% + {TREND_FLOOR:.0e}. {detail}"
        ),
    );
}

// ---------------------------------------------------------------------------
// 6. Exterior gradient blow-up exponents and boundary-factor slopes.
// ---------------------------------------------------------------------------
#[test]
fn criterion_06_gradient_blowup_exponents() {
    let grid = unit_grid(1.0 / 201.0);
    let policy = QuadPolicy::default();
    let linear = GridFunction::from_fn(grid.clone(), |p| p.scalar()).unwrap();
    let smooth =
        GridFunction::from_fn(grid.clone(), |p| (2.0 * p.scalar()).sin() + p.scalar()).unwrap();

    let mut pass = true;
    let mut parts = Vec::new();

    let p25 = FracParams::new(1, 0.25).unwrap();
    match exterior_gradient_rate(&linear, &p25, policy).unwrap() {
        GradientRate::Fitted(f) => {
            let ok = f.slope >= -0.6 && f.slope <= -0.4 && !f.comparison.prefers_log;
            pass &= ok;
            parts.push(format!("s=0.25 slope {:.3} in [-0.6,-0.4] power-law: {ok}", f.slope));
        }
        GradientRate::Flat => {
            pass = false;
            parts.push("s=0.25 unexpectedly flat".into());
        }
    }

    let p75 = FracParams::new(1, 0.75).unwrap();
    match exterior_gradient_rate(&smooth, &p75, policy).unwrap() {
        GradientRate::Fitted(f) => {
            let ok = f.slope >= -0.1;
            pass &= ok;
            parts.push(format!("s=0.75 slope {:.3} >= -0.1: {ok}", f.slope));
        }
        GradientRate::Flat => parts.push("s=0.75 flat (bounded gradient)".into()),
    }

    let p50 = FracParams::new(1, 0.5).unwrap();
    match exterior_gradient_rate(&linear, &p50, policy).unwrap() {
        GradientRate::Fitted(f) => {
            let ok = f.comparison.prefers_log;
            pass &= ok;
            parts.push(format!("s=0.5 log model preferred: {ok}"));
        }
        GradientRate::Flat => {
            pass = false;
            parts.push("s=0.5 unexpectedly flat".into());
        }
    }

    let domain = Domain::interval(0.0, 1.0).unwrap();
    for s in [0.25, 0.5, 0.75] {
        let fit = boundary_factor_slope(&domain, s, policy).unwrap();
        let ok = (fit.slope + 2.0 * s).abs() <= 0.05;
        pass &= ok;
        parts.push(format!("F-slope(s={s}) {:.3} vs {:.1} +/- 0.05: {ok}", fit.slope, -2.0 * s));
    }

    verdict(6, "gradient_blowup_exponents", pass, &parts.join("; "));
}

// ---------------------------------------------------------------------------
// 7. Contraction factor is linear in eps and below 1 at eps = 0.05.
// ---------------------------------------------------------------------------
#[test]
fn criterion_07_contraction_linearity() {
    let grid = unit_grid(0.01);
    let n = grid.interior_nodes().len();
    let eps_values = [0.01, 0.02, 0.05, 0.1];
    let mut pass = true;
    let mut parts = Vec::new();
    for s in [0.3, 0.5, 0.7] {
        let params = FracParams::new(1, s).unwrap();
        let data = ProblemData::constant_coeffs(n, 1.0, 0.4, 1.0, vec![1.0; n]);
        let sys =
            AssembledSystem::new(grid.clone(), params, QuadPolicy::default(), &data).unwrap();
        let rhos: Vec<f64> =
            eps_values.iter().map(|&e| contraction_factor(&sys, 0.5, e).unwrap()).collect();
        let fit = fit_line(&eps_values, &rhos).unwrap();
        let rho_05 = rhos[2];
        let ok = fit.r_squared >= 0.99 && rho_05 < 1.0;
        pass &= ok;
        parts.push(format!(
            "s={s}: R^2 {:.6}, rho(0.05) {:.3e}, slope {:.3e}, intercept {:.1e}: {ok}",
            fit.r_squared, rho_05, fit.slope, fit.intercept
        ));
    }
    verdict(
        7,
        "contraction_linearity",
        pass,
        &format!("{} (require R^2 >= 0.99 and rho(0.05) < 1)", parts.join("; ")),
    );
}

// ---------------------------------------------------------------------------
// 8. Continuation agrees with the direct solve at gamma = 1.
// ---------------------------------------------------------------------------
#[test]
fn criterion_08_continuation_vs_direct() {
    let grid = unit_grid(1.0 / 201.0);
    let mut worst = 0.0f64;
    let mut worst_case = String::new();
    for trial in 0..10u64 {
        let s = [0.3, 0.5, 0.7][(trial % 3) as usize];
        let a = positive_field(&grid, 700 + 3 * trial, 0.3);
        let q = fourier_field(&grid, 701 + 3 * trial, 4, 1.0);
        let f = fourier_field(&grid, 702 + 3 * trial, 5, 1.0);
        let params = FracParams::new(1, s).unwrap();
        let data = ProblemData { a, q, gamma: 1.0, f };
        let sys =
            AssembledSystem::new(grid.clone(), params, QuadPolicy::default(), &data).unwrap();
        let direct = solve_direct(&sys).unwrap();
        let cont = continuation_solve(&sys, ContinuationOptions::default()).unwrap();
        let diff = direct
            .u
            .iter()
            .zip(&cont.u)
            .map(|(&x, &y)| (x - y).abs())
            .fold(0.0, f64::max);
        if diff > worst {
            worst = diff;
            worst_case = format!("trial {trial} (s={s})");
        }
    }
    verdict(
        8,
        "continuation_vs_direct",
        worst <= 1e-8,
        &format!("max ||u_cont - u_direct||_inf over 10 presets at n=200: {worst:.3e} (worst {worst_case}, tol 1e-8)"),
    );
}

// ---------------------------------------------------------------------------
// 9. Production operator and kernel match brute-force oracles.
// ---------------------------------------------------------------------------
#[test]
fn criterion_09_brute_force_oracles() {
    let domain = Domain::interval(0.0, 1.0).unwrap();
    let h = 1.0 / 34.0;
    let grid = Arc::new(build_grid(&domain, h, R_TRUNC, ShellPolicy::default()).unwrap());
    assert_eq!(grid.interior_nodes().len(), 33);
    let policy = QuadPolicy::default();
    let u = Preset1d::RandomFourier { seed: 31, modes: 5, amp: 1.0 }.sample(&grid).unwrap();

    let mut op_abs = 0.0f64;
    let mut ker_rel = 0.0f64;
    for s in [0.3, 0.5, 0.7] {
        let params = FracParams::new(1, s).unwrap();
        let ext = extend(&u, &params, policy).unwrap();
        for mode in [TailMode::FarFieldMean, TailMode::TruncatedNoTail] {
            let op = FracOperator::new(grid.clone(), params, policy, mode).unwrap();
            for i in 0..33 {
                let prod = op.apply_cached(&ext, i).unwrap();
                let orc = oracle_frac_laplacian(&ext, i, &params, mode).unwrap();
                op_abs = op_abs.max((prod - orc).abs());
            }
        }
        let rk = RegionalKernel::new(&domain, &params, R_TRUNC, policy).unwrap();
        for (x, y) in [(0.3, 0.7), (0.25, 0.5), (0.6, 0.9), (0.45, 0.55)] {
            let prod = rk.k_aux(x, y);
            let orc =
                oracle_regional_kernel(&domain, &params, R_TRUNC, policy, x, y, 4000).unwrap();
            ker_rel = ker_rel.max((prod - orc).abs() / prod.abs().max(orc.abs()));
        }
    }
    let pass = op_abs <= 1e-8 && ker_rel <= 1e-6;
    verdict(
        9,
        "brute_force_oracles",
        pass,
        &format!("operator max-abs diff {op_abs:.3e} (tol 1e-8), kernel max-rel diff {ker_rel:.3e} (tol 1e-6), n=33"),
    );
}

// ---------------------------------------------------------------------------
// 10. Norm-ratio stability under refinement (second-order regularity
//     surrogate).
// ---------------------------------------------------------------------------
#[test]
fn criterion_10_norm_ratio_stability() {
    let mut pass = true;
    let mut parts = Vec::new();
    for (s, p) in [(0.35, 2.0), (0.5, 3.0), (0.6, 2.0)] {
        let norms = w2p_norm_scan(s, p, 0.1, 3).unwrap();
        let ratios: Vec<f64> = norms.iter().map(|(u, f)| u / f).collect();
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(0.0f64, f64::max);
        let variation = (hi - lo) / lo;
        let ok = variation < 0.2;
        pass &= ok;
        parts.push(format!(
            "(s={s}, p={p}): ratios [{}], variation {:.1}%: {ok}",
            ratios.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>().join(", "),
            variation * 100.0
        ));
    }
    verdict(
        10,
        "norm_ratio_stability",
        pass,
        &format!("{} (require variation < 20%)", parts.join("; ")),
    );
}
