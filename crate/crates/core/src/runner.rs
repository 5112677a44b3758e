//! Experiment dispatcher behind the CLI: builds problems from a run
//! configuration, executes one experiment per subcommand, and writes CSV
//! and summary artifacts. Every output file starts with a provenance header
//! (config hash, seed, parameters, tolerances), rows are formatted with
//! fixed precision, and files land atomically (temp file + rename), so the
//! same config and seed reproduce byte-identical outputs.

use crate::config::{parse_preset, RunConfig};
use crate::extension::{extend, GridFunction};
use crate::geometry::{build_grid, Domain, Grid};
use crate::kernels::{FracParams, QuadPolicy, RegionalKernel};
use crate::operators::{FracOperator, TailMode};
use crate::presets::Preset1d;
use crate::solver::{
    continuation_solve, solve_direct, AssembledSystem, ProblemData, SOLVE_TOL,
};
use crate::verification::{
    boundary_factor_slope, max_principle_campaign, oracle_frac_laplacian,
    oracle_regional_kernel, seminorms, IdentityEngine,
};
use crate::{Error, Result};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Relative tolerance the oracle table applies to the operator comparison.
pub const ORACLE_OPERATOR_RTOL: f64 = 1e-8;
/// Relative tolerance the oracle table applies to the kernel comparison.
pub const ORACLE_KERNEL_RTOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Solve,
    Verify,
    Rates,
    Oracle,
    MaxPrinciple,
}

/// Everything a run needs beyond the config: provenance hash, resolved
/// output directory, and the effective seed.
pub struct RunContext {
    pub cfg: RunConfig,
    pub config_hash: u64,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl RunContext {
    pub fn new(
        cfg: RunConfig,
        config_hash: u64,
        out_override: Option<PathBuf>,
        seed_override: Option<u64>,
    ) -> Result<Self> {
        let out_dir = out_override.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
        std::fs::create_dir_all(&out_dir)
            .map_err(|e| Error::Config(format!("cannot create {}: {e}", out_dir.display())))?;
        let seed = seed_override.unwrap_or(cfg.seed);
        Ok(RunContext { cfg, config_hash, out_dir, seed })
    }

    fn header(&self, s_desc: &str, h: f64, tolerances: &str) -> String {
        format!(
            "# config_hash=0x{:016x} seed={} s={} h={} r_trunc={} tolerances={}\n",
            self.config_hash, self.seed, s_desc, h, self.cfg.grid.r_trunc, tolerances
        )
    }

    fn interval_grid(&self, h: f64) -> Result<Arc<Grid>> {
        let domain = self.cfg.domain.build()?;
        if domain.dim() != 1 {
            return Err(Error::Config(
                "this experiment supports interval domains only; the disk supports geometry, boundary-factor, extension, and rate measurements".into(),
            ));
        }
        Ok(Arc::new(build_grid(&domain, h, self.cfg.grid.r_trunc, self.cfg.grid.shell_policy())?))
    }
}

pub fn run(cmd: Command, ctx: &RunContext) -> Result<()> {
    if let Some(w) = ctx.cfg.sp_range_warning() {
        eprintln!("{w}");
    }
    match cmd {
        Command::Solve => cmd_solve(ctx),
        Command::Verify => cmd_verify(ctx),
        Command::Rates => cmd_rates(ctx),
        Command::Oracle => cmd_oracle(ctx),
        Command::MaxPrinciple => cmd_maxprinciple(ctx),
    }
}

/// Write through a temp file in the same directory so readers never see a
/// half-written artifact and reruns replace files atomically.
fn atomic_write(path: &Path, content: &str) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("bad output path {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn fmt_f(v: f64) -> String {
    format!("{v:.12e}")
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

fn build_system(ctx: &RunContext) -> Result<(Arc<Grid>, AssembledSystem)> {
    let grid = ctx.interval_grid(ctx.cfg.grid.h)?;
    let a_preset = parse_preset(&ctx.cfg.coefficients.a)?;
    let q_preset = parse_preset(&ctx.cfg.coefficients.q)?;
    let f_preset = parse_preset(&ctx.cfg.coefficients.f)?;
    let a = a_preset.sample(&grid)?.values().to_vec();
    let q = q_preset.sample(&grid)?.values().to_vec();
    let f = f_preset.sample(&grid)?.values().to_vec();
    if a.iter().any(|&v| v < 0.0) {
        return Err(Error::Config(
            "coefficients.a evaluates negative on the grid; the reaction must be nonnegative".into(),
        ));
    }
    if a.iter().all(|&v| v == 0.0) {
        return Err(Error::Config(
            "coefficients.a vanishes identically; the operator would be singular".into(),
        ));
    }
    let data = ProblemData { a, q, gamma: ctx.cfg.solver.gamma, f };
    let params = FracParams::new(1, ctx.cfg.frac.s)?;
    let sys = AssembledSystem::new(grid.clone(), params, QuadPolicy::default(), &data)?;
    Ok((grid, sys))
}

fn cmd_solve(ctx: &RunContext) -> Result<()> {
    let (grid, sys) = build_system(ctx)?;
    let gamma = ctx.cfg.solver.gamma;
    let s = ctx.cfg.frac.s;
    let h = grid.h();
    let tol_desc = format!(
        "solve_tol={SOLVE_TOL:e},fp_tol={:e},eps_floor={:e}",
        ctx.cfg.solver.fp_tol, ctx.cfg.solver.eps_floor
    );

    let (u, trace, mode, final_residual) = if gamma == 0.0 {
        let d = solve_direct(&sys)?;
        (d.u, Vec::new(), "direct", d.residual_inf)
    } else {
        let r = continuation_solve(&sys, ctx.cfg.solver.continuation_options())?;
        let res = r.trace.last().map(|t| t.residual).unwrap_or(0.0);
        (r.u, r.trace, "continuation", res)
    };

    let mut sol = ctx.header(&s.to_string(), h, &tol_desc);
    sol.push_str("x,u\n");
    for (x, v) in grid.interior_xs().iter().zip(&u) {
        let _ = writeln!(sol, "{},{}", fmt_f(*x), fmt_f(*v));
    }
    atomic_write(&ctx.out_dir.join("solution.csv"), &sol)?;

    let mut tr = ctx.header(&s.to_string(), h, &tol_desc);
    tr.push_str("gamma,eps,iters,residual,rho,sup_norm\n");
    for step in &trace {
        let _ = writeln!(
            tr,
            "{},{},{},{},{},{}",
            fmt_f(step.gamma),
            fmt_f(step.eps),
            step.iters,
            fmt_f(step.residual),
            fmt_f(step.rho),
            fmt_f(step.sup_norm)
        );
    }
    atomic_write(&ctx.out_dir.join("trace.csv"), &tr)?;

    let sup = u.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let min_u = u.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_u = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let violations = u.iter().filter(|&&v| v < -1e-8 * sup.max(1.0)).count();
    let mut sm = ctx.header(&s.to_string(), h, &tol_desc);
    let _ = writeln!(sm, "mode={mode}");
    let _ = writeln!(sm, "gamma={gamma}");
    let _ = writeln!(sm, "n={}", u.len());
    let _ = writeln!(sm, "sup_norm={}", fmt_f(sup));
    let _ = writeln!(sm, "min_u={}", fmt_f(min_u));
    let _ = writeln!(sm, "max_u={}", fmt_f(max_u));
    let _ = writeln!(sm, "violations={violations}");
    let _ = writeln!(sm, "final_residual={}", fmt_f(final_residual));
    let _ = writeln!(sm, "continuation_steps={}", trace.len());
    atomic_write(&ctx.out_dir.join("solve_summary.txt"), &sm)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

fn cmd_verify(ctx: &RunContext) -> Result<()> {
    let s = ctx.cfg.frac.s;
    let params = FracParams::new(1, s)?;
    let policy = QuadPolicy::default();
    let tol_desc = "identity_rel=2e-2";

    let mut ids = ctx.header(&s.to_string(), ctx.cfg.grid.h, tol_desc);
    ids.push_str("level,pair,identity,s,h,r_trunc,lhs,rhs,abs_err,rel_err,flux_term\n");
    let mut sems = ctx.header(&s.to_string(), ctx.cfg.grid.h, tol_desc);
    sems.push_str("level,pair,s,h,gagliardo,regional,l1s_tilde,grad_sq,omega_sq,cross_sq,kform_sq\n");

    for level in 0..ctx.cfg.verify.levels {
        let h = ctx.cfg.grid.h / 2f64.powi(level as i32);
        let grid = ctx.interval_grid(h)?;
        let engine = IdentityEngine::new(grid.clone(), params, policy)?;
        for pair in 0..ctx.cfg.verify.pairs {
            let base = ctx.seed.wrapping_mul(1000).wrapping_add(2 * pair as u64);
            let u = Preset1d::RandomFourier { seed: base, modes: 4, amp: 1.0 }.sample(&grid)?;
            let v =
                Preset1d::RandomFourier { seed: base + 1, modes: 5, amp: 1.0 }.sample(&grid)?;
            let (eq, ibp) = engine.pair_reports(&u, &v)?;
            for rep in [eq, ibp] {
                let _ = writeln!(
                    ids,
                    "{level},{pair},{},{},{},{},{},{},{},{},{}",
                    rep.name,
                    rep.s,
                    rep.h,
                    rep.r_trunc,
                    fmt_f(rep.lhs),
                    fmt_f(rep.rhs),
                    fmt_f(rep.abs_err),
                    fmt_f(rep.rel_err),
                    fmt_f(rep.flux_term)
                );
            }
            let sr = seminorms(&u, &params, policy)?;
            let _ = writeln!(
                sems,
                "{level},{pair},{s},{h},{},{},{},{},{},{},{}",
                fmt_f(sr.gagliardo),
                fmt_f(sr.regional),
                fmt_f(sr.l1s_tilde),
                fmt_f(sr.grad_sq),
                fmt_f(sr.omega_sq),
                fmt_f(sr.cross_sq),
                fmt_f(sr.kform_sq)
            );
        }
    }
    atomic_write(&ctx.out_dir.join("identities.csv"), &ids)?;
    atomic_write(&ctx.out_dir.join("seminorms.csv"), &sems)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// rates
// ---------------------------------------------------------------------------

fn cmd_rates(ctx: &RunContext) -> Result<()> {
    use crate::extension::{exterior_gradient_rate, GradientRate};
    let domain = ctx.cfg.domain.build()?;
    let h = ctx.cfg.rates.h;
    let grid = Arc::new(build_grid(&domain, h, ctx.cfg.grid.r_trunc, ctx.cfg.grid.shell_policy())?);
    let policy = QuadPolicy::default();

    // Deterministic smooth fields with nonzero boundary derivative, so the
    // generic exterior-gradient behavior is visible: cosine presets are
    // boundary-flat and would underreport the blow-up.
    let u = match grid.domain() {
        Domain::Interval { a, b } => {
            let (a, b) = (*a, *b);
            GridFunction::from_fn(grid.clone(), move |p| {
                let t = (p.scalar() - a) / (b - a);
                (2.0 * t).sin() + t
            })?
        }
        Domain::Disk { center, radius } => {
            let (cx, cy, r) = (center[0], center[1], *radius);
            GridFunction::from_fn(grid.clone(), |p| {
                let dx = (p.coord(0) - cx - 0.3 * r) / r;
                let dy = (p.coord(1) - cy) / r;
                (-(dx * dx + dy * dy) / 0.18).exp()
            })?
        }
    };

    let s_desc = ctx
        .cfg
        .rates
        .s_values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let mut out = ctx.header(&s_desc, h, "band=2*stderr");
    out.push_str(
        "s,h,power_slope,power_band,power_r2,log_slope,log_stderr,aic_power,aic_log,prefers_log,f_slope,f_slope_stderr\n",
    );
    for &s in &ctx.cfg.rates.s_values {
        let params = FracParams::new(grid.domain().dim(), s)?;
        let fit = boundary_factor_slope(grid.domain(), s, policy)?;
        match exterior_gradient_rate(&u, &params, policy)? {
            GradientRate::Fitted(g) => {
                let _ = writeln!(
                    out,
                    "{s},{h},{},{},{},{},{},{},{},{},{},{}",
                    fmt_f(g.slope),
                    fmt_f(g.band),
                    fmt_f(g.comparison.power.r_squared),
                    fmt_f(g.comparison.log.slope),
                    fmt_f(g.comparison.log.stderr_slope),
                    fmt_f(g.comparison.aic_power),
                    fmt_f(g.comparison.aic_log),
                    g.comparison.prefers_log,
                    fmt_f(fit.slope),
                    fmt_f(fit.stderr_slope)
                );
            }
            GradientRate::Flat => {
                let _ = writeln!(
                    out,
                    "{s},{h},flat,flat,flat,flat,flat,flat,flat,false,{},{}",
                    fmt_f(fit.slope),
                    fmt_f(fit.stderr_slope)
                );
            }
        }
    }
    atomic_write(&ctx.out_dir.join("rates.csv"), &out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// oracle
// ---------------------------------------------------------------------------

fn cmd_oracle(ctx: &RunContext) -> Result<()> {
    let domain = ctx.cfg.domain.build()?;
    if domain.dim() != 1 {
        return Err(Error::Config("oracle comparisons are interval-only".into()));
    }
    let (a, b) = match &domain {
        Domain::Interval { a, b } => (*a, *b),
        _ => unreachable!(),
    };
    let n = ctx.cfg.oracle.n;
    let h = (b - a) / (n + 1) as f64;
    let grid = Arc::new(build_grid(&domain, h, ctx.cfg.grid.r_trunc, ctx.cfg.grid.shell_policy())?);
    let policy = QuadPolicy::default();
    let u = Preset1d::RandomFourier { seed: ctx.seed, modes: 5, amp: 1.0 }.sample(&grid)?;

    let s_desc = ctx
        .cfg
        .oracle
        .s_values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let tol_desc =
        format!("operator_rel={ORACLE_OPERATOR_RTOL:e},kernel_rel={ORACLE_KERNEL_RTOL:e}");
    let mut out = ctx.header(&s_desc, h, &tol_desc);
    out.push_str("check,s,n,h,max_abs_diff,max_rel_diff,tolerance,pass\n");

    for &s in &ctx.cfg.oracle.s_values {
        let params = FracParams::new(1, s)?;
        let ext = extend(&u, &params, policy)?;
        let mut max_abs = 0.0f64;
        let mut max_rel = 0.0f64;
        for mode in [TailMode::FarFieldMean, TailMode::TruncatedNoTail] {
            let op = FracOperator::new(grid.clone(), params, policy, mode)?;
            for i in 0..grid.interior_nodes().len() {
                let prod = op.apply_cached(&ext, i)?;
                let orc = oracle_frac_laplacian(&ext, i, &params, mode)?;
                let abs = (prod - orc).abs();
                max_abs = max_abs.max(abs);
                max_rel = max_rel.max(abs / prod.abs().max(orc.abs()).max(1e-10));
            }
        }
        let pass = max_rel <= ORACLE_OPERATOR_RTOL;
        let _ = writeln!(
            out,
            "fractional_operator,{s},{n},{h},{},{},{ORACLE_OPERATOR_RTOL:e},{pass}",
            fmt_f(max_abs),
            fmt_f(max_rel)
        );

        let rk = RegionalKernel::new(&domain, &params, ctx.cfg.grid.r_trunc, policy)?;
        let mut kmax_abs = 0.0f64;
        let mut kmax_rel = 0.0f64;
        for (tx, ty) in [(0.3, 0.7), (0.25, 0.5), (0.6, 0.9), (0.45, 0.55)] {
            let (x, y) = (a + tx * (b - a), a + ty * (b - a));
            let prod = rk.k_aux(x, y);
            let orc = oracle_regional_kernel(
                &domain,
                &params,
                ctx.cfg.grid.r_trunc,
                policy,
                x,
                y,
                4000,
            )?;
            let abs = (prod - orc).abs();
            kmax_abs = kmax_abs.max(abs);
            kmax_rel = kmax_rel.max(abs / prod.abs().max(orc.abs()).max(1e-300));
        }
        let pass = kmax_rel <= ORACLE_KERNEL_RTOL;
        let _ = writeln!(
            out,
            "regional_kernel,{s},{n},{h},{},{},{ORACLE_KERNEL_RTOL:e},{pass}",
            fmt_f(kmax_abs),
            fmt_f(kmax_rel)
        );
    }
    atomic_write(&ctx.out_dir.join("oracle.csv"), &out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// maximum-principle campaign
// ---------------------------------------------------------------------------

fn cmd_maxprinciple(ctx: &RunContext) -> Result<()> {
    let report =
        max_principle_campaign(ctx.seed, ctx.cfg.campaign.trials, ctx.cfg.campaign.h)?;
    let tol_desc = "interior_min=-1e-8*scale,range_excess=1e-9";
    let mut out = ctx.header("sampled", ctx.cfg.campaign.h, tol_desc);
    out.push_str(
        "index,s,gamma,q,a_min,f_max,min_u,interp_lo,interp_hi,ext_lo,ext_hi,interior_ok,range_ok\n",
    );
    for r in &report.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.index,
            fmt_f(r.s),
            fmt_f(r.gamma),
            fmt_f(r.q),
            fmt_f(r.a_min),
            fmt_f(r.f_max),
            fmt_f(r.min_u),
            fmt_f(r.interp_lo),
            fmt_f(r.interp_hi),
            fmt_f(r.ext_lo),
            fmt_f(r.ext_hi),
            r.interior_ok,
            r.range_ok
        );
    }
    atomic_write(&ctx.out_dir.join("campaign.csv"), &out)?;

    let mut sm = ctx.header("sampled", ctx.cfg.campaign.h, tol_desc);
    let _ = writeln!(sm, "trials={}", report.trials);
    let _ = writeln!(sm, "failures={}", report.failures);
    let _ = writeln!(sm, "worst_interior_min={}", fmt_f(report.worst_interior_min));
    let _ = writeln!(sm, "worst_range_excess={}", fmt_f(report.worst_range_excess));
    atomic_write(&ctx.out_dir.join("maxprinciple_summary.txt"), &sm)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;

    fn ctx_with(out: &Path, toml_text: &str) -> RunContext {
        let cfg: RunConfig = toml::from_str(toml_text).unwrap();
        cfg.validate().unwrap();
        RunContext::new(cfg, 0xabcd, Some(out.to_path_buf()), None).unwrap()
    }

    const BASE: &str = r#"
seed = 11

[domain]
kind = "interval"
a = 0.0
b = 1.0

[grid]
h = 0.05
r_trunc = 4.0

[frac]
s = 0.4

[coefficients]
a = "1"
q = "cos(1, 0.3)"
f = "gauss(0.5, 0.2, 1.0)"

[solver]
gamma = 0.5

[verify]
levels = 2
pairs = 1

[oracle]
n = 9
s_values = [0.5]

[campaign]
trials = 3
h = 0.05
"#;

    #[test]
    fn solve_writes_deterministic_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let ctx = ctx_with(dir.path(), BASE);
        run(Command::Solve, &ctx).unwrap();
        let sol1 = std::fs::read_to_string(dir.path().join("solution.csv")).unwrap();
        let tr1 = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
        assert!(sol1.starts_with("# config_hash=0x000000000000abcd seed=11 s=0.4 h=0.05"));
        assert!(sol1.lines().count() > 10);
        assert!(tr1.lines().nth(1).unwrap().starts_with("gamma,eps"));

        run(Command::Solve, &ctx).unwrap();
        let sol2 = std::fs::read_to_string(dir.path().join("solution.csv")).unwrap();
        assert_eq!(sol1, sol2, "rerun must be byte-identical");

        let sm = std::fs::read_to_string(dir.path().join("solve_summary.txt")).unwrap();
        assert!(sm.contains("mode=continuation"));
        assert!(sm.contains("violations=0"));
    }

    #[test]
    fn verify_and_campaign_write_expected_shapes() {
        let dir = tempfile::tempdir().unwrap();
        let ctx = ctx_with(dir.path(), BASE);
        run(Command::Verify, &ctx).unwrap();
        let ids = std::fs::read_to_string(dir.path().join("identities.csv")).unwrap();
        // 2 levels x 1 pair x 2 identities + header comment + column line
        assert_eq!(ids.lines().count(), 2 + 4);
        assert!(ids.contains("regional_equivalence"));
        assert!(ids.contains("operator_pairing"));

        run(Command::MaxPrinciple, &ctx).unwrap();
        let sm = std::fs::read_to_string(dir.path().join("maxprinciple_summary.txt")).unwrap();
        assert!(sm.contains("failures=0"), "{sm}");
    }

    #[test]
    fn oracle_table_passes_at_small_n() {
        let dir = tempfile::tempdir().unwrap();
        let ctx = ctx_with(dir.path(), BASE);
        run(Command::Oracle, &ctx).unwrap();
        let table = std::fs::read_to_string(dir.path().join("oracle.csv")).unwrap();
        for line in table.lines().skip(2) {
            assert!(line.ends_with(",true"), "oracle row failed: {line}");
        }
    }

    #[test]
    fn disk_solve_is_a_config_error() {
        let disk = r#"
[domain]
kind = "disk"
center = [0.0, 0.0]
radius = 1.0

[grid]
h = 0.05
r_trunc = 8.0

[frac]
s = 0.4
"#;
        let dir = tempfile::tempdir().unwrap();
        let ctx = ctx_with(dir.path(), disk);
        let err = run(Command::Solve, &ctx).unwrap_err();
        assert!(err.is_config(), "{err}");
    }
}
