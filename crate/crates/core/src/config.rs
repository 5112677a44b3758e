//! Run configuration: TOML on disk, validated into typed settings, hashed
//! for output provenance. Analytic coefficient presets are referenced by
//! name (`"const(1)"`, `"cos(2,0.5)"`, `"gauss(0.3,0.1,1)"`,
//! `"poly(0.5,-1,1.5)"`, `"rf(7,4,1)"`, or a bare number) so a config file
//! fully determines a run without embedded code.

use crate::geometry::{Domain, ShellPolicy};
use crate::presets::Preset1d;
use crate::solver::ContinuationOptions;
use crate::{Error, Result};
use serde::Deserialize;
use std::path::Path;

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DomainConfig {
    Interval { a: f64, b: f64 },
    Disk { center: [f64; 2], radius: f64 },
}

impl DomainConfig {
    pub fn build(&self) -> Result<Domain> {
        match *self {
            DomainConfig::Interval { a, b } => Domain::interval(a, b),
            DomainConfig::Disk { center, radius } => Domain::disk(center, radius),
        }
        .map_err(|e| cfg_err(format!("domain: {e}")))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub h: f64,
    pub r_trunc: f64,
    #[serde(default = "default_inward_ratio")]
    pub inward_ratio: f64,
    #[serde(default = "default_outward_ratio")]
    pub outward_ratio: f64,
    #[serde(default = "default_n_theta")]
    pub n_theta: usize,
}

fn default_inward_ratio() -> f64 {
    ShellPolicy::default().inward_ratio
}
fn default_outward_ratio() -> f64 {
    ShellPolicy::default().outward_ratio
}
fn default_n_theta() -> usize {
    ShellPolicy::default().n_theta
}

impl GridConfig {
    pub fn shell_policy(&self) -> ShellPolicy {
        ShellPolicy {
            inward_ratio: self.inward_ratio,
            outward_ratio: self.outward_ratio,
            n_theta: self.n_theta,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FracConfig {
    pub s: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffConfig {
    /// Reaction coefficient a(x) >= 0, as a preset.
    #[serde(default = "default_one")]
    pub a: String,
    /// Drift coefficient q(x), as a preset.
    #[serde(default = "default_zero")]
    pub q: String,
    /// Source term f(x), as a preset.
    #[serde(default = "default_one")]
    pub f: String,
}

fn default_one() -> String {
    "const(1)".to_owned()
}

fn default_zero() -> String {
    "const(0)".to_owned()
}

impl Default for CoeffConfig {
    fn default() -> Self {
        CoeffConfig { a: default_one(), q: default_zero(), f: default_one() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Nonlocal coupling strength the continuation targets.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_eps0")]
    pub eps0: f64,
    #[serde(default = "default_eps_floor")]
    pub eps_floor: f64,
    #[serde(default = "default_fp_tol")]
    pub fp_tol: f64,
    #[serde(default = "default_max_fp_iters")]
    pub max_fp_iters: usize,
}

fn default_gamma() -> f64 {
    1.0
}
fn default_eps0() -> f64 {
    ContinuationOptions::default().eps0
}
fn default_eps_floor() -> f64 {
    ContinuationOptions::default().eps_floor
}
fn default_fp_tol() -> f64 {
    ContinuationOptions::default().fp_tol
}
fn default_max_fp_iters() -> usize {
    ContinuationOptions::default().max_fp_iters
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            gamma: default_gamma(),
            eps0: default_eps0(),
            eps_floor: default_eps_floor(),
            fp_tol: default_fp_tol(),
            max_fp_iters: default_max_fp_iters(),
        }
    }
}

impl SolverConfig {
    pub fn continuation_options(&self) -> ContinuationOptions {
        ContinuationOptions {
            eps0: self.eps0,
            eps_floor: self.eps_floor,
            fp_tol: self.fp_tol,
            max_fp_iters: self.max_fp_iters,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Grid refinement levels h, h/2, h/4, ...
    #[serde(default = "default_levels")]
    pub levels: usize,
    /// Number of random field pairs per level.
    #[serde(default = "default_pairs")]
    pub pairs: usize,
}

fn default_levels() -> usize {
    3
}
fn default_pairs() -> usize {
    3
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { levels: default_levels(), pairs: default_pairs() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    #[serde(default = "default_rate_s")]
    pub s_values: Vec<f64>,
    /// Grid spacing for the rate grids (finer than solve grids; the fit
    /// window is the inward shell ladder [h^2, h]).
    #[serde(default = "default_rate_h")]
    pub h: f64,
}

fn default_rate_s() -> Vec<f64> {
    vec![0.25, 0.5, 0.75]
}
fn default_rate_h() -> f64 {
    1.0 / 201.0
}

impl Default for RatesConfig {
    fn default() -> Self {
        RatesConfig { s_values: default_rate_s(), h: default_rate_h() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    /// Interior node count of the comparison grid (kept small; the oracle
    /// is exhaustive).
    #[serde(default = "default_oracle_n")]
    pub n: usize,
    #[serde(default = "default_oracle_s")]
    pub s_values: Vec<f64>,
}

fn default_oracle_n() -> usize {
    33
}
fn default_oracle_s() -> Vec<f64> {
    vec![0.3, 0.5, 0.7]
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { n: default_oracle_n(), s_values: default_oracle_s() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_campaign_h")]
    pub h: f64,
}

fn default_trials() -> usize {
    100
}
fn default_campaign_h() -> f64 {
    0.05
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig { trials: default_trials(), h: default_campaign_h() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: String,
}

fn default_out_dir() -> String {
    "out".to_owned()
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_out_dir() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Lebesgue exponent for the surrogate-norm diagnostics.
    #[serde(default = "default_p")]
    pub p: f64,
    pub domain: DomainConfig,
    pub grid: GridConfig,
    pub frac: FracConfig,
    #[serde(default)]
    pub coefficients: CoeffConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub rates: RatesConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub campaign: CampaignConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_p() -> f64 {
    3.0
}

impl RunConfig {
    /// Parse, hash, and validate a config file. The hash covers the raw
    /// bytes, so any textual change shows up in output provenance.
    pub fn load(path: &Path) -> Result<(RunConfig, u64)> {
        let bytes = std::fs::read(path)
            .map_err(|e| cfg_err(format!("cannot read {}: {e}", path.display())))?;
        let hash = fnv1a64(&bytes);
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| cfg_err(format!("{} is not UTF-8", path.display())))?;
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok((cfg, hash))
    }

    pub fn validate(&self) -> Result<()> {
        let domain = self.domain.build()?;
        let s = self.frac.s;
        if !(s > 0.0 && s < 1.0) {
            return Err(cfg_err(format!("frac.s must lie strictly in (0,1), got {s}")));
        }
        if !(self.grid.h > 0.0) || !self.grid.h.is_finite() {
            return Err(cfg_err(format!("grid.h must be positive, got {}", self.grid.h)));
        }
        if self.grid.h > domain.diameter() / 4.0 {
            return Err(cfg_err(format!(
                "grid.h = {} too coarse for domain diameter {}",
                self.grid.h,
                domain.diameter()
            )));
        }
        if self.grid.r_trunc < domain.diameter() {
            return Err(cfg_err(format!(
                "grid.r_trunc = {} must be at least the domain diameter {}",
                self.grid.r_trunc,
                domain.diameter()
            )));
        }
        if !(self.grid.inward_ratio > 1.0) || !(self.grid.outward_ratio > 1.0) {
            return Err(cfg_err("shell ratios must exceed 1".to_owned()));
        }
        if !(self.p > 1.0) {
            return Err(cfg_err(format!("p must exceed 1, got {}", self.p)));
        }
        parse_preset(&self.coefficients.a)
            .map_err(|e| cfg_err(format!("coefficients.a: {e}")))?;
        parse_preset(&self.coefficients.q)
            .map_err(|e| cfg_err(format!("coefficients.q: {e}")))?;
        parse_preset(&self.coefficients.f)
            .map_err(|e| cfg_err(format!("coefficients.f: {e}")))?;
        if self.solver.gamma < 0.0 {
            return Err(cfg_err(format!("solver.gamma must be >= 0, got {}", self.solver.gamma)));
        }
        for (name, v) in [
            ("solver.eps0", self.solver.eps0),
            ("solver.eps_floor", self.solver.eps_floor),
            ("solver.fp_tol", self.solver.fp_tol),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(cfg_err(format!("{name} must be positive, got {v}")));
            }
        }
        if self.solver.max_fp_iters == 0 {
            return Err(cfg_err("solver.max_fp_iters must be positive".to_owned()));
        }
        if self.verify.levels == 0 || self.verify.pairs == 0 {
            return Err(cfg_err("verify.levels and verify.pairs must be positive".to_owned()));
        }
        if self.rates.s_values.is_empty()
            || self.rates.s_values.iter().any(|&v| !(v > 0.0 && v < 1.0))
        {
            return Err(cfg_err("rates.s_values must be nonempty with entries in (0,1)".to_owned()));
        }
        if !(self.rates.h > 0.0) {
            return Err(cfg_err(format!("rates.h must be positive, got {}", self.rates.h)));
        }
        if self.oracle.n < 8 || self.oracle.n > 64 {
            return Err(cfg_err(format!(
                "oracle.n must lie in [8, 64] (exhaustive comparison), got {}",
                self.oracle.n
            )));
        }
        if self.oracle.s_values.is_empty()
            || self.oracle.s_values.iter().any(|&v| !(v > 0.0 && v < 1.0))
        {
            return Err(cfg_err("oracle.s_values must be nonempty with entries in (0,1)".to_owned()));
        }
        if self.campaign.trials == 0 {
            return Err(cfg_err("campaign.trials must be positive".to_owned()));
        }
        if !(self.campaign.h > 0.0 && self.campaign.h <= 0.25) {
            return Err(cfg_err(format!("campaign.h must lie in (0, 0.25], got {}", self.campaign.h)));
        }
        Ok(())
    }

    /// Well-posedness window for (s, p) in dimension N: below s = 1/2 the
    /// exponent must satisfy N < p < 1/(1-2s) with s > (N-1)/(2N); at and
    /// above s = 1/2 it must satisfy p > N with s < 1/2 + 1/(2p). Outside
    /// the window the diagnostics still run; the caller prints this warning.
    pub fn sp_range_warning(&self) -> Option<String> {
        let s = self.frac.s;
        let p = self.p;
        let n = match self.domain {
            DomainConfig::Interval { .. } => 1.0,
            DomainConfig::Disk { .. } => 2.0,
        };
        let ok = if s < 0.5 {
            s > (n - 1.0) / (2.0 * n) && p > n && p < 1.0 / (1.0 - 2.0 * s)
        } else {
            p > n && s < 0.5 + 1.0 / (2.0 * p)
        };
        if ok {
            None
        } else {
            Some(format!(
                "warning: (s, p) = ({s}, {p}) lies outside the second-order well-posedness window in dimension {n}; surrogate-norm diagnostics may not stabilize"
            ))
        }
    }
}

/// 64-bit FNV-1a over raw bytes; stable across platforms and runs.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Parse a coefficient preset: a bare number means a constant; otherwise
/// `name(args)` with names const, cos, gauss, poly, rf.
pub fn parse_preset(spec: &str) -> Result<Preset1d> {
    let t = spec.trim();
    if let Ok(c) = t.parse::<f64>() {
        return Ok(Preset1d::Const { c });
    }
    let open = t
        .find('(')
        .ok_or_else(|| cfg_err(format!("preset `{t}` is neither a number nor name(args)")))?;
    if !t.ends_with(')') {
        return Err(cfg_err(format!("preset `{t}` is missing the closing parenthesis")));
    }
    let name = t[..open].trim().to_ascii_lowercase();
    let args: Vec<f64> = {
        let inner = &t[open + 1..t.len() - 1];
        if inner.trim().is_empty() {
            Vec::new()
        } else {
            inner
                .split(',')
                .map(|a| {
                    a.trim()
                        .parse::<f64>()
                        .map_err(|_| cfg_err(format!("preset `{t}`: bad number `{}`", a.trim())))
                })
                .collect::<Result<_>>()?
        }
    };
    let want = |lo: usize, hi: usize| -> Result<()> {
        if args.len() < lo || args.len() > hi {
            Err(cfg_err(format!(
                "preset `{t}`: expected {lo}..={hi} arguments, got {}",
                args.len()
            )))
        } else {
            Ok(())
        }
    };
    let as_count = |v: f64, what: &str| -> Result<u32> {
        if v.fract() == 0.0 && (0.0..=1e9).contains(&v) {
            Ok(v as u32)
        } else {
            Err(cfg_err(format!("preset `{t}`: {what} must be a small nonnegative integer")))
        }
    };
    match name.as_str() {
        "const" => {
            want(1, 1)?;
            Ok(Preset1d::Const { c: args[0] })
        }
        "cos" => {
            want(1, 2)?;
            Ok(Preset1d::Cosine {
                k: as_count(args[0], "mode number")?,
                amp: args.get(1).copied().unwrap_or(1.0),
            })
        }
        "gauss" => {
            want(2, 3)?;
            if !(args[1] > 0.0) {
                return Err(cfg_err(format!("preset `{t}`: width must be positive")));
            }
            Ok(Preset1d::Gaussian {
                center: args[0],
                width: args[1],
                amp: args.get(2).copied().unwrap_or(1.0),
            })
        }
        "poly" => {
            want(1, 16)?;
            Ok(Preset1d::Poly { coeffs: args })
        }
        "rf" => {
            want(2, 3)?;
            let seed = if args[0].fract() == 0.0 && args[0] >= 0.0 {
                args[0] as u64
            } else {
                return Err(cfg_err(format!("preset `{t}`: seed must be a nonnegative integer")));
            };
            Ok(Preset1d::RandomFourier {
                seed,
                modes: as_count(args[1], "mode count")?,
                amp: args.get(2).copied().unwrap_or(1.0),
            })
        }
        other => Err(cfg_err(format!(
            "unknown preset `{other}`; available: const, cos, gauss, poly, rf"
        ))),
    }
}
