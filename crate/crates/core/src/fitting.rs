//! Least-squares fits behind the rate measurements: straight lines, power
//! laws on log-log data, a logarithmic blow-up model, and AIC comparison
//! between the two on a shared raw-unit residual.

use crate::{Error, Result};

/// Ordinary least-squares line fit y = intercept + slope * x.
#[derive(Clone, Copy, Debug)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Standard error of the slope; slope +- 2*stderr is the reported band.
    pub stderr_slope: f64,
    pub rss: f64,
    pub n: usize,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(Error::InvalidParameter("fit inputs have mismatched lengths".into()));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InvalidParameter(format!("line fit needs at least 3 points, got {n}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite value in fit input".into()));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|&v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidParameter("degenerate fit: all abscissae equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum();
    let tss: f64 = y.iter().map(|&b| (b - my) * (b - my)).sum();
    let r_squared = if tss > 1e-300 { 1.0 - rss / tss } else { 1.0 };
    let stderr_slope = if n > 2 { (rss / (nf - 2.0) / sxx).sqrt() } else { f64::NAN };
    Ok(LineFit { slope, intercept, r_squared, stderr_slope, rss, n })
}

/// Power-law fit g ~ C * delta^slope via least squares on (ln delta, ln g).
/// Requires strictly positive responses.
pub fn fit_power_law(delta: &[f64], g: &[f64]) -> Result<LineFit> {
    if g.iter().any(|&v| v <= 0.0) || delta.iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidParameter(
            "power-law fit requires strictly positive data".into(),
        ));
    }
    let lx: Vec<f64> = delta.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = g.iter().map(|v| v.ln()).collect();
    fit_line(&lx, &ly)
}

/// Logarithmic blow-up model g ~ C * (ln(k_scale/delta))^b, fitted as a line
/// in ln(ln(k_scale/delta)) against ln g. The scale must exceed every delta
/// so the inner logarithm stays positive; b near 1 is the plain-log regime.
pub fn fit_log_model(delta: &[f64], g: &[f64], k_scale: f64) -> Result<LineFit> {
    if delta.iter().any(|&v| v <= 0.0) || g.iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidParameter("log model requires positive data".into()));
    }
    if delta.iter().any(|&v| k_scale / v <= 1.0) {
        return Err(Error::InvalidParameter(
            "log-model scale must exceed every shell distance".into(),
        ));
    }
    let lx: Vec<f64> = delta.iter().map(|&v| (k_scale / v).ln().ln()).collect();
    let ly: Vec<f64> = g.iter().map(|v| v.ln()).collect();
    fit_line(&lx, &ly)
}

/// Akaike information criterion for a least-squares model with k parameters.
pub fn aic(rss: f64, n: usize, k: usize) -> f64 {
    let nf = n as f64;
    nf * (rss.max(1e-300) / nf).ln() + 2.0 * k as f64
}

/// Which of the two blow-up models explains shell data better. Both models
/// are two-parameter lines fitted by least squares on the same response
/// (ln g), so the AIC comparison is fair and reduces to comparing residual
/// sums of squares.
#[derive(Clone, Copy, Debug)]
pub struct RateComparison {
    pub power: LineFit,
    pub log: LineFit,
    pub aic_power: f64,
    pub aic_log: f64,
    pub prefers_log: bool,
}

pub fn compare_rate_models(delta: &[f64], g: &[f64], k_scale: f64) -> Result<RateComparison> {
    let power = fit_power_law(delta, g)?;
    let log = fit_log_model(delta, g, k_scale)?;
    let n = delta.len();
    let aic_power = aic(power.rss, n, 2);
    let aic_log = aic(log.rss, n, 2);
    Ok(RateComparison { power, log, aic_power, aic_log, prefers_log: aic_log < aic_power })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn line_fit_recovers_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|&v| 2.5 * v - 1.0).collect();
        let f = fit_line(&x, &y).unwrap();
        assert_relative_eq!(f.slope, 2.5, epsilon = 1e-12);
        assert_relative_eq!(f.intercept, -1.0, epsilon = 1e-12);
        assert_relative_eq!(f.r_squared, 1.0, epsilon = 1e-12);
        assert!(f.stderr_slope < 1e-6);
    }

    #[test]
    fn line_fit_rejects_degenerate_input() {
        assert!(fit_line(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(fit_line(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(fit_line(&[1.0, 2.0, f64::NAN], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn power_law_fit_recovers_exponent() {
        let delta: Vec<f64> = (1..10).map(|k| 0.5f64.powi(k)).collect();
        let g: Vec<f64> = delta.iter().map(|&d| 3.0 * d.powf(-0.5)).collect();
        let f = fit_power_law(&delta, &g).unwrap();
        assert_relative_eq!(f.slope, -0.5, epsilon = 1e-10);
        assert!(fit_power_law(&delta, &[0.0; 9]).is_err());
    }

    #[test]
    fn aic_prefers_the_generating_model() {
        let delta: Vec<f64> = (1..12).map(|k| 0.5f64.powi(k)).collect();
        let k_scale = 5.0;
        let g_log: Vec<f64> = delta.iter().map(|&d| 0.7 * (k_scale / d).ln()).collect();
        let c = compare_rate_models(&delta, &g_log, k_scale).unwrap();
        assert!(c.prefers_log, "aic_log={} aic_power={}", c.aic_log, c.aic_power);

        let g_pow: Vec<f64> = delta.iter().map(|&d| 2.0 * d.powf(-0.3)).collect();
        let c2 = compare_rate_models(&delta, &g_pow, k_scale).unwrap();
        assert!(!c2.prefers_log, "aic_log={} aic_power={}", c2.aic_log, c2.aic_power);
    }

    #[test]
    fn log_model_rejects_too_small_scale() {
        let delta = [0.5, 0.25, 0.125];
        let g = [1.0, 2.0, 3.0];
        assert!(fit_log_model(&delta, &g, 0.4).is_err());
        assert!(fit_log_model(&delta, &g, 5.0).is_ok());
    }
}
